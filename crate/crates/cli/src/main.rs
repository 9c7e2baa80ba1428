use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use locfaults::cfg::{lower, to_dot};
use locfaults::explorer::{run_locfaults, AnalysisError, CounterexampleError};
use locfaults::frontend::{parse_program, typecheck};
use locfaults::interp;
use locfaults::mcs::McsBounds;
use locfaults::solver::Domain;
use locfaults::{render_json, render_text, Counterexample, ExplorerConfig};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "locfaults", version, about = "Localize faults in a program from a failing input")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze PROGRAM with a counterexample and print suspect statements.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Source file containing one annotated function.
    program: PathBuf,
    /// Input value, repeated per parameter (e.g. `--in i=0 --in j=1`).
    #[arg(long = "in", value_name = "NAME=VALUE", value_parser = parse_binding)]
    inputs: Vec<(String, i64)>,
    /// JSON object mapping parameter names to integers.
    #[arg(long, value_name = "FILE", conflicts_with = "inputs")]
    ce: Option<PathBuf>,
    /// Maximum number of decisions deviated on one path.
    #[arg(long, default_value_t = 2)]
    bcond: usize,
    /// Maximum number of correction sets reported per path.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    bmcs: u32,
    /// Largest correction-set size searched.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    kmax: u32,
    /// Lower bound of the integer domain.
    #[arg(long, default_value_t = Domain::default().lo, allow_negative_numbers = true)]
    lo: i64,
    /// Upper bound of the integer domain.
    #[arg(long, default_value_t = Domain::default().hi, allow_negative_numbers = true)]
    hi: i64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the DSA control-flow graph in Graphviz format.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
    /// Use a fresh solver for every path instead of sharing prefixes.
    #[arg(long)]
    no_incremental: bool,
}

fn parse_binding(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("missing parameter name in `{s}`"));
    }
    let value = value
        .trim()
        .parse::<i64>()
        .map_err(|e| format!("bad value for `{name}`: {e}"))?;
    Ok((name.to_string(), value))
}

/// Failure with a specific process exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(2, msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    if args.lo > args.hi {
        return Err(usage(format!("empty domain: --lo {} > --hi {}", args.lo, args.hi)));
    }
    let ce = match &args.ce {
        Some(path) => Counterexample::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => Counterexample::try_from_pairs(args.inputs.iter().cloned()).map_err(|e| usage(e.to_string()))?,
    };

    let src = read(&args.program)?;
    let shown = args.program.display();
    let f = parse_program(&src).map_err(|e| anyhow::anyhow!("{shown}:{e}"))?;
    let diags = typecheck(&f);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{shown}:{d}");
        }
        bail!("{} error(s) in {shown}", diags.len());
    }
    let g = lower(&f).with_context(|| format!("cannot lower {shown}"))?;
    if let Some(path) = &args.dot {
        fs::write(path, to_dot(&g)).with_context(|| format!("cannot write {}", path.display()))?;
    }

    let config = ExplorerConfig {
        b_cond: args.bcond,
        mcs: McsBounds {
            b_mcs: args.bmcs as usize,
            k_max: args.kmax as usize,
        },
        domain: Domain {
            lo: args.lo,
            hi: args.hi,
        },
        incremental: !args.no_incremental,
    };
    ce.validate(&g, config.domain).map_err(|e| usage(e.to_string()))?;
    let out = interp::run(&f, &ce.inputs).context("cannot execute the counterexample")?;
    if interp::postcondition_holds(&f, &ce.inputs, out).context("cannot evaluate the postcondition")? {
        return Err(Exit(3, "counterexample does not violate postcondition".into()).into());
    }
    let report = match run_locfaults(&g, &ce, &config) {
        Ok(r) => r,
        Err(AnalysisError::NotViolating) => {
            return Err(Exit(3, "counterexample does not violate postcondition".into()).into())
        }
        Err(AnalysisError::Counterexample(e @ CounterexampleError::PreconditionViolated)) => {
            return Err(usage(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    match args.format {
        Format::Text => print!("{}", render_text(&report)),
        Format::Json => print!("{}", render_json(&report)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Exit>().map_or(1, |x| x.0);
            ExitCode::from(code)
        }
    }
}
