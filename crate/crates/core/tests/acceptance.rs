//! Release gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use common::*;
use locfaults::cfg::{lower, NodeKind};
use locfaults::explorer::{propagate, run_locfaults, Counterexample, DiagnosisKind, ExplorerConfig, LocFaultsReport, PropagateError};
use locfaults::frontend::{parse_program, SourceLoc};
use locfaults::ir::{Constraint, ConstraintId, ConstraintKind, ConstraintSet, Formula, RelOp, SsaName};
use locfaults::mcs::{bruteforce_mcs, enumerate_mcs, McsBounds, McsStatus};
use locfaults::solver::{new_solver, Domain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

const SMALL: Domain = Domain { lo: -4, hi: 4 };

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, n: u32, name: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS  {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("criterion {n} ({name}): FAIL  {detail}");
            }
        }
    }
}

/// Every MCS seen by the gate, with the system it came from.
#[derive(Default)]
struct McsLog {
    entries: Vec<(String, ConstraintSet, Vec<Constraint>, Domain)>,
}

impl McsLog {
    fn record_report(&mut self, label: &str, r: &LocFaultsReport) {
        for d in &r.diagnoses {
            for set in &d.mcs {
                self.entries.push((label.to_string(), d.csp.clone(), set.clone(), r.config.domain));
            }
        }
    }
}

fn config_for(e: &CorpusEntry, incremental: bool) -> ExplorerConfig {
    ExplorerConfig {
        b_cond: e.b_cond,
        mcs: McsBounds { b_mcs: e.b_mcs, k_max: e.k_max },
        incremental,
        ..ExplorerConfig::default()
    }
}

fn run_entry(e: &CorpusEntry, incremental: bool) -> LocFaultsReport {
    let f = parse_program(&e.source).unwrap();
    let g = lower(&f).unwrap();
    let ce = Counterexample { inputs: e.counterexample.clone() };
    run_locfaults(&g, &ce, &config_for(e, incremental)).unwrap()
}

fn lines(sets: &[Vec<Constraint>]) -> Vec<Vec<u32>> {
    sets.iter().map(|s| s.iter().map(|c| c.loc.line).collect()).collect()
}

fn absminus_golden() -> Result<String, String> {
    let src = std::fs::read_to_string(corpus_dir().join("absminus.src")).unwrap();
    let config = ExplorerConfig {
        b_cond: 2,
        mcs: McsBounds { b_mcs: 1, k_max: 2 },
        ..ExplorerConfig::default()
    };
    let ce = Counterexample::from_pairs([("i", 0), ("j", 1)]);
    let start = Instant::now();
    let r = locfaults::analyze(&src, &ce, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut problems = Vec::new();
    if r.diagnoses.len() != 2 {
        problems.push(format!("{} diagnoses", r.diagnoses.len()));
    } else {
        let (init, dev) = (&r.diagnoses[0], &r.diagnoses[1]);
        if init.kind != DiagnosisKind::InitialPath || lines(&init.mcs) != [vec![14]] || !init.deviated.is_empty() {
            problems.push(format!("initial path MCS {:?}", lines(&init.mcs)));
        }
        let dev_lines: Vec<u32> = dev.deviated.iter().map(|d| d.loc.line).collect();
        if dev.kind != DiagnosisKind::DeviationCorrects || dev_lines != [11] || lines(&dev.mcs) != [vec![10]] {
            problems.push(format!("deviation {dev_lines:?} MCS {:?}", lines(&dev.mcs)));
        }
    }
    let s = r.stats;
    if s.paths_explored != 3 || s.paths_ignored != 1 || s.rejected_marked != 1 {
        problems.push(format!(
            "explored {} ignored {} rejected {}",
            s.paths_explored, s.paths_ignored, s.rejected_marked
        ));
    }
    if elapsed >= Duration::from_secs(1) {
        problems.push(format!("took {elapsed:?}"));
    }
    if problems.is_empty() {
        Ok(format!(
            "MCS {{14}}, line 11 -> {{10}}, ignored 1, rejected 1, {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn random_system(r: &mut impl Rng) -> ConstraintSet {
    let nvars = r.gen_range(1..=4);
    let mut cs = ConstraintSet::new();
    for i in 0..r.gen_range(0..=2u32) {
        cs.push(Constraint {
            id: ConstraintId(100 + i),
            formula: random_atom(r, nvars),
            kind: ConstraintKind::Input,
            loc: SourceLoc::new(1, 1),
            path_index: 0,
        });
    }
    for i in 0..r.gen_range(1..=8u32) {
        cs.push(Constraint {
            id: ConstraintId(i),
            formula: random_formula(r, nvars),
            kind: ConstraintKind::Assignment,
            loc: SourceLoc::new(i + 2, 1),
            path_index: i as usize,
        });
    }
    cs
}

fn mcs_oracle(log: &mut McsLog) -> Result<String, String> {
    const SYSTEMS: usize = 500;
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut conflicts = 0;
    for n in 0..SYSTEMS {
        let cs = random_system(&mut r);
        let bounds = McsBounds { b_mcs: usize::MAX, k_max: cs.soft.len() };
        let out = enumerate_mcs(&cs, SMALL, bounds).map_err(|e| e.to_string())?;
        let mut got: Vec<Vec<ConstraintId>> = out
            .sets
            .iter()
            .map(|s| {
                let mut ids: Vec<_> = s.iter().map(|c| c.id).collect();
                ids.sort();
                ids
            })
            .collect();
        got.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let want = bruteforce_mcs(&cs, SMALL).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("system {n}: solver {got:?} vs exhaustive {want:?}"));
        }
        if out.status == McsStatus::Conflict {
            conflicts += 1;
        }
        for set in out.sets {
            log.entries.push((format!("random system {n}"), cs.clone(), set, SMALL));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("{SYSTEMS} systems took {elapsed:?}"));
    }
    Ok(format!("{SYSTEMS}/{SYSTEMS} agree ({conflicts} conflicting), {:.2} s", elapsed.as_secs_f64()))
}

/// A conjunction of atoms flattened to `sum(coeff * x) + c op 0` rows.
struct Rows(Vec<(Vec<i64>, i64, RelOp)>);

impl Rows {
    fn new(atoms: &[Formula], vars: &[SsaName]) -> Rows {
        Rows(
            atoms
                .iter()
                .map(|f| {
                    let Formula::Atom { op, lhs, rhs } = f else { panic!("atoms only") };
                    let diff = lhs.checked_sub(rhs).unwrap();
                    let coeffs = vars.iter().map(|v| diff.coeffs().get(v).copied().unwrap_or(0)).collect();
                    (coeffs, diff.constant_part(), *op)
                })
                .collect(),
        )
    }

    fn satisfiable(&self, nvars: usize, lo: i64, hi: i64) -> bool {
        let mut x = vec![lo; nvars];
        loop {
            let ok = self.0.iter().all(|(c, k, op)| {
                let s: i64 = c.iter().zip(&x).map(|(a, b)| a * b).sum::<i64>() + k;
                op.holds(s as i128, 0)
            });
            if ok {
                return true;
            }
            let mut i = 0;
            loop {
                if i == nvars {
                    return false;
                }
                if x[i] < hi {
                    x[i] += 1;
                    break;
                }
                x[i] = lo;
                i += 1;
            }
        }
    }
}

fn solver_oracle() -> Result<String, String> {
    const SYSTEMS: usize = 1000;
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    let mut sat = 0;
    for n in 0..SYSTEMS {
        let nvars = r.gen_range(1..=5);
        let atoms: Vec<Formula> = (0..r.gen_range(1..=8)).map(|_| random_atom(&mut r, nvars)).collect();
        let vars: Vec<SsaName> = (0..nvars).map(var).collect();
        let mut s = new_solver(SMALL).unwrap();
        for a in &atoms {
            s.assert_hard(a);
        }
        let got = s.check().is_sat();
        let want = Rows::new(&atoms, &vars).satisfiable(nvars, SMALL.lo, SMALL.hi);
        if got != want {
            let shown: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
            return Err(format!("conjunction {n} [{}]: solver {got}, exhaustive {want}", shown.join(", ")));
        }
        sat += usize::from(got);
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return Err(format!("{SYSTEMS} conjunctions took {elapsed:?}"));
    }
    Ok(format!("{SYSTEMS}/{SYSTEMS} agree ({sat} sat), {:.2} s", elapsed.as_secs_f64()))
}

fn incremental_equivalence(corpus: &[CorpusEntry], log: &mut McsLog) -> Result<String, String> {
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for e in corpus {
        let inc = run_entry(e, true);
        let fresh = run_entry(e, false);
        log.record_report(&e.name, &inc);
        log.record_report(&format!("{} (fresh)", e.name), &fresh);
        if inc.diagnoses != fresh.diagnoses {
            problems.push(format!("{}: diagnoses differ", e.name));
        }
        let decisions = lower(&parse_program(&e.source).unwrap()).unwrap().decision_order.len();
        let (a, b) = (inc.stats.solver_assertions, fresh.stats.solver_assertions);
        if decisions >= 2 && a >= b {
            problems.push(format!("{}: {a} incremental vs {b} fresh assertions", e.name));
        }
        summary.push(format!("{} {a}<{b}", e.name));
    }
    if problems.is_empty() {
        Ok(summary.join(", "))
    } else {
        Err(problems.join("; "))
    }
}

fn all_inputs(params: &[String], lo: i64, hi: i64) -> Vec<BTreeMap<String, i64>> {
    let mut out = vec![BTreeMap::new()];
    for p in params {
        out = out
            .into_iter()
            .flat_map(|m| {
                (lo..=hi).map(move |v| {
                    let mut m = m.clone();
                    m.insert(p.clone(), v);
                    m
                })
            })
            .collect();
    }
    out
}

fn dsa_invariant(corpus: &[CorpusEntry]) -> Result<String, String> {
    let mut paths = 0;
    let mut inputs_checked = 0;
    for e in corpus {
        let f = parse_program(&e.source).unwrap();
        let g = lower(&f).unwrap();
        for path in g.all_paths() {
            paths += 1;
            let mut seen = BTreeSet::new();
            for (node, _) in &path {
                if let NodeKind::Block(items) = &g.node(*node).kind {
                    for a in items {
                        if !seen.insert(a.target.clone()) {
                            return Err(format!("{}: {} assigned twice on one path", e.name, a.target));
                        }
                    }
                }
            }
        }
        if f.params.len() > 3 {
            continue;
        }
        let names: Vec<String> = f.params.iter().map(|p| p.name.clone()).collect();
        for inputs in all_inputs(&names, -4, 4) {
            if !locfaults::interp::precondition_holds(&f, &inputs).unwrap() {
                continue;
            }
            let expected = locfaults::interp::run(&f, &inputs).unwrap();
            let ce = Counterexample { inputs: inputs.clone() };
            match propagate(&g, &ce, &BTreeSet::new(), Domain::default()) {
                Ok(t) if t.result == expected => inputs_checked += 1,
                Ok(t) => return Err(format!("{} on {inputs:?}: DSA {} vs interpreter {expected}", e.name, t.result)),
                Err(PropagateError::Overflow { .. }) => inputs_checked += 1,
                Err(err) => return Err(format!("{} on {inputs:?}: {err}", e.name)),
            }
        }
    }
    Ok(format!("{} programs, {paths} paths, {inputs_checked} inputs", corpus.len()))
}

fn certified(corpus: &[CorpusEntry], log: &mut McsLog) -> Result<String, String> {
    let mut checked = 0;
    let mut programs: Vec<(String, String, BTreeMap<String, i64>, ExplorerConfig)> = corpus
        .iter()
        .map(|e| (e.name.clone(), e.source.clone(), e.counterexample.clone(), config_for(e, true)))
        .collect();
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut random = 0;
    while random < 200 {
        let src = random_program(&mut r);
        let f = parse_program(&src).unwrap();
        if let Some(inputs) = find_counterexample(&f) {
            random += 1;
            let config = ExplorerConfig {
                b_cond: 2,
                mcs: McsBounds { b_mcs: 2, k_max: 2 },
                ..ExplorerConfig::default()
            };
            programs.push((format!("random program {random}"), src, inputs, config));
        }
    }
    for (name, src, inputs, config) in &programs {
        let f = parse_program(src).unwrap();
        let g = lower(&f).unwrap();
        let report = run_locfaults(&g, &Counterexample { inputs: inputs.clone() }, config).map_err(|e| format!("{name}: {e}"))?;
        log.record_report(name, &report);
        for d in report.diagnoses.iter().filter(|d| d.kind == DiagnosisKind::DeviationCorrects) {
            let flips: BTreeSet<SourceLoc> = d.deviated.iter().map(|v| v.loc).collect();
            let res = run_with_flips(&f, inputs, &flips).map_err(|e| format!("{name}: {e}"))?;
            if !post_holds(&f.postcondition, inputs, res) {
                return Err(format!("{name}: flips {flips:?} give {res}, postcondition fails\n{src}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} deviation diagnoses over {} programs", programs.len()))
}

fn mcs_properties(log: &McsLog) -> Result<String, String> {
    for (label, cs, set, domain) in &log.entries {
        if let Err(v) = check_mcs(cs, set, *domain) {
            let ids: Vec<u32> = set.iter().map(|c| c.id.0).collect();
            return Err(format!("{label}: set {ids:?} fails with {v:?}"));
        }
    }
    Ok(format!("{} sets checked", log.entries.len()))
}

fn main() -> ExitCode {
    let corpus = corpus();
    let mut gate = Gate { failed: 0 };
    let mut log = McsLog::default();

    gate.report(1, "AbsMinus golden run", absminus_golden());
    gate.report(2, "MCS oracle equivalence", mcs_oracle(&mut log));
    let inc = incremental_equivalence(&corpus, &mut log);
    let cert = certified(&corpus, &mut log);
    gate.report(3, "MCS correctness and irreducibility", mcs_properties(&log));
    gate.report(4, "solver oracle equivalence", solver_oracle());
    gate.report(5, "incremental equivalence and benefit", inc);
    gate.report(6, "DSA invariant", dsa_invariant(&corpus));
    gate.report(7, "certified deviations", cert);

    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", gate.failed);
        ExitCode::FAILURE
    }
}
