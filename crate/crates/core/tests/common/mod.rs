#![allow(dead_code)]

use locfaults::frontend::{BoolExpr, Function, SourceLoc, Stmt};
use locfaults::interp::{eval, eval_bool, Env, InterpError};
use locfaults::ir::{eval_formula, Constraint, ConstraintSet, Formula, LinTerm, RelOp, SsaName};
use locfaults::solver::{new_solver, Domain};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    pub counterexample: BTreeMap<String, i64>,
    pub b_cond: usize,
    pub b_mcs: usize,
    pub k_max: usize,
}

pub fn corpus() -> Vec<CorpusEntry> {
    let text = std::fs::read_to_string(corpus_dir().join("corpus.json")).expect("manifest");
    let doc: serde_json::Value = serde_json::from_str(&text).expect("manifest is JSON");
    doc["programs"]
        .as_array()
        .expect("programs")
        .iter()
        .map(|p| CorpusEntry {
            name: p["name"].as_str().unwrap().to_string(),
            source: std::fs::read_to_string(corpus_dir().join(p["source"].as_str().unwrap())).unwrap(),
            counterexample: p["counterexample"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(k, v)| (k.clone(), v.as_i64().unwrap()))
                .collect(),
            b_cond: p["b_cond"].as_u64().unwrap() as usize,
            b_mcs: p["b_mcs"].as_u64().unwrap() as usize,
            k_max: p["k_max"].as_u64().unwrap() as usize,
        })
        .collect()
}

/// Runs the function, flipping every `if` whose location is in `flips`.
/// Written against the syntax tree so it shares nothing with the CFG.
pub fn run_with_flips(f: &Function, inputs: &BTreeMap<String, i64>, flips: &BTreeSet<SourceLoc>) -> Result<i64, InterpError> {
    fn exec(stmts: &[Stmt], env: &mut Env, flips: &BTreeSet<SourceLoc>) -> Result<Option<i64>, InterpError> {
        for s in stmts {
            match s {
                Stmt::Decl { name, init, .. } => {
                    if let Some(e) = init {
                        let v = eval(e, env, None)?;
                        env.insert(name.clone(), v);
                    }
                }
                Stmt::Assign { target, rhs, .. } => {
                    let v = eval(rhs, env, None)?;
                    env.insert(target.clone(), v);
                }
                Stmt::Return { expr, .. } => return eval(expr, env, None).map(Some),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                } => {
                    let taken = eval_bool(cond, env, None)? != flips.contains(loc);
                    if let Some(v) = exec(if taken { then_branch } else { else_branch }, env, flips)? {
                        return Ok(Some(v));
                    }
                }
            }
        }
        Ok(None)
    }
    let mut env: Env = inputs.clone();
    Ok(exec(&f.body, &mut env, flips)?.expect("trailing return"))
}

pub fn post_holds(post: &BoolExpr, inputs: &BTreeMap<String, i64>, result: i64) -> bool {
    eval_bool(post, inputs, Some(result)).expect("postcondition evaluates")
}

/// Outcome of checking one correction set against its constraint system.
#[derive(Debug, PartialEq, Eq)]
pub enum McsViolation {
    RemovalUnsat,
    NotMinimal(usize),
}

/// Removing `set` must leave a satisfiable system, and putting back any
/// one member must make it unsatisfiable again.
pub fn check_mcs(cs: &ConstraintSet, set: &[Constraint], domain: Domain) -> Result<(), McsViolation> {
    let removed: BTreeSet<_> = set.iter().map(|c| c.id).collect();
    let kept: Vec<&Constraint> = cs.soft.iter().filter(|c| !removed.contains(&c.id)).collect();
    let sat_with = |extra: Option<&Constraint>| {
        let mut s = new_solver(domain).unwrap();
        for c in cs.hard.iter().chain(kept.iter().copied()).chain(extra) {
            s.assert_hard(&c.formula);
        }
        s.check().is_sat()
    };
    if !sat_with(None) {
        return Err(McsViolation::RemovalUnsat);
    }
    for (i, m) in set.iter().enumerate() {
        if sat_with(Some(m)) {
            return Err(McsViolation::NotMinimal(i));
        }
    }
    Ok(())
}

pub fn var(i: usize) -> SsaName {
    SsaName::new(format!("x{i}"), 0)
}

pub fn random_term(rng: &mut impl Rng, nvars: usize, max_terms: usize) -> LinTerm {
    let mut t = LinTerm::constant(rng.gen_range(-4..=4));
    for _ in 0..rng.gen_range(1..=max_terms) {
        let c: i64 = *[-2, -1, 1, 1, 2].choose(rng).unwrap();
        let v = LinTerm::var(var(rng.gen_range(0..nvars))).checked_scale(c).unwrap();
        t = t.checked_add(&v).unwrap();
    }
    t
}

pub fn random_atom(rng: &mut impl Rng, nvars: usize) -> Formula {
    let op = *[RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge]
        .choose(rng)
        .unwrap();
    Formula::atom(op, random_term(rng, nvars, 2), LinTerm::constant(rng.gen_range(-4..=4)))
}

/// An atom or, sometimes, a small disjunction or conjunction of atoms.
pub fn random_formula(rng: &mut impl Rng, nvars: usize) -> Formula {
    match rng.gen_range(0..6) {
        0 => Formula::Or(vec![random_atom(rng, nvars), random_atom(rng, nvars)]),
        1 => Formula::And(vec![random_atom(rng, nvars), random_atom(rng, nvars)]),
        2 => Formula::Not(Box::new(random_atom(rng, nvars))),
        _ => random_atom(rng, nvars),
    }
}

/// Exhaustive satisfiability over `[lo, hi]^vars`, evaluating with the
/// formula evaluator only.
pub fn exhaustive_sat(formulas: &[Formula], vars: &[SsaName], lo: i64, hi: i64) -> bool {
    let width = (hi - lo + 1) as u64;
    let total = width.pow(vars.len() as u32);
    (0..total).any(|mut n| {
        let m = vars
            .iter()
            .map(|v| {
                let val = lo + (n % width) as i64;
                n /= width;
                (v.clone(), val)
            })
            .collect();
        formulas.iter().all(|f| eval_formula(f, &m).unwrap())
    })
}

/// A random structured program over at most three parameters. Every local
/// is initialized at the top, so the program always typechecks.
pub fn random_program(rng: &mut impl Rng) -> String {
    let nparams = rng.gen_range(1..=3);
    let nlocals = rng.gen_range(1..=3);
    let params: Vec<String> = (0..nparams).map(|i| format!("p{i}")).collect();
    let locals: Vec<String> = (0..nlocals).map(|i| format!("v{i}")).collect();
    let all: Vec<String> = params.iter().chain(&locals).cloned().collect();

    let mut out = String::new();
    let post = expr(rng, &params);
    let op = ["==", "==", ">=", "<=", "!="].choose(rng).unwrap();
    out.push_str(&format!("/*@ ensures \\result {op} {post}; */\n"));
    let sig: Vec<String> = params.iter().map(|p| format!("int {p}")).collect();
    out.push_str(&format!("int f({}) {{\n", sig.join(", ")));
    for l in &locals {
        out.push_str(&format!("    int {l} = {};\n", expr(rng, &params)));
    }
    block(rng, &all, 1, 2, &mut out);
    let ret = if rng.gen_bool(0.6) {
        locals.choose(rng).unwrap().clone()
    } else {
        expr(rng, &all)
    };
    out.push_str(&format!("    return {ret};\n}}\n"));
    out
}

fn expr(rng: &mut impl Rng, vars: &[String]) -> String {
    let mut parts = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let v = vars.choose(rng).unwrap();
        match rng.gen_range(0..4) {
            0 => parts.push(format!("2 * {v}")),
            1 => parts.push(format!("-{v}")),
            _ => parts.push(v.clone()),
        }
    }
    let k = rng.gen_range(-3..=3);
    if k != 0 {
        parts.push(k.to_string());
    }
    parts.join(" + ")
}

fn cond(rng: &mut impl Rng, vars: &[String]) -> String {
    let op = ["<", "<=", ">", ">=", "==", "!="].choose(rng).unwrap();
    let atom = format!("{} {op} {}", expr(rng, vars), rng.gen_range(-3..=3));
    match rng.gen_range(0..5) {
        0 => format!("{atom} && {} > {}", vars.choose(rng).unwrap(), rng.gen_range(-3..=3)),
        1 => format!("{atom} || {} == {}", vars.choose(rng).unwrap(), rng.gen_range(-3..=3)),
        2 => format!("!({atom})"),
        _ => atom,
    }
}

fn block(rng: &mut impl Rng, vars: &[String], depth: usize, max_depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for _ in 0..rng.gen_range(1..=3) {
        if depth <= max_depth && rng.gen_bool(0.45) {
            out.push_str(&format!("{pad}if ({}) {{\n", cond(rng, vars)));
            block(rng, vars, depth + 1, max_depth, out);
            if rng.gen_bool(0.5) {
                out.push_str(&format!("{pad}}} else {{\n"));
                block(rng, vars, depth + 1, max_depth, out);
            }
            out.push_str(&format!("{pad}}}\n"));
        } else {
            let target = vars.choose(rng).unwrap();
            out.push_str(&format!("{pad}{target} = {};\n", expr(rng, vars)));
        }
    }
}

/// First input in `[-4, 4]^params` (lexicographic) that violates the
/// postcondition, if any.
pub fn find_counterexample(f: &Function) -> Option<BTreeMap<String, i64>> {
    let names: Vec<String> = f.params.iter().map(|p| p.name.clone()).collect();
    let total = 9u32.pow(names.len() as u32);
    (0..total).find_map(|mut n| {
        let inputs: BTreeMap<String, i64> = names
            .iter()
            .map(|p| {
                let v = (n % 9) as i64 - 4;
                n /= 9;
                (p.clone(), v)
            })
            .collect();
        let r = locfaults::interp::run(f, &inputs).ok()?;
        (!post_holds(&f.postcondition, &inputs, r)).then_some(inputs)
    })
}
