//! Counterexample-guided exploration.
//!
//! The counterexample is propagated concretely through the DSA graph. The
//! failing path is diagnosed first; then every set of up to `b_cond`
//! decisions is flipped, depth-first over `decision_order`, and each flip
//! that makes the program satisfy its postcondition is diagnosed by asking
//! which earlier assignments forced the original branch.

use crate::cfg::{lower, Branch, Cfg, CfgError, EdgeLabel, NodeId, NodeKind};
use crate::frontend::{parse_program, typecheck, Diagnostic, ParseError, SourceLoc};
use crate::interp::{self, InterpError};
use crate::ir::{
    assign_to_constraint, eval_formula, negate, Constraint, ConstraintKind, ConstraintSet, Formula, LinTerm, Model,
    SsaName,
};
use crate::mcs::{enumerate_active, ActiveSoft, McsBounds, McsOutcome, McsStatus};
use crate::solver::{new_solver, Domain, Solver, SolverError, Stats};
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Concrete input values keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Counterexample {
    pub inputs: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CounterexampleError {
    #[error("counterexample is not valid JSON: {0}")]
    Json(String),
    #[error("counterexample must be a JSON object mapping parameter names to integers")]
    NotObject,
    #[error("value of `{0}` is not a 64-bit integer")]
    NotInteger(String),
    #[error("`{0}` is given more than once")]
    Duplicate(String),
    #[error("`{0}` is not a parameter of the function")]
    UnknownParameter(String),
    #[error("no value given for parameter `{0}`")]
    MissingParameter(String),
    #[error("value {value} of `{name}` is outside the domain [{lo}, {hi}]")]
    OutOfDomain { name: String, value: i64, lo: i64, hi: i64 },
    #[error("counterexample violates the precondition")]
    PreconditionViolated,
}

impl Counterexample {
    /// Later pairs with the same name overwrite earlier ones; see
    /// [`Counterexample::try_from_pairs`] for a strict variant.
    pub fn from_pairs<K: Into<String>>(pairs: impl IntoIterator<Item = (K, i64)>) -> Self {
        Counterexample {
            inputs: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn try_from_pairs<K: Into<String>>(
        pairs: impl IntoIterator<Item = (K, i64)>,
    ) -> Result<Self, CounterexampleError> {
        let mut inputs = BTreeMap::new();
        for (k, v) in pairs {
            let k = k.into();
            if inputs.contains_key(&k) {
                return Err(CounterexampleError::Duplicate(k));
            }
            inputs.insert(k, v);
        }
        Ok(Counterexample { inputs })
    }

    pub fn from_json(text: &str) -> Result<Self, CounterexampleError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CounterexampleError::Json(e.to_string()))?;
        let serde_json::Value::Object(map) = value else {
            return Err(CounterexampleError::NotObject);
        };
        let mut inputs = BTreeMap::new();
        for (k, v) in map {
            let n = v.as_i64().ok_or_else(|| CounterexampleError::NotInteger(k.clone()))?;
            inputs.insert(k, n);
        }
        Ok(Counterexample { inputs })
    }

    /// Checks names against the parameters and values against the domain.
    pub fn validate(&self, g: &Cfg, domain: Domain) -> Result<(), CounterexampleError> {
        for name in self.inputs.keys() {
            if !g.params.iter().any(|p| &p.name == name) {
                return Err(CounterexampleError::UnknownParameter(name.clone()));
            }
        }
        for p in &g.params {
            let Some(&value) = self.inputs.get(&p.name) else {
                return Err(CounterexampleError::MissingParameter(p.name.clone()));
            };
            if value < domain.lo || value > domain.hi {
                return Err(CounterexampleError::OutOfDomain {
                    name: p.name.clone(),
                    value,
                    lo: domain.lo,
                    hi: domain.hi,
                });
            }
        }
        if let Some(pre) = &g.precondition {
            if !eval_formula(pre, &self.input_model()).unwrap_or(false) {
                return Err(CounterexampleError::PreconditionViolated);
            }
        }
        Ok(())
    }

    fn input_model(&self) -> Model {
        self.inputs.iter().map(|(k, v)| (SsaName::new(k.clone(), 0), *v)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub b_cond: usize,
    pub mcs: McsBounds,
    pub domain: Domain,
    /// Share solver frames between paths with a common prefix.
    pub incremental: bool,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig {
            b_cond: 2,
            mcs: McsBounds { b_mcs: 3, k_max: 2 },
            domain: Domain::default(),
            incremental: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionStep {
    pub decision: NodeId,
    pub loc: SourceLoc,
    pub taken: Branch,
    pub deviated: bool,
    /// Number of constraints collected before reaching this decision.
    pub collected_before: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTrace {
    pub decisions: Vec<DecisionStep>,
    /// Assignments and synthetic copies in path order.
    pub collected: Vec<Constraint>,
    pub model: Model,
    pub result: i64,
}

impl PathTrace {
    /// Decision sequence up to and including step `last`.
    fn key(&self, last: usize) -> Vec<(NodeId, Branch)> {
        self.decisions[..=last].iter().map(|s| (s.decision, s.taken)).collect()
    }

    /// Index of the deviated step latest on the path.
    pub fn last_deviation(&self) -> Option<usize> {
        self.decisions.iter().rposition(|s| s.deviated)
    }

    /// Constraints collected between decision `seg - 1` and decision `seg`.
    fn segment(&self, seg: usize) -> &[Constraint] {
        let start = if seg == 0 { 0 } else { self.decisions[seg - 1].collected_before };
        let end = self.decisions.get(seg).map_or(self.collected.len(), |s| s.collected_before);
        &self.collected[start..end]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PropagateError {
    #[error("deviated decision {0} is not on the path")]
    DeviationUnreached(NodeId),
    #[error("{loc}: value {value} leaves the domain")]
    Overflow { loc: SourceLoc, value: i128 },
    #[error("no value for input `{0}`")]
    MissingInput(String),
}

/// Runs the counterexample through the DSA graph, flipping the branch at
/// every decision in `deviations`.
pub fn propagate(
    g: &Cfg,
    ce: &Counterexample,
    deviations: &BTreeSet<NodeId>,
    domain: Domain,
) -> Result<PathTrace, PropagateError> {
    assert!(g.in_dsa, "propagate expects a DSA graph");
    let mut model = Model::new();
    for p in &g.params {
        let v = ce
            .inputs
            .get(&p.name)
            .ok_or_else(|| PropagateError::MissingInput(p.name.clone()))?;
        model.insert(SsaName::new(p.name.clone(), 0), *v);
    }
    let mut decisions = Vec::new();
    let mut collected = Vec::new();
    let mut node = g.entry;
    while node != g.exit {
        let label = match &g.node(node).kind {
            NodeKind::Entry => EdgeLabel::Next,
            NodeKind::Exit => unreachable!(),
            NodeKind::Block(items) => {
                for a in items {
                    let value = a.rhs.eval(&model).expect("DSA reads only defined names");
                    if value < domain.lo as i128 || value > domain.hi as i128 {
                        return Err(PropagateError::Overflow { loc: a.loc, value });
                    }
                    model.insert(a.target.clone(), value as i64);
                    let index = collected.len();
                    collected.push(assign_to_constraint(a.id, &a.target, &a.rhs, a.loc, a.synthetic, index));
                }
                EdgeLabel::Next
            }
            NodeKind::Decision { guard, loc } => {
                let holds = eval_formula(guard, &model).expect("DSA reads only defined names");
                let deviated = deviations.contains(&node);
                let taken = Branch::from_bool(holds != deviated);
                decisions.push(DecisionStep {
                    decision: node,
                    loc: *loc,
                    taken,
                    deviated,
                    collected_before: collected.len(),
                });
                taken.into()
            }
        };
        node = g.successor(node, label).expect("well-formed CFG");
    }
    if let Some(d) = deviations.iter().find(|d| !decisions.iter().any(|s| s.decision == **d)) {
        return Err(PropagateError::DeviationUnreached(*d));
    }
    let result = model.get(&g.result).expect("result defined on every path");
    Ok(PathTrace {
        decisions,
        collected,
        model,
        result,
    })
}

pub fn path_satisfies_post(t: &PathTrace, g: &Cfg) -> bool {
    eval_formula(&g.postcondition, &t.model).expect("postcondition reads inputs and result")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisKind {
    InitialPath,
    DeviationCorrects,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deviation {
    pub decision: NodeId,
    pub loc: SourceLoc,
    /// Branch taken after flipping.
    pub taken: Branch,
    pub guard: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnosis {
    pub kind: DiagnosisKind,
    pub deviated: Vec<Deviation>,
    pub mcs: Vec<Vec<Constraint>>,
    pub status: McsStatus,
    pub path: Vec<DecisionStep>,
    pub result: i64,
    /// The constraint system the sets were computed over.
    pub csp: ConstraintSet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorerStats {
    /// Paths whose prefix was loaded, the initial path included.
    pub paths_explored: u64,
    /// Deviated paths that still violate the postcondition.
    pub paths_ignored: u64,
    pub rejected_marked: u64,
    pub rejected_prefix: u64,
    pub deviations_unreached: u64,
    pub abandoned_overflow: u64,
    pub solver_checks: u64,
    pub solver_assertions: u64,
    pub solver_propagations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocFaultsReport {
    pub program: String,
    pub counterexample: Counterexample,
    pub config: ExplorerConfig,
    pub diagnoses: Vec<Diagnosis>,
    pub stats: ExplorerStats,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{} error(s) in program", .0.len())]
    Typecheck(Vec<Diagnostic>),
    #[error(transparent)]
    Lower(#[from] CfgError),
    #[error(transparent)]
    Counterexample(#[from] CounterexampleError),
    #[error("counterexample does not violate postcondition")]
    NotViolating,
    #[error("counterexample cannot be executed: {0}")]
    Execution(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<InterpError> for AnalysisError {
    fn from(e: InterpError) -> Self {
        AnalysisError::Execution(e.to_string())
    }
}

impl From<PropagateError> for AnalysisError {
    fn from(e: PropagateError) -> Self {
        AnalysisError::Execution(e.to_string())
    }
}

/// Parses, checks and lowers `src`, validates the counterexample with the
/// reference interpreter, and runs the exploration.
pub fn analyze(src: &str, ce: &Counterexample, config: &ExplorerConfig) -> Result<LocFaultsReport, AnalysisError> {
    let f = parse_program(src)?;
    let diags = typecheck(&f);
    if !diags.is_empty() {
        return Err(AnalysisError::Typecheck(diags));
    }
    let g = lower(&f)?;
    ce.validate(&g, config.domain)?;
    let out = interp::run(&f, &ce.inputs)?;
    if interp::postcondition_holds(&f, &ce.inputs, out)? {
        return Err(AnalysisError::NotViolating);
    }
    run_locfaults(&g, ce, config)
}

fn input_constraints(g: &Cfg, ce: &Counterexample) -> Vec<Constraint> {
    g.params
        .iter()
        .enumerate()
        .map(|(i, p)| Constraint {
            id: g.input_constraint_id(i),
            formula: Formula::eq(
                LinTerm::var(SsaName::new(p.name.clone(), 0)),
                LinTerm::constant(ce.inputs[&p.name]),
            ),
            kind: ConstraintKind::Input,
            loc: p.loc,
            path_index: 0,
        })
        .collect()
}

/// Where path constraints live while they are diagnosed.
enum Backend {
    /// One solver; a frame per decision step, shared between paths.
    Incremental {
        solver: Solver,
        base: ActiveSoft,
        stack: Vec<((NodeId, Branch), ActiveSoft)>,
    },
    /// A fresh solver for every path.
    Fresh { domain: Domain, stats: Stats, current: Option<(Solver, ActiveSoft)> },
}

impl Backend {
    fn new(config: &ExplorerConfig, inputs: &[Constraint], initial: &PathTrace) -> Result<Backend, SolverError> {
        if !config.incremental {
            new_solver(config.domain)?;
            return Ok(Backend::Fresh {
                domain: config.domain,
                stats: Stats::default(),
                current: None,
            });
        }
        let mut solver = new_solver(config.domain)?;
        for c in inputs {
            solver.assert_hard(&c.formula);
        }
        let base = initial
            .segment(0)
            .iter()
            .map(|c| (solver.assert_soft(&c.formula), c.clone()))
            .collect();
        Ok(Backend::Incremental {
            solver,
            base,
            stack: Vec::new(),
        })
    }

    /// Loads the constraints collected before decision step `steps`.
    fn load(&mut self, t: &PathTrace, steps: usize, inputs: &[Constraint]) {
        match self {
            Backend::Incremental { solver, stack, .. } => {
                let common = stack
                    .iter()
                    .zip(&t.decisions[..steps])
                    .take_while(|((key, _), s)| *key == (s.decision, s.taken))
                    .count();
                while stack.len() > common {
                    solver.pop();
                    stack.pop();
                }
                for i in common..steps {
                    solver.push();
                    let sels = t
                        .segment(i + 1)
                        .iter()
                        .map(|c| (solver.assert_soft(&c.formula), c.clone()))
                        .collect();
                    let s = &t.decisions[i];
                    stack.push(((s.decision, s.taken), sels));
                }
            }
            Backend::Fresh { domain, stats, current } => {
                if let Some((old, _)) = current.take() {
                    add_stats(stats, old.stats());
                }
                let mut solver = new_solver(*domain).expect("domain checked at construction");
                for c in inputs {
                    solver.assert_hard(&c.formula);
                }
                let end = t.decisions.get(steps).map_or(t.collected.len(), |s| s.collected_before);
                let sels = t.collected[..end]
                    .iter()
                    .map(|c| (solver.assert_soft(&c.formula), c.clone()))
                    .collect();
                *current = Some((solver, sels));
            }
        }
    }

    /// Enumerates correction sets of the loaded prefix plus `extra` hard
    /// constraints.
    fn diagnose(&mut self, extra: &[Constraint], bounds: McsBounds) -> McsOutcome {
        let (solver, active) = match self {
            Backend::Incremental { solver, base, stack } => {
                let mut active = base.clone();
                for (_, sels) in stack.iter() {
                    active.extend(sels.iter().cloned());
                }
                (solver, active)
            }
            Backend::Fresh { current, .. } => {
                let (solver, sels) = current.as_mut().expect("a path is loaded");
                (solver, sels.clone())
            }
        };
        solver.push();
        for c in extra {
            solver.assert_hard(&c.formula);
        }
        let out = enumerate_active(solver, &active, bounds);
        solver.pop();
        out
    }

    fn stats(&self) -> Stats {
        match self {
            Backend::Incremental { solver, .. } => solver.stats(),
            Backend::Fresh { stats, current, .. } => {
                let mut s = *stats;
                if let Some((solver, _)) = current {
                    add_stats(&mut s, solver.stats());
                }
                s
            }
        }
    }
}

fn add_stats(acc: &mut Stats, s: Stats) {
    acc.checks += s.checks;
    acc.propagations += s.propagations;
    acc.assertions += s.assertions;
}

fn constraint_set(hard: Vec<Constraint>, soft: &[Constraint]) -> ConstraintSet {
    ConstraintSet {
        hard,
        soft: soft.to_vec(),
    }
}

/// Runs the full exploration on a DSA graph.
pub fn run_locfaults(g: &Cfg, ce: &Counterexample, config: &ExplorerConfig) -> Result<LocFaultsReport, AnalysisError> {
    assert!(g.in_dsa, "run_locfaults expects a DSA graph");
    ce.validate(g, config.domain)?;
    let initial = propagate(g, ce, &BTreeSet::new(), config.domain)?;
    if path_satisfies_post(&initial, g) {
        return Err(AnalysisError::NotViolating);
    }
    let inputs = input_constraints(g, ce);
    let mut backend = Backend::new(config, &inputs, &initial)?;
    let mut stats = ExplorerStats::default();
    let mut diagnoses = Vec::new();

    let post = Constraint {
        id: g.postcondition_constraint_id(),
        formula: g.postcondition.clone(),
        kind: ConstraintKind::Postcondition,
        loc: g.postcondition_loc,
        path_index: 0,
    };
    backend.load(&initial, initial.decisions.len(), &inputs);
    stats.paths_explored += 1;
    let outcome = backend.diagnose(std::slice::from_ref(&post), config.mcs);
    let mut hard = inputs.clone();
    hard.push(post);
    diagnoses.push(Diagnosis {
        kind: DiagnosisKind::InitialPath,
        deviated: Vec::new(),
        mcs: outcome.sets,
        status: outcome.status,
        path: initial.decisions.clone(),
        result: initial.result,
        csp: constraint_set(hard, &initial.collected),
    });

    let mut marks: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut explored: BTreeSet<Vec<(NodeId, Branch)>> = BTreeSet::new();
    let n = g.decision_order.len();
    for level in 1..=config.b_cond.min(n) {
        for combo in (0..n).combinations(level) {
            let devs: BTreeSet<NodeId> = combo.iter().map(|i| g.decision_order[*i]).collect();
            let trace = match propagate(g, ce, &devs, config.domain) {
                Ok(t) => t,
                Err(PropagateError::DeviationUnreached(_)) => {
                    stats.deviations_unreached += 1;
                    continue;
                }
                Err(PropagateError::Overflow { .. }) => {
                    stats.abandoned_overflow += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let last = trace.last_deviation().expect("at least one deviation");
            let step = &trace.decisions[last];
            if marks.get(&step.decision).is_some_and(|m| *m <= level) {
                stats.rejected_marked += 1;
                continue;
            }
            if !explored.insert(trace.key(last)) {
                stats.rejected_prefix += 1;
                continue;
            }
            stats.paths_explored += 1;
            backend.load(&trace, last, &inputs);
            if !path_satisfies_post(&trace, g) {
                stats.paths_ignored += 1;
                continue;
            }
            let guard = g.guard(step.decision).expect("decision").clone();
            let required = Constraint {
                id: g.guard_constraint_id(step.decision, step.taken),
                formula: match step.taken {
                    Branch::Then => guard,
                    Branch::Else => negate(&guard),
                },
                kind: ConstraintKind::Guard,
                loc: step.loc,
                path_index: step.collected_before,
            };
            let outcome = backend.diagnose(std::slice::from_ref(&required), config.mcs);
            let mut hard = inputs.clone();
            hard.push(required);
            marks.entry(step.decision).or_insert(level);
            diagnoses.push(Diagnosis {
                kind: DiagnosisKind::DeviationCorrects,
                deviated: trace
                    .decisions
                    .iter()
                    .filter(|s| s.deviated)
                    .map(|s| Deviation {
                        decision: s.decision,
                        loc: s.loc,
                        taken: s.taken,
                        guard: g.guard(s.decision).expect("decision").clone(),
                    })
                    .collect(),
                mcs: outcome.sets,
                status: outcome.status,
                path: trace.decisions.clone(),
                result: trace.result,
                csp: constraint_set(hard, &trace.collected[..step.collected_before]),
            });
        }
    }

    let s = backend.stats();
    stats.solver_checks = s.checks;
    stats.solver_assertions = s.assertions;
    stats.solver_propagations = s.propagations;
    Ok(LocFaultsReport {
        program: g.name.clone(),
        counterexample: ce.clone(),
        config: *config,
        diagnoses,
        stats,
    })
}
