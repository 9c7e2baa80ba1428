//! Bounded enumeration of minimal correction sets.
//!
//! A correction set is a set of soft constraints whose removal makes the
//! hard constraints plus the remaining soft ones satisfiable; it is minimal
//! when no proper subset is one. Sets are found by increasing cardinality
//! with an at-most-k bound on disabled selectors, blocking each set (and so
//! all its supersets) once found.

use crate::ir::{eval_formula, Constraint, ConstraintId, ConstraintSet, Model};
use crate::solver::{new_solver, CheckResult, Domain, Selector, Solver, SolverError};
use std::cmp::Reverse;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McsBounds {
    /// Stop once this many sets have been collected.
    pub b_mcs: usize,
    /// Largest cardinality searched.
    pub k_max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McsStatus {
    /// Hard and soft constraints conflict; the sets below explain it.
    Conflict,
    /// Hard and soft constraints are jointly satisfiable: nothing to correct.
    AlreadySat,
    /// The hard constraints alone are unsatisfiable: no correction exists.
    HardUnsat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct McsOutcome {
    pub status: McsStatus,
    /// Each set lists its members in path order.
    pub sets: Vec<Vec<Constraint>>,
}

/// Soft constraints already asserted in a solver, with their selectors.
pub type ActiveSoft = Vec<(Selector, Constraint)>;

/// Builds a fresh solver for `cs` and enumerates its correction sets.
pub fn enumerate_mcs(cs: &ConstraintSet, domain: Domain, bounds: McsBounds) -> Result<McsOutcome, SolverError> {
    let mut solver = new_solver(domain)?;
    for c in &cs.hard {
        solver.assert_hard(&c.formula);
    }
    let active: ActiveSoft = cs.soft.iter().map(|c| (solver.assert_soft(&c.formula), c.clone())).collect();
    Ok(enumerate_active(&mut solver, &active, bounds))
}

fn latest_first(set: &[Constraint]) -> Reverse<Vec<usize>> {
    let mut idx: Vec<usize> = set.iter().map(|c| c.path_index).collect();
    idx.sort_unstable_by(|a, b| b.cmp(a));
    Reverse(idx)
}

/// Enumerates over constraints already loaded in `solver`. The solver is
/// left as it was found.
///
/// Within one cardinality, sets whose latest member is later on the path
/// come first; this order decides which sets survive the `b_mcs` cut.
pub fn enumerate_active(solver: &mut Solver, active: &ActiveSoft, bounds: McsBounds) -> McsOutcome {
    let sels: Vec<Selector> = active.iter().map(|(s, _)| *s).collect();

    solver.push();
    for s in &sels {
        solver.fix_selector(*s, true);
    }
    let all_on = solver.check();
    solver.pop();
    if all_on.is_sat() {
        return McsOutcome {
            status: McsStatus::AlreadySat,
            sets: Vec::new(),
        };
    }

    solver.push();
    for s in &sels {
        solver.fix_selector(*s, false);
    }
    let all_off = solver.check();
    solver.pop();
    if !all_off.is_sat() {
        return McsOutcome {
            status: McsStatus::HardUnsat,
            sets: Vec::new(),
        };
    }

    let mut found: Vec<Vec<Selector>> = Vec::new();
    let mut sets: Vec<Vec<Constraint>> = Vec::new();
    for k in 1..=bounds.k_max.min(sels.len()) {
        if sets.len() >= bounds.b_mcs {
            break;
        }
        solver.push();
        solver.assert_at_most_disabled(&sels, k);
        for block in &found {
            solver.assert_some_enabled(block);
        }
        let mut level: Vec<(Vec<Selector>, Vec<Constraint>)> = Vec::new();
        while let CheckResult::Sat { disabled, .. } = solver.check() {
            debug_assert!(!disabled.is_empty());
            solver.assert_some_enabled(&disabled);
            let mut members: Vec<Constraint> = disabled
                .iter()
                .map(|s| {
                    let pos = sels.iter().position(|x| x == s).expect("selector of an active constraint");
                    active[pos].1.clone()
                })
                .collect();
            members.sort_by_key(|c| (c.path_index, c.id));
            level.push((disabled, members));
        }
        solver.pop();
        level.sort_by(|a, b| {
            latest_first(&a.1)
                .cmp(&latest_first(&b.1))
                .then_with(|| ids(&a.1).cmp(&ids(&b.1)))
        });
        for (block, members) in level {
            found.push(block);
            if sets.len() < bounds.b_mcs {
                sets.push(members);
            }
        }
    }
    McsOutcome {
        status: McsStatus::Conflict,
        sets,
    }
}

fn ids(set: &[Constraint]) -> Vec<ConstraintId> {
    set.iter().map(|c| c.id).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BruteForceError {
    #[error("{0} soft constraints is too many for exhaustive enumeration")]
    TooManySoft(usize),
    #[error("{0} valuations is too many for exhaustive enumeration")]
    TooManyValuations(u128),
}

/// Reference enumeration by exhaustive valuation over `domain`, independent
/// of the solver. Returns every MCS as sorted ids, ordered by size then ids.
/// Empty when the soft constraints are jointly satisfiable or the hard ones
/// are not.
pub fn bruteforce_mcs(cs: &ConstraintSet, domain: Domain) -> Result<Vec<Vec<ConstraintId>>, BruteForceError> {
    const MAX_SOFT: usize = 12;
    const MAX_VALUATIONS: u128 = 1 << 22;
    if cs.soft.len() > MAX_SOFT {
        return Err(BruteForceError::TooManySoft(cs.soft.len()));
    }
    let vars = cs.vars();
    let width = (domain.hi as i128 - domain.lo as i128 + 1) as u128;
    let total = (0..vars.len()).try_fold(1u128, |acc, _| acc.checked_mul(width));
    let total = match total {
        Some(t) if t <= MAX_VALUATIONS => t,
        Some(t) => return Err(BruteForceError::TooManyValuations(t)),
        None => return Err(BruteForceError::TooManyValuations(u128::MAX)),
    };

    let holds = |c: &Constraint, m: &Model| eval_formula(&c.formula, m).expect("all variables bound");
    let mut masks: Vec<u32> = Vec::new();
    for n in 0..total {
        let mut rest = n;
        let m: Model = vars
            .iter()
            .map(|v| {
                let val = domain.lo as i128 + (rest % width) as i128;
                rest /= width;
                (v.clone(), val as i64)
            })
            .collect();
        if !cs.hard.iter().all(|c| holds(c, &m)) {
            continue;
        }
        let mut mask = 0u32;
        for (i, c) in cs.soft.iter().enumerate() {
            if !holds(c, &m) {
                mask |= 1 << i;
            }
        }
        if mask == 0 {
            return Ok(Vec::new());
        }
        masks.push(mask);
    }
    masks.sort_unstable();
    masks.dedup();
    let minimal: Vec<u32> = masks
        .iter()
        .copied()
        .filter(|m| !masks.iter().any(|o| o != m && o & m == *o))
        .collect();
    let mut out: Vec<Vec<ConstraintId>> = minimal
        .into_iter()
        .map(|m| {
            let mut ids: Vec<ConstraintId> = (0..cs.soft.len())
                .filter(|i| m & (1 << i) != 0)
                .map(|i| cs.soft[i].id)
                .collect();
            ids.sort();
            ids
        })
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SourceLoc;
    use crate::ir::{assign_to_constraint, ConstraintKind, Formula, LinTerm, RelOp, SsaName};

    fn v(n: &str, ver: u32) -> LinTerm {
        LinTerm::var(SsaName::new(n, ver))
    }

    fn hard(id: u32, f: Formula) -> Constraint {
        Constraint {
            id: ConstraintId(id),
            formula: f,
            kind: ConstraintKind::Input,
            loc: SourceLoc::new(1, 1),
            path_index: 0,
        }
    }

    /// Straight-line fragment of the running example on the failing input
    /// i=0, j=1 when the guard `k_1 = 1 && i != j` must hold.
    fn deviation_system() -> ConstraintSet {
        let mut cs = ConstraintSet::new();
        let c = LinTerm::constant;
        cs.push(hard(10, Formula::eq(v("i", 0), c(0))));
        cs.push(hard(11, Formula::eq(v("j", 0), c(1))));
        cs.push(hard(
            12,
            Formula::And(vec![
                Formula::eq(v("k", 1), c(1)),
                Formula::atom(RelOp::Ne, v("i", 0), v("j", 0)),
            ]),
        ));
        cs.push(assign_to_constraint(ConstraintId(0), &SsaName::new("k", 0), &c(0), SourceLoc::new(8, 4), false, 0));
        cs.push(assign_to_constraint(
            ConstraintId(1),
            &SsaName::new("k", 1),
            &v("k", 0).checked_add(&c(2)).unwrap(),
            SourceLoc::new(10, 6),
            false,
            1,
        ));
        cs
    }

    #[test]
    fn deviation_sets_latest_first() {
        let cs = deviation_system();
        let out = enumerate_mcs(&cs, Domain::default(), McsBounds { b_mcs: 5, k_max: 2 }).unwrap();
        assert_eq!(out.status, McsStatus::Conflict);
        let lines: Vec<Vec<u32>> = out.sets.iter().map(|s| s.iter().map(|c| c.loc.line).collect()).collect();
        assert_eq!(lines, [vec![10], vec![8]]);
        let one = enumerate_mcs(&cs, Domain::default(), McsBounds { b_mcs: 1, k_max: 2 }).unwrap();
        assert_eq!(one.sets.len(), 1);
        assert_eq!(one.sets[0][0].loc.line, 10);
    }

    #[test]
    fn agrees_with_bruteforce_on_small_domain() {
        let cs = deviation_system();
        let d = Domain { lo: -3, hi: 3 };
        let out = enumerate_mcs(&cs, d, McsBounds { b_mcs: usize::MAX, k_max: 2 }).unwrap();
        let mut got: Vec<Vec<ConstraintId>> = out.sets.iter().map(|s| s.iter().map(|c| c.id).collect()).collect();
        got.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        assert_eq!(got, bruteforce_mcs(&cs, d).unwrap());
    }

    #[test]
    fn flags() {
        let mut ok = ConstraintSet::new();
        ok.push(assign_to_constraint(ConstraintId(0), &SsaName::new("x", 0), &LinTerm::constant(1), SourceLoc::new(1, 1), false, 0));
        let out = enumerate_mcs(&ok, Domain::default(), McsBounds { b_mcs: 3, k_max: 2 }).unwrap();
        assert_eq!(out.status, McsStatus::AlreadySat);

        let mut bad = ok.clone();
        bad.push(hard(5, Formula::False));
        let out = enumerate_mcs(&bad, Domain::default(), McsBounds { b_mcs: 3, k_max: 2 }).unwrap();
        assert_eq!(out.status, McsStatus::HardUnsat);
        assert!(bruteforce_mcs(&bad, Domain { lo: 0, hi: 1 }).unwrap().is_empty());
    }

    #[test]
    fn bruteforce_guards() {
        let mut cs = ConstraintSet::new();
        for i in 0..13 {
            cs.push(assign_to_constraint(ConstraintId(i), &SsaName::new("x", i), &LinTerm::constant(0), SourceLoc::new(1, 1), false, 0));
        }
        assert_eq!(bruteforce_mcs(&cs, Domain { lo: 0, hi: 0 }), Err(BruteForceError::TooManySoft(13)));
    }
}
