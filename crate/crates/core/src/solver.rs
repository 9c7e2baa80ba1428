//! Incremental finite-domain solver for linear integer constraints with
//! boolean structure.
//!
//! Every variable ranges over one bounded domain. Constraints are compiled to
//! negation normal form over normalized linear atoms `sum + c (<=|=|!=) 0`
//! and propagated with bounds consistency. Search decides soft-constraint
//! selectors first (enabled before disabled). Once they are fixed, active
//! equalities with a unit coefficient are substituted away and the search
//! splits the smallest remaining variable domain in half, lower half first.
//! Hard and soft assertions live in push/pop frames.

use crate::ir::{eval_formula, nnf, Formula, LinTerm, Model, RelOp, SsaName};
use std::collections::BTreeMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selector(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: i64,
    pub hi: i64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { lo: -32768, hi: 32767 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("empty domain [{lo}, {hi}]")]
    EmptyDomain { lo: i64, hi: i64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub checks: u64,
    pub propagations: u64,
    /// Hard and soft constraint assertions.
    pub assertions: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckResult {
    Sat { model: Model, disabled: Vec<Selector> },
    Unsat,
}

impl CheckResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, CheckResult::Sat { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LinOp {
    Le,
    Eq,
    Ne,
}

/// `sum(coef * var) + c op 0`.
#[derive(Clone, Debug)]
struct Lin {
    terms: Vec<(i128, usize)>,
    c: i128,
    op: LinOp,
}

#[derive(Clone, Debug)]
enum Prop {
    Lin(Lin),
    And(Vec<Prop>),
    Or(Vec<Prop>),
    True,
    False,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    True,
    False,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sel {
    Free,
    On,
    Off,
}

struct Conflict;

#[derive(Clone)]
struct State {
    lo: Vec<i64>,
    hi: Vec<i64>,
    sel: Vec<Sel>,
}

struct Soft {
    formula: Formula,
    prop: Prop,
}

#[derive(Clone, Copy)]
struct Frame {
    vars: usize,
    hard: usize,
    soft: usize,
    cards: usize,
    clauses: usize,
    fixed: usize,
}

pub struct Solver {
    domain: Domain,
    index: BTreeMap<SsaName, usize>,
    names: Vec<SsaName>,
    hard: Vec<(Formula, Prop)>,
    soft: Vec<Soft>,
    cards: Vec<(Vec<usize>, usize)>,
    clauses: Vec<Vec<usize>>,
    fixed: Vec<(usize, bool)>,
    frames: Vec<Frame>,
    stats: Stats,
}

pub fn new_solver(domain: Domain) -> Result<Solver, SolverError> {
    if domain.lo > domain.hi {
        return Err(SolverError::EmptyDomain {
            lo: domain.lo,
            hi: domain.hi,
        });
    }
    Ok(Solver {
        domain,
        index: BTreeMap::new(),
        names: Vec::new(),
        hard: Vec::new(),
        soft: Vec::new(),
        cards: Vec::new(),
        clauses: Vec::new(),
        fixed: Vec::new(),
        frames: Vec::new(),
        stats: Stats::default(),
    })
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `terms + c` with `x` replaced by `def`; `None` on overflow.
fn substitute_terms(terms: &[(i128, usize)], c: i128, x: usize, def: &Def) -> Option<(Vec<(i128, usize)>, i128)> {
    let Some(&(a, _)) = terms.iter().find(|t| t.1 == x) else {
        return Some((terms.to_vec(), c));
    };
    let mut map: BTreeMap<usize, i128> = terms.iter().filter(|t| t.1 != x).map(|&(k, v)| (v, k)).collect();
    for &(b, y) in &def.terms {
        let e = map.entry(y).or_insert(0);
        *e = e.checked_add(a.checked_mul(b)?)?;
    }
    let c = c.checked_add(a.checked_mul(def.c)?)?;
    Some((map.into_iter().filter(|(_, k)| *k != 0).map(|(v, k)| (k, v)).collect(), c))
}

/// An equality solved for one of its variables: `var = sum(terms) + c`.
#[derive(Clone, Debug)]
struct Def {
    var: usize,
    terms: Vec<(i128, usize)>,
    c: i128,
}

impl Def {
    fn value(&self, st: &State) -> i128 {
        self.terms.iter().map(|&(a, v)| a * st.lo[v] as i128).sum::<i128>() + self.c
    }
}

impl Lin {
    /// Builds `sum + c op 0`, divided through by the gcd of the coefficients.
    /// A constant row folds to `True` or `False`.
    fn normalized(mut terms: Vec<(i128, usize)>, mut c: i128, op: LinOp) -> Prop {
        terms.retain(|t| t.0 != 0);
        if terms.is_empty() {
            let holds = match op {
                LinOp::Le => c <= 0,
                LinOp::Eq => c == 0,
                LinOp::Ne => c != 0,
            };
            return if holds { Prop::True } else { Prop::False };
        }
        let g = terms.iter().fold(0, |g, t| gcd(g, t.0));
        if g > 1 {
            match op {
                LinOp::Le => c = ceil_div(c, g),
                LinOp::Eq if c % g != 0 => return Prop::False,
                LinOp::Ne if c % g != 0 => return Prop::True,
                _ => c /= g,
            }
            for t in &mut terms {
                t.0 /= g;
            }
        }
        Prop::Lin(Lin { terms, c, op })
    }

    /// Bounds of `sum + c`; `None` if they leave the 128-bit range.
    fn range(&self, st: &State) -> Option<(i128, i128)> {
        let (mut min, mut max) = (self.c, self.c);
        for &(a, v) in &self.terms {
            let (x, y) = (a.checked_mul(st.lo[v] as i128)?, a.checked_mul(st.hi[v] as i128)?);
            min = min.checked_add(x.min(y))?;
            max = max.checked_add(x.max(y))?;
        }
        Some((min, max))
    }

    fn status(&self, st: &State) -> Status {
        let Some((min, max)) = self.range(st) else {
            return Status::Unknown;
        };
        match self.op {
            LinOp::Le if max <= 0 => Status::True,
            LinOp::Le if min > 0 => Status::False,
            LinOp::Eq if min == 0 && max == 0 => Status::True,
            LinOp::Eq if min > 0 || max < 0 => Status::False,
            LinOp::Ne if min > 0 || max < 0 => Status::True,
            LinOp::Ne if min == 0 && max == 0 => Status::False,
            _ => Status::Unknown,
        }
    }

    /// Tightens bounds from `sign * (sum + c) <= 0`.
    fn propagate_le(&self, sign: i128, st: &mut State, changed: &mut bool) -> Result<(), Conflict> {
        let mut min = sign * self.c;
        let mut mins = Vec::with_capacity(self.terms.len());
        for &(a, v) in &self.terms {
            let a = sign * a;
            let m = match (a.checked_mul(st.lo[v] as i128), a.checked_mul(st.hi[v] as i128)) {
                (Some(x), Some(y)) => x.min(y),
                _ => return Ok(()),
            };
            mins.push(m);
            min = match min.checked_add(m) {
                Some(s) => s,
                None => return Ok(()),
            };
        }
        if min > 0 {
            return Err(Conflict);
        }
        for (&(a, v), m) in self.terms.iter().zip(mins) {
            let a = sign * a;
            // a * x <= -(min - m)
            let slack = m - min;
            if a > 0 {
                let bound = floor_div(slack, a);
                if bound < st.hi[v] as i128 {
                    if bound < st.lo[v] as i128 {
                        return Err(Conflict);
                    }
                    st.hi[v] = bound as i64;
                    *changed = true;
                }
            } else {
                let bound = ceil_div(slack, a);
                if bound > st.lo[v] as i128 {
                    if bound > st.hi[v] as i128 {
                        return Err(Conflict);
                    }
                    st.lo[v] = bound as i64;
                    *changed = true;
                }
            }
        }
        Ok(())
    }

    fn propagate_ne(&self, st: &mut State, changed: &mut bool) -> Result<(), Conflict> {
        let mut open = None;
        let mut rest = self.c;
        for &(a, v) in &self.terms {
            if st.lo[v] == st.hi[v] {
                rest = match a.checked_mul(st.lo[v] as i128).and_then(|p| rest.checked_add(p)) {
                    Some(r) => r,
                    None => return Ok(()),
                };
            } else if open.is_some() {
                return Ok(());
            } else {
                open = Some((a, v));
            }
        }
        match open {
            None if rest == 0 => Err(Conflict),
            None => Ok(()),
            Some((a, v)) => {
                if rest % a != 0 {
                    return Ok(());
                }
                let bad = -rest / a;
                if bad == st.lo[v] as i128 {
                    st.lo[v] += 1;
                    *changed = true;
                } else if bad == st.hi[v] as i128 {
                    st.hi[v] -= 1;
                    *changed = true;
                }
                if st.lo[v] > st.hi[v] {
                    Err(Conflict)
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl Prop {
    fn substitute(&self, x: usize, def: &Def) -> Option<Prop> {
        Some(match self {
            Prop::Lin(l) => {
                let (terms, c) = substitute_terms(&l.terms, l.c, x, def)?;
                Lin::normalized(terms, c, l.op)
            }
            Prop::And(xs) => Prop::And(xs.iter().map(|p| p.substitute(x, def)).collect::<Option<_>>()?),
            Prop::Or(xs) => Prop::Or(xs.iter().map(|p| p.substitute(x, def)).collect::<Option<_>>()?),
            Prop::True => Prop::True,
            Prop::False => Prop::False,
        })
    }

    fn flatten_into(self, out: &mut Vec<Prop>) {
        match self {
            Prop::And(xs) => xs.into_iter().for_each(|p| p.flatten_into(out)),
            Prop::True => {}
            p => out.push(p),
        }
    }

    fn status(&self, st: &State) -> Status {
        match self {
            Prop::True => Status::True,
            Prop::False => Status::False,
            Prop::Lin(l) => l.status(st),
            Prop::And(xs) => {
                let mut all = true;
                for x in xs {
                    match x.status(st) {
                        Status::False => return Status::False,
                        Status::Unknown => all = false,
                        Status::True => {}
                    }
                }
                if all {
                    Status::True
                } else {
                    Status::Unknown
                }
            }
            Prop::Or(xs) => {
                let mut none = true;
                for x in xs {
                    match x.status(st) {
                        Status::True => return Status::True,
                        Status::Unknown => none = false,
                        Status::False => {}
                    }
                }
                if none {
                    Status::False
                } else {
                    Status::Unknown
                }
            }
        }
    }

    fn propagate(&self, st: &mut State, changed: &mut bool, stats: &mut Stats) -> Result<(), Conflict> {
        stats.propagations += 1;
        match self {
            Prop::True => Ok(()),
            Prop::False => Err(Conflict),
            Prop::Lin(l) => match l.op {
                LinOp::Le => l.propagate_le(1, st, changed),
                LinOp::Eq => {
                    l.propagate_le(1, st, changed)?;
                    l.propagate_le(-1, st, changed)
                }
                LinOp::Ne => l.propagate_ne(st, changed),
            },
            Prop::And(xs) => {
                for x in xs {
                    x.propagate(st, changed, stats)?;
                }
                Ok(())
            }
            Prop::Or(xs) => {
                let mut viable = None;
                for x in xs {
                    match x.status(st) {
                        Status::True => return Ok(()),
                        Status::False => {}
                        Status::Unknown if viable.is_some() => return Ok(()),
                        Status::Unknown => viable = Some(x),
                    }
                }
                match viable {
                    None => Err(Conflict),
                    Some(x) => x.propagate(st, changed, stats),
                }
            }
        }
    }
}

impl Solver {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = Stats::default();
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Number of soft constraints currently asserted.
    pub fn soft_count(&self) -> usize {
        self.soft.len()
    }

    pub fn soft_formula(&self, s: Selector) -> &Formula {
        &self.soft[s.0].formula
    }

    pub fn push(&mut self) {
        self.frames.push(Frame {
            vars: self.names.len(),
            hard: self.hard.len(),
            soft: self.soft.len(),
            cards: self.cards.len(),
            clauses: self.clauses.len(),
            fixed: self.fixed.len(),
        });
    }

    /// Discards everything asserted since the matching `push`.
    ///
    /// # Panics
    /// If there is no open frame.
    pub fn pop(&mut self) {
        let f = self.frames.pop().expect("pop without matching push");
        for name in self.names.drain(f.vars..) {
            self.index.remove(&name);
        }
        self.hard.truncate(f.hard);
        self.soft.truncate(f.soft);
        self.cards.truncate(f.cards);
        self.clauses.truncate(f.clauses);
        self.fixed.truncate(f.fixed);
    }

    fn var(&mut self, name: &SsaName) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.clone());
        self.index.insert(name.clone(), i);
        i
    }

    fn lin(&mut self, op: RelOp, lhs: &LinTerm, rhs: &LinTerm) -> Prop {
        let mut coeffs: BTreeMap<usize, i128> = BTreeMap::new();
        for (n, c) in lhs.coeffs() {
            *coeffs.entry(self.var(n)).or_insert(0) += *c as i128;
        }
        for (n, c) in rhs.coeffs() {
            *coeffs.entry(self.var(n)).or_insert(0) -= *c as i128;
        }
        let mut terms: Vec<(i128, usize)> = coeffs.into_iter().filter(|(_, c)| *c != 0).map(|(v, c)| (c, v)).collect();
        let mut c = lhs.constant_part() as i128 - rhs.constant_part() as i128;
        let op = match op {
            RelOp::Le => LinOp::Le,
            RelOp::Eq => LinOp::Eq,
            RelOp::Ne => LinOp::Ne,
            RelOp::Lt => {
                c += 1;
                LinOp::Le
            }
            RelOp::Ge | RelOp::Gt => {
                for t in &mut terms {
                    t.0 = -t.0;
                }
                c = -c;
                if op == RelOp::Gt {
                    c += 1;
                }
                LinOp::Le
            }
        };
        Lin::normalized(terms, c, op)
    }

    fn compile(&mut self, f: &Formula) -> Prop {
        match f {
            Formula::Atom { op, lhs, rhs } => self.lin(*op, lhs, rhs),
            Formula::And(xs) => Prop::And(xs.iter().map(|x| self.compile(x)).collect()),
            Formula::Or(xs) => Prop::Or(xs.iter().map(|x| self.compile(x)).collect()),
            Formula::True => Prop::True,
            Formula::False => Prop::False,
            Formula::Not(_) => unreachable!("input is in negation normal form"),
        }
    }

    pub fn assert_hard(&mut self, f: &Formula) {
        self.stats.assertions += 1;
        let f = nnf(f);
        let p = self.compile(&f);
        self.hard.push((f, p));
    }

    /// Adds a constraint that may be disabled; the returned selector is
    /// valid until the enclosing frame is popped.
    pub fn assert_soft(&mut self, f: &Formula) -> Selector {
        self.stats.assertions += 1;
        let f = nnf(f);
        let prop = self.compile(&f);
        self.soft.push(Soft { formula: f, prop });
        Selector(self.soft.len() - 1)
    }

    /// At most `k` of `sels` may be disabled.
    pub fn assert_at_most_disabled(&mut self, sels: &[Selector], k: usize) {
        self.cards.push((sels.iter().map(|s| s.0).collect(), k));
    }

    /// At least one of `sels` must stay enabled.
    pub fn assert_some_enabled(&mut self, sels: &[Selector]) {
        self.clauses.push(sels.iter().map(|s| s.0).collect());
    }

    pub fn fix_selector(&mut self, s: Selector, enabled: bool) {
        self.fixed.push((s.0, enabled));
    }

    pub fn check(&mut self) -> CheckResult {
        self.stats.checks += 1;
        let n = self.names.len();
        let mut st = State {
            lo: vec![self.domain.lo; n],
            hi: vec![self.domain.hi; n],
            sel: vec![Sel::Free; self.soft.len()],
        };
        for &(s, on) in &self.fixed {
            let want = if on { Sel::On } else { Sel::Off };
            if st.sel[s] != Sel::Free && st.sel[s] != want {
                return CheckResult::Unsat;
            }
            st.sel[s] = want;
        }
        match self.search(st) {
            None => CheckResult::Unsat,
            Some(leaf) => self.finish(leaf),
        }
    }

    fn finish(&self, leaf: State) -> CheckResult {
        let model: Model = self.names.iter().cloned().zip(leaf.lo.iter().copied()).collect();
        let holds = |f: &Formula| eval_formula(f, &model).expect("every variable is bound");
        for (f, _) in &self.hard {
            assert!(holds(f), "solver produced a model violating {f}");
        }
        let mut disabled = Vec::new();
        for (i, s) in self.soft.iter().enumerate() {
            if leaf.sel[i] == Sel::On {
                assert!(holds(&s.formula), "solver produced a model violating {}", s.formula);
            } else if !holds(&s.formula) {
                disabled.push(Selector(i));
            }
        }
        CheckResult::Sat { model, disabled }
    }

    fn propagate(&mut self, st: &mut State) -> Result<(), Conflict> {
        loop {
            let mut changed = false;
            for (_, p) in &self.hard {
                p.propagate(st, &mut changed, &mut self.stats)?;
            }
            for (i, s) in self.soft.iter().enumerate() {
                match st.sel[i] {
                    Sel::On => s.prop.propagate(st, &mut changed, &mut self.stats)?,
                    Sel::Off => {}
                    Sel::Free => {
                        if s.prop.status(st) == Status::False {
                            st.sel[i] = Sel::Off;
                            changed = true;
                        }
                    }
                }
            }
            for (sels, k) in &self.cards {
                let off = sels.iter().filter(|s| st.sel[**s] == Sel::Off).count();
                if off > *k {
                    return Err(Conflict);
                }
                if off == *k {
                    for s in sels {
                        if st.sel[*s] == Sel::Free {
                            st.sel[*s] = Sel::On;
                            changed = true;
                        }
                    }
                }
            }
            for clause in &self.clauses {
                if clause.iter().any(|s| st.sel[*s] == Sel::On) {
                    continue;
                }
                let mut free = clause.iter().filter(|s| st.sel[**s] == Sel::Free);
                match (free.next(), free.next()) {
                    (None, _) => return Err(Conflict),
                    (Some(s), None) => {
                        st.sel[*s] = Sel::On;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn search(&mut self, mut st: State) -> Option<State> {
        self.propagate(&mut st).ok()?;
        if let Some(s) = st.sel.iter().position(|s| *s == Sel::Free) {
            for choice in [Sel::On, Sel::Off] {
                let mut child = st.clone();
                child.sel[s] = choice;
                if let Some(leaf) = self.search(child) {
                    return Some(leaf);
                }
            }
            return None;
        }
        let mut active = Vec::new();
        for (_, p) in &self.hard {
            p.clone().flatten_into(&mut active);
        }
        for (i, s) in self.soft.iter().enumerate() {
            if st.sel[i] == Sel::On {
                s.prop.clone().flatten_into(&mut active);
            }
        }
        let (props, defs) = eliminate(active.clone(), &st).unwrap_or((active, Vec::new()));
        let mut skip = vec![false; st.lo.len()];
        for d in &defs {
            skip[d.var] = true;
        }
        let mut leaf = self.search_vars(&props, &skip, st)?;
        for d in &defs {
            let v = d.value(&leaf) as i64;
            leaf.lo[d.var] = v;
            leaf.hi[d.var] = v;
        }
        Some(leaf)
    }

    /// Bisection over the variables not in `skip`, with every selector
    /// already decided and `props` the active constraints.
    fn search_vars(&mut self, props: &[Prop], skip: &[bool], mut st: State) -> Option<State> {
        loop {
            let mut changed = false;
            for p in props {
                p.propagate(&mut st, &mut changed, &mut self.stats).ok()?;
            }
            if !changed {
                break;
            }
        }
        let var = (0..st.lo.len())
            .filter(|v| !skip[*v] && st.lo[*v] < st.hi[*v])
            .min_by_key(|v| st.hi[*v] as i128 - st.lo[*v] as i128);
        let Some(v) = var else { return Some(st) };
        let mid = floor_div(st.lo[v] as i128 + st.hi[v] as i128, 2) as i64;
        let mut low = st.clone();
        low.hi[v] = mid;
        if let Some(leaf) = self.search_vars(props, skip, low) {
            return Some(leaf);
        }
        st.lo[v] = mid + 1;
        self.search_vars(props, skip, st)
    }
}

/// Solves top-level equalities that have a unit coefficient and substitutes
/// them away, so that rows implied by the equalities fold to constants.
/// Each eliminated variable keeps its current bounds as two inequalities.
/// `None` if a coefficient overflows.
fn eliminate(mut work: Vec<Prop>, st: &State) -> Option<(Vec<Prop>, Vec<Def>)> {
    let mut defs: Vec<Def> = Vec::new();
    loop {
        let pick = work.iter().enumerate().find_map(|(i, p)| match p {
            Prop::Lin(l) if l.op == LinOp::Eq => l.terms.iter().find(|t| t.0.abs() == 1).map(|t| (i, t.1)),
            _ => None,
        });
        let Some((i, x)) = pick else { break };
        let Prop::Lin(row) = work.remove(i) else { unreachable!() };
        let a = row.terms.iter().find(|t| t.1 == x).map(|t| t.0).unwrap_or(1);
        // a*x + rest + c = 0 with a = +-1, so x = -a*(rest + c).
        let def = Def {
            var: x,
            terms: row.terms.iter().filter(|t| t.1 != x).map(|&(k, v)| (-a * k, v)).collect(),
            c: -a * row.c,
        };
        let mut next = Vec::with_capacity(work.len());
        for p in &work {
            p.substitute(x, &def)?.flatten_into(&mut next);
        }
        if next.iter().any(|p| matches!(p, Prop::False)) {
            return Some((vec![Prop::False], Vec::new()));
        }
        work = next;
        for d in &mut defs {
            let (terms, c) = substitute_terms(&d.terms, d.c, x, &def)?;
            d.terms = terms;
            d.c = c;
        }
        defs.push(def);
    }
    for d in &defs {
        let (lo, hi) = (st.lo[d.var] as i128, st.hi[d.var] as i128);
        let neg: Vec<(i128, usize)> = d.terms.iter().map(|&(k, v)| (-k, v)).collect();
        Lin::normalized(d.terms.clone(), d.c.checked_sub(hi)?, LinOp::Le).flatten_into(&mut work);
        Lin::normalized(neg, lo.checked_sub(d.c)?, LinOp::Le).flatten_into(&mut work);
    }
    Some((work, defs))
}
