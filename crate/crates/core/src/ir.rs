//! Constraint vocabulary shared by the solver, the MCS engine and the
//! explorer: linear integer terms over versioned variables, boolean
//! formulas, and provenance-tagged constraints.

use crate::frontend::{BoolExpr, BoolKind, CmpOp, Expr, ExprKind, SourceLoc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::{self, Display, Formatter};
use thiserror::Error;

/// Base name reserved for the function's return value.
pub const RESULT_BASE: &str = "\\result";

/// A variable version in dynamic single assignment form, rendered `base_version`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SsaName {
    pub base: String,
    pub version: u32,
}

impl SsaName {
    pub fn new(base: impl Into<String>, version: u32) -> Self {
        SsaName {
            base: base.into(),
            version,
        }
    }
}

impl Display for SsaName {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.base, self.version)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LinError {
    #[error("{0}: non-linear term")]
    NonLinear(SourceLoc),
    #[error("{0}: integer overflow in constant arithmetic")]
    Overflow(SourceLoc),
    #[error("{0}: `\\result` is not available here")]
    NoResult(SourceLoc),
}

/// `sum(coefficient * variable) + constant`, kept canonical: variables are
/// sorted and zero coefficients are never stored, so algebraically equal
/// terms compare equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinTerm {
    coeffs: BTreeMap<SsaName, i64>,
    constant: i64,
}

impl LinTerm {
    pub fn constant(c: i64) -> Self {
        LinTerm {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: SsaName) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name, 1);
        LinTerm { coeffs, constant: 0 }
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn coeffs(&self) -> &BTreeMap<SsaName, i64> {
        &self.coeffs
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = &SsaName> {
        self.coeffs.keys()
    }

    pub fn checked_add(&self, other: &LinTerm) -> Option<LinTerm> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(other.constant)?;
        for (name, c) in &other.coeffs {
            let slot = out.coeffs.entry(name.clone()).or_insert(0);
            *slot = slot.checked_add(*c)?;
            if *slot == 0 {
                out.coeffs.remove(name);
            }
        }
        Some(out)
    }

    pub fn checked_scale(&self, k: i64) -> Option<LinTerm> {
        if k == 0 {
            return Some(LinTerm::constant(0));
        }
        let mut coeffs = BTreeMap::new();
        for (name, c) in &self.coeffs {
            coeffs.insert(name.clone(), c.checked_mul(k)?);
        }
        Some(LinTerm {
            coeffs,
            constant: self.constant.checked_mul(k)?,
        })
    }

    pub fn checked_sub(&self, other: &LinTerm) -> Option<LinTerm> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    /// Renames every variable; coefficients of names that collide are summed.
    pub fn rename(&self, mut f: impl FnMut(&SsaName) -> SsaName) -> LinTerm {
        let mut out = LinTerm::constant(self.constant);
        for (name, c) in &self.coeffs {
            let slot = out.coeffs.entry(f(name)).or_insert(0);
            *slot = slot.saturating_add(*c);
        }
        out.coeffs.retain(|_, c| *c != 0);
        out
    }

    /// Evaluates in 128-bit arithmetic; inputs are 64-bit so this cannot overflow
    /// for the term sizes produced from source programs.
    pub fn eval(&self, m: &Model) -> Result<i128, EvalError> {
        let mut acc = self.constant as i128;
        for (name, c) in &self.coeffs {
            let v = m.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?;
            acc = acc.saturating_add((*c as i128).saturating_mul(v as i128));
        }
        Ok(acc)
    }

    /// Converts a source expression. `resolve` maps program variables to
    /// versioned names; `result` is the name bound to `\result`, if any.
    pub fn from_expr(
        e: &Expr,
        resolve: &mut impl FnMut(&str) -> SsaName,
        result: Option<&SsaName>,
    ) -> Result<LinTerm, LinError> {
        let overflow = || LinError::Overflow(e.loc);
        Ok(match &e.kind {
            ExprKind::IntLit(v) => LinTerm::constant(*v),
            ExprKind::Var(name) => LinTerm::var(resolve(name)),
            ExprKind::ResultRef => LinTerm::var(result.cloned().ok_or(LinError::NoResult(e.loc))?),
            ExprKind::Neg(a) => LinTerm::from_expr(a, resolve, result)?
                .checked_scale(-1)
                .ok_or_else(overflow)?,
            ExprKind::Add(a, b) => {
                let a = LinTerm::from_expr(a, resolve, result)?;
                let b = LinTerm::from_expr(b, resolve, result)?;
                a.checked_add(&b).ok_or_else(overflow)?
            }
            ExprKind::Sub(a, b) => {
                let a = LinTerm::from_expr(a, resolve, result)?;
                let b = LinTerm::from_expr(b, resolve, result)?;
                a.checked_sub(&b).ok_or_else(overflow)?
            }
            ExprKind::Mul(a, b) => {
                let a = LinTerm::from_expr(a, resolve, result)?;
                let b = LinTerm::from_expr(b, resolve, result)?;
                if a.is_constant() {
                    b.checked_scale(a.constant).ok_or_else(overflow)?
                } else if b.is_constant() {
                    a.checked_scale(b.constant).ok_or_else(overflow)?
                } else {
                    return Err(LinError::NonLinear(e.loc));
                }
            }
        })
    }
}

impl Display for LinTerm {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let positive = self.coeffs.iter().filter(|(_, c)| **c > 0);
        let negative = self.coeffs.iter().filter(|(_, c)| **c < 0);
        let mut first = true;
        for (name, c) in positive.chain(negative) {
            let c = *c as i128;
            let mag = c.abs();
            let sign = match (first, c < 0) {
                (true, false) => "",
                (true, true) => "-",
                (false, false) => " + ",
                (false, true) => " - ",
            };
            if mag == 1 {
                write!(f, "{sign}{name}")?;
            } else {
                write!(f, "{sign}{mag}*{name}")?;
            }
            first = false;
        }
        let k = self.constant as i128;
        if first {
            write!(f, "{k}")
        } else if k > 0 {
            write!(f, " + {k}")
        } else if k < 0 {
            write!(f, " - {}", k.abs())
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub fn negated(self) -> RelOp {
        match self {
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
            RelOp::Lt => RelOp::Ge,
            RelOp::Ge => RelOp::Lt,
            RelOp::Le => RelOp::Gt,
            RelOp::Gt => RelOp::Le,
        }
    }

    pub fn holds(self, a: i128, b: i128) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Ne => "!=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }
}

impl From<CmpOp> for RelOp {
    fn from(op: CmpOp) -> Self {
        match op {
            CmpOp::Eq => RelOp::Eq,
            CmpOp::Ne => RelOp::Ne,
            CmpOp::Lt => RelOp::Lt,
            CmpOp::Le => RelOp::Le,
            CmpOp::Gt => RelOp::Gt,
            CmpOp::Ge => RelOp::Ge,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom { op: RelOp, lhs: LinTerm, rhs: LinTerm },
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    True,
    False,
}

impl Formula {
    pub fn atom(op: RelOp, lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::Atom { op, lhs, rhs }
    }

    pub fn eq(lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::atom(RelOp::Eq, lhs, rhs)
    }

    /// Converts a source condition. Implications become `Or(Not a, b)`.
    pub fn from_bool(
        b: &BoolExpr,
        resolve: &mut impl FnMut(&str) -> SsaName,
        result: Option<&SsaName>,
    ) -> Result<Formula, LinError> {
        Ok(match &b.kind {
            BoolKind::Lit(true) => Formula::True,
            BoolKind::Lit(false) => Formula::False,
            BoolKind::Cmp(op, l, r) => Formula::atom(
                (*op).into(),
                LinTerm::from_expr(l, resolve, result)?,
                LinTerm::from_expr(r, resolve, result)?,
            ),
            BoolKind::And(x, y) => and_flat(
                Formula::from_bool(x, resolve, result)?,
                Formula::from_bool(y, resolve, result)?,
            ),
            BoolKind::Or(x, y) => or_flat(
                Formula::from_bool(x, resolve, result)?,
                Formula::from_bool(y, resolve, result)?,
            ),
            BoolKind::Not(x) => Formula::Not(Box::new(Formula::from_bool(x, resolve, result)?)),
            BoolKind::Implies(x, y) => or_flat(
                Formula::Not(Box::new(Formula::from_bool(x, resolve, result)?)),
                Formula::from_bool(y, resolve, result)?,
            ),
        })
    }

    /// Applies `f` to every variable occurrence.
    pub fn rename(&self, f: &mut impl FnMut(&SsaName) -> SsaName) -> Formula {
        match self {
            Formula::Atom { op, lhs, rhs } => Formula::Atom {
                op: *op,
                lhs: lhs.rename(&mut *f),
                rhs: rhs.rename(&mut *f),
            },
            Formula::And(xs) => Formula::And(xs.iter().map(|x| x.rename(f)).collect()),
            Formula::Or(xs) => Formula::Or(xs.iter().map(|x| x.rename(f)).collect()),
            Formula::Not(x) => Formula::Not(Box::new(x.rename(f))),
            Formula::True => Formula::True,
            Formula::False => Formula::False,
        }
    }

    pub fn vars(&self) -> Vec<SsaName> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<SsaName>) {
        match self {
            Formula::Atom { lhs, rhs, .. } => {
                out.extend(lhs.vars().cloned());
                out.extend(rhs.vars().cloned());
            }
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Formula::Not(x) => x.collect_vars(out),
            Formula::True | Formula::False => {}
        }
    }

    fn is_compound(&self) -> bool {
        matches!(self, Formula::And(_) | Formula::Or(_))
    }
}

fn and_flat(a: Formula, b: Formula) -> Formula {
    let mut parts = Vec::new();
    for f in [a, b] {
        match f {
            Formula::And(xs) => parts.extend(xs),
            other => parts.push(other),
        }
    }
    Formula::And(parts)
}

fn or_flat(a: Formula, b: Formula) -> Formula {
    let mut parts = Vec::new();
    for f in [a, b] {
        match f {
            Formula::Or(xs) => parts.extend(xs),
            other => parts.push(other),
        }
    }
    Formula::Or(parts)
}

/// Logical negation in negation normal form: `Not` never survives, atoms
/// flip their relation, and And/Or swap (De Morgan).
pub fn negate(f: &Formula) -> Formula {
    match f {
        Formula::Atom { op, lhs, rhs } => Formula::Atom {
            op: op.negated(),
            lhs: lhs.clone(),
            rhs: rhs.clone(),
        },
        Formula::And(xs) => Formula::Or(xs.iter().map(negate).collect()),
        Formula::Or(xs) => Formula::And(xs.iter().map(negate).collect()),
        Formula::Not(x) => nnf(x),
        Formula::True => Formula::False,
        Formula::False => Formula::True,
    }
}

/// Pushes every `Not` down to the atoms.
pub fn nnf(f: &Formula) -> Formula {
    match f {
        Formula::Not(x) => negate(x),
        Formula::And(xs) => Formula::And(xs.iter().map(nnf).collect()),
        Formula::Or(xs) => Formula::Or(xs.iter().map(nnf).collect()),
        other => other.clone(),
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        fn join(f: &mut Formatter<'_>, xs: &[Formula], sep: &str, empty: &str) -> fmt::Result {
            if xs.is_empty() {
                return f.write_str(empty);
            }
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                if x.is_compound() {
                    write!(f, "({x})")?;
                } else {
                    write!(f, "{x}")?;
                }
            }
            Ok(())
        }
        match self {
            Formula::Atom { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Formula::And(xs) => join(f, xs, " && ", "true"),
            Formula::Or(xs) => join(f, xs, " || ", "false"),
            Formula::Not(x) => write!(f, "!({x})"),
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
        }
    }
}

/// Total or partial valuation of versioned variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model(BTreeMap<SsaName, i64>);

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn get(&self, name: &SsaName) -> Option<i64> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: SsaName, value: i64) {
        self.0.insert(name, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SsaName, i64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(SsaName, i64)> for Model {
    fn from_iter<T: IntoIterator<Item = (SsaName, i64)>>(iter: T) -> Self {
        Model(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable {0} has no value")]
    Unbound(SsaName),
}

pub fn eval_formula(f: &Formula, m: &Model) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::Atom { op, lhs, rhs } => op.holds(lhs.eval(m)?, rhs.eval(m)?),
        Formula::And(xs) => {
            for x in xs {
                if !eval_formula(x, m)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(xs) => {
            for x in xs {
                if eval_formula(x, m)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Not(x) => !eval_formula(x, m)?,
        Formula::True => true,
        Formula::False => false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConstraintId(pub u32);

impl Display for ConstraintId {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Input,
    Assignment,
    SyntheticCopy,
    Guard,
    Postcondition,
}

impl ConstraintKind {
    /// Default hardness: assignments are the only removal candidates.
    pub fn is_soft(self) -> bool {
        matches!(self, ConstraintKind::Assignment | ConstraintKind::SyntheticCopy)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: ConstraintId,
    pub formula: Formula,
    pub kind: ConstraintKind,
    pub loc: SourceLoc,
    pub path_index: usize,
}

impl Display for Constraint {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ line {}", self.formula, self.loc.line)
    }
}

/// Builds `target = rhs` as an assignment (or synthetic copy) constraint.
pub fn assign_to_constraint(
    id: ConstraintId,
    target: &SsaName,
    rhs: &LinTerm,
    loc: SourceLoc,
    synthetic: bool,
    path_index: usize,
) -> Constraint {
    Constraint {
        id,
        formula: Formula::eq(LinTerm::var(target.clone()), rhs.clone()),
        kind: if synthetic {
            ConstraintKind::SyntheticCopy
        } else {
            ConstraintKind::Assignment
        },
        loc,
        path_index,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub hard: Vec<Constraint>,
    pub soft: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        ConstraintSet::default()
    }

    /// Files the constraint by its kind's default hardness.
    pub fn push(&mut self, c: Constraint) {
        if c.kind.is_soft() {
            self.soft.push(c);
        } else {
            self.hard.push(c);
        }
    }

    pub fn soft_by_id(&self, id: ConstraintId) -> Option<&Constraint> {
        self.soft.iter().find(|c| c.id == id)
    }

    /// All variables mentioned, sorted.
    pub fn vars(&self) -> Vec<SsaName> {
        let mut out: Vec<SsaName> = self
            .hard
            .iter()
            .chain(&self.soft)
            .flat_map(|c| c.formula.vars())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(base: &str, version: u32) -> LinTerm {
        LinTerm::var(SsaName::new(base, version))
    }

    fn c(k: i64) -> LinTerm {
        LinTerm::constant(k)
    }

    fn loc(line: u32) -> SourceLoc {
        SourceLoc::new(line, 1)
    }

    #[test]
    fn assignment_rendering() {
        let k1 = SsaName::new("k", 1);
        let rhs = v("k", 0).checked_add(&c(2)).unwrap();
        let con = assign_to_constraint(ConstraintId(1), &k1, &rhs, loc(10), false, 1);
        assert_eq!(con.to_string(), "k_1 = k_0 + 2 @ line 10");
        assert_eq!(con.kind, ConstraintKind::Assignment);

        let r1 = SsaName::new("r", 1);
        let rhs = v("j", 0).checked_sub(&v("i", 0)).unwrap();
        let con = assign_to_constraint(ConstraintId(2), &r1, &rhs, loc(12), false, 2);
        assert_eq!(con.to_string(), "r_1 = j_0 - i_0 @ line 12");
    }

    #[test]
    fn synthetic_copy_is_identity() {
        let x1 = SsaName::new("x", 1);
        let con = assign_to_constraint(ConstraintId(0), &x1, &v("x", 0), loc(3), true, 0);
        assert_eq!(con.kind, ConstraintKind::SyntheticCopy);
        assert_eq!(con.formula.to_string(), "x_1 = x_0");
    }

    #[test]
    fn lin_term_rendering() {
        assert_eq!(c(0).to_string(), "0");
        assert_eq!(c(-3).to_string(), "-3");
        assert_eq!(v("x", 0).checked_scale(-1).unwrap().to_string(), "-x_0");
        let t = v("a", 0).checked_scale(-2).unwrap().checked_sub(&c(4)).unwrap();
        assert_eq!(t.to_string(), "-2*a_0 - 4");
    }

    #[test]
    fn negate_guard_conjunction() {
        let guard = Formula::And(vec![
            Formula::eq(v("k", 1), c(1)),
            Formula::atom(RelOp::Ne, v("i", 0), v("j", 0)),
        ]);
        assert_eq!(guard.to_string(), "k_1 = 1 && i_0 != j_0");
        assert_eq!(negate(&guard).to_string(), "k_1 != 1 || i_0 = j_0");
    }

    #[test]
    fn negate_constants_and_double_negation() {
        assert_eq!(negate(&Formula::True), Formula::False);
        let f = Formula::atom(RelOp::Lt, v("x", 0), c(3));
        assert_eq!(negate(&Formula::Not(Box::new(f.clone()))), f);
        assert_eq!(negate(&negate(&f)), f);
    }

    #[test]
    fn eval_examples() {
        let m: Model = [(SsaName::new("i", 0), 0), (SsaName::new("j", 0), 1), (SsaName::new("k", 1), 2)]
            .into_iter()
            .collect();
        assert!(eval_formula(&Formula::atom(RelOp::Le, v("i", 0), v("j", 0)), &m).unwrap());
        let guard = Formula::And(vec![
            Formula::eq(v("k", 1), c(1)),
            Formula::atom(RelOp::Ne, v("i", 0), v("j", 0)),
        ]);
        assert!(!eval_formula(&guard, &m).unwrap());
        assert!(eval_formula(&Formula::eq(v("i", 0), v("i", 0)), &m).unwrap());
        assert_eq!(
            eval_formula(&Formula::eq(v("z", 0), c(0)), &m),
            Err(EvalError::Unbound(SsaName::new("z", 0)))
        );
    }

    #[test]
    fn canonical_terms_compare_equal() {
        let a = v("x", 0).checked_add(&v("y", 0)).unwrap().checked_sub(&v("x", 0)).unwrap();
        assert_eq!(a, v("y", 0));
        let b = v("y", 0).checked_add(&v("x", 0)).unwrap();
        let b2 = v("x", 0).checked_add(&v("y", 0)).unwrap();
        assert_eq!(b, b2);
    }

    #[test]
    fn constraint_set_files_by_kind() {
        let mut cs = ConstraintSet::new();
        cs.push(Constraint {
            id: ConstraintId(0),
            formula: Formula::eq(v("i", 0), c(0)),
            kind: ConstraintKind::Input,
            loc: loc(6),
            path_index: 0,
        });
        cs.push(assign_to_constraint(ConstraintId(1), &SsaName::new("k", 0), &c(0), loc(8), false, 0));
        assert_eq!(cs.hard.len(), 1);
        assert_eq!(cs.soft.len(), 1);
    }
}
