//! Reference interpreter over the syntax tree. Independent of the CFG and
//! DSA machinery; used to validate counterexamples and as a semantic oracle.

use crate::frontend::{BoolExpr, BoolKind, CmpOp, Expr, ExprKind, Function, Stmt};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("missing value for parameter `{0}`")]
    MissingInput(String),
    #[error("variable `{0}` read before assignment")]
    Unassigned(String),
    #[error("arithmetic overflow")]
    Overflow,
}

pub type Env = BTreeMap<String, i64>;

/// Runs the function body and returns the value of the `return` expression.
pub fn run(f: &Function, inputs: &BTreeMap<String, i64>) -> Result<i64, InterpError> {
    let mut env = Env::new();
    for p in &f.params {
        let v = inputs
            .get(&p.name)
            .ok_or_else(|| InterpError::MissingInput(p.name.clone()))?;
        env.insert(p.name.clone(), *v);
    }
    match exec(&f.body, &mut env)? {
        Some(v) => Ok(v),
        None => unreachable!("parser guarantees a trailing return"),
    }
}

fn exec(stmts: &[Stmt], env: &mut Env) -> Result<Option<i64>, InterpError> {
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
                ..
            } => {
                let branch = if eval_bool(cond, env, None)? {
                    then_branch
                } else {
                    else_branch
                };
                if let Some(v) = exec(branch, env)? {
                    return Ok(Some(v));
                }
            }
        }
    }
    Ok(None)
}

pub fn eval(e: &Expr, env: &Env, result: Option<i64>) -> Result<i64, InterpError> {
    let v = match &e.kind {
        ExprKind::IntLit(v) => *v,
        ExprKind::Var(name) => *env.get(name).ok_or_else(|| InterpError::Unassigned(name.clone()))?,
        ExprKind::ResultRef => result.ok_or_else(|| InterpError::Unassigned("\\result".into()))?,
        ExprKind::Neg(a) => eval(a, env, result)?.checked_neg().ok_or(InterpError::Overflow)?,
        ExprKind::Add(a, b) => eval(a, env, result)?
            .checked_add(eval(b, env, result)?)
            .ok_or(InterpError::Overflow)?,
        ExprKind::Sub(a, b) => eval(a, env, result)?
            .checked_sub(eval(b, env, result)?)
            .ok_or(InterpError::Overflow)?,
        ExprKind::Mul(a, b) => eval(a, env, result)?
            .checked_mul(eval(b, env, result)?)
            .ok_or(InterpError::Overflow)?,
    };
    Ok(v)
}

pub fn eval_bool(b: &BoolExpr, env: &Env, result: Option<i64>) -> Result<bool, InterpError> {
    Ok(match &b.kind {
        BoolKind::Lit(v) => *v,
        BoolKind::Cmp(op, l, r) => {
            let (l, r) = (eval(l, env, result)?, eval(r, env, result)?);
            match op {
                CmpOp::Eq => l == r,
                CmpOp::Ne => l != r,
                CmpOp::Lt => l < r,
                CmpOp::Le => l <= r,
                CmpOp::Gt => l > r,
                CmpOp::Ge => l >= r,
            }
        }
        BoolKind::And(x, y) => eval_bool(x, env, result)? && eval_bool(y, env, result)?,
        BoolKind::Or(x, y) => eval_bool(x, env, result)? || eval_bool(y, env, result)?,
        BoolKind::Not(x) => !eval_bool(x, env, result)?,
        BoolKind::Implies(x, y) => !eval_bool(x, env, result)? || eval_bool(y, env, result)?,
    })
}

/// Evaluates the postcondition for the given inputs and returned value.
pub fn postcondition_holds(f: &Function, inputs: &BTreeMap<String, i64>, result: i64) -> Result<bool, InterpError> {
    eval_bool(&f.postcondition, inputs, Some(result))
}

pub fn precondition_holds(f: &Function, inputs: &BTreeMap<String, i64>) -> Result<bool, InterpError> {
    match &f.precondition {
        Some(pre) => eval_bool(pre, inputs, None),
        None => Ok(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn inputs(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn abs_minus_counterexample() {
        let f = parse_program(include_str!("../../../corpus/absminus.src")).unwrap();
        let ce = inputs(&[("i", 0), ("j", 1)]);
        let r = run(&f, &ce).unwrap();
        assert_eq!(r, -1);
        assert!(!postcondition_holds(&f, &ce, r).unwrap());
    }

    #[test]
    fn abs_minus_non_violating_input() {
        let f = parse_program(include_str!("../../../corpus/absminus.src")).unwrap();
        let ce = inputs(&[("i", 5), ("j", 3)]);
        let r = run(&f, &ce).unwrap();
        assert_eq!(r, 2);
        assert!(postcondition_holds(&f, &ce, r).unwrap());
    }

    #[test]
    fn missing_input() {
        let f = parse_program("/*@ ensures \\result == x; */ int f(int x){ return x; }").unwrap();
        assert_eq!(run(&f, &BTreeMap::new()), Err(InterpError::MissingInput("x".into())));
    }
}
