use super::ast::*;
use crate::ir::{Formula, LinError, LinTerm, SsaName, RESULT_BASE};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Undeclared,
    UseBeforeAssignment,
    Redeclared,
    NonLinear,
    ConstantOverflow,
    AnnotationScope,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub loc: SourceLoc,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.message)
    }
}

struct Checker {
    diags: Vec<Diagnostic>,
    /// Every name declared so far anywhere in the function (no shadowing).
    seen: BTreeSet<String>,
    scopes: Vec<Vec<String>>,
    assigned: BTreeSet<String>,
}

/// Checks scoping, definite assignment, linearity and annotation scope.
/// Returns an empty list iff the function can be lowered.
pub fn typecheck(f: &Function) -> Vec<Diagnostic> {
    let mut ck = Checker {
        diags: Vec::new(),
        seen: BTreeSet::new(),
        scopes: vec![Vec::new()],
        assigned: BTreeSet::new(),
    };
    for p in &f.params {
        if !ck.seen.insert(p.name.clone()) {
            ck.push(DiagnosticKind::Redeclared, p.loc, format!("parameter `{}` declared twice", p.name));
        }
        ck.scopes[0].push(p.name.clone());
        ck.assigned.insert(p.name.clone());
    }
    let params: BTreeSet<&str> = f.param_names().collect();
    if let Some(pre) = &f.precondition {
        ck.annotation(pre, &params, "precondition");
    }
    ck.annotation(&f.postcondition, &params, "postcondition");
    ck.block(&f.body);
    ck.diags
}

impl Checker {
    fn push(&mut self, kind: DiagnosticKind, loc: SourceLoc, message: String) {
        self.diags.push(Diagnostic { kind, loc, message });
    }

    fn visible(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|n| n == name))
    }

    fn annotation(&mut self, b: &BoolExpr, params: &BTreeSet<&str>, what: &str) {
        for e in b.exprs() {
            if let ExprKind::Var(name) = &e.kind {
                if !params.contains(name.as_str()) {
                    self.push(
                        DiagnosticKind::AnnotationScope,
                        e.loc,
                        format!("{what} may only mention parameters, found `{name}`"),
                    );
                }
            }
        }
        let dummy = SsaName::new(RESULT_BASE, 0);
        if let Err(e) = Formula::from_bool(b, &mut |n| SsaName::new(n, 0), Some(&dummy)) {
            self.lin_error(e);
        }
    }

    fn lin_error(&mut self, e: LinError) {
        match e {
            LinError::NonLinear(loc) => {
                self.push(DiagnosticKind::NonLinear, loc, "non-linear term: product of two variables".into())
            }
            LinError::Overflow(loc) => self.push(
                DiagnosticKind::ConstantOverflow,
                loc,
                "constant arithmetic overflows 64 bits".into(),
            ),
            // `\result` outside postconditions is a parse error.
            LinError::NoResult(_) => {}
        }
    }

    fn uses(&mut self, e: &Expr) {
        let mut reads = Vec::new();
        e.visit(&mut |x| {
            if let ExprKind::Var(name) = &x.kind {
                reads.push((name.clone(), x.loc));
            }
        });
        for (name, loc) in reads {
            if !self.visible(&name) {
                self.push(DiagnosticKind::Undeclared, loc, format!("undeclared variable `{name}`"));
            } else if !self.assigned.contains(&name) {
                self.push(
                    DiagnosticKind::UseBeforeAssignment,
                    loc,
                    format!("variable `{name}` may be used before it is assigned"),
                );
            }
        }
        if let Err(err) = LinTerm::from_expr(e, &mut |n| SsaName::new(n, 0), None) {
            self.lin_error(err);
        }
    }

    fn block(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn scoped_branch(&mut self, stmts: &[Stmt]) -> BTreeSet<String> {
        let saved = self.assigned.clone();
        self.scopes.push(Vec::new());
        self.block(stmts);
        let locals = self.scopes.pop().unwrap_or_default();
        let mut out = std::mem::replace(&mut self.assigned, saved);
        for l in locals {
            out.remove(&l);
        }
        out
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl { name, init, loc } => {
                if let Some(e) = init {
                    self.uses(e);
                }
                if !self.seen.insert(name.clone()) {
                    self.push(
                        DiagnosticKind::Redeclared,
                        *loc,
                        format!("`{name}` is already declared in this function"),
                    );
                }
                if let Some(scope) = self.scopes.last_mut() {
                    scope.push(name.clone());
                }
                if init.is_some() {
                    self.assigned.insert(name.clone());
                }
            }
            Stmt::Assign { target, rhs, loc } => {
                self.uses(rhs);
                if !self.visible(target) {
                    self.push(DiagnosticKind::Undeclared, *loc, format!("undeclared variable `{target}`"));
                } else {
                    self.assigned.insert(target.clone());
                }
            }
            Stmt::Return { expr, .. } => self.uses(expr),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                for e in &comparison_operands(cond) {
                    self.uses(e);
                }
                let a = self.scoped_branch(then_branch);
                let b = self.scoped_branch(else_branch);
                self.assigned = a.intersection(&b).cloned().collect();
            }
        }
    }
}

/// Operands of every comparison in a condition.
fn comparison_operands(b: &BoolExpr) -> Vec<Expr> {
    let mut out = Vec::new();
    fn go(b: &BoolExpr, out: &mut Vec<Expr>) {
        match &b.kind {
            BoolKind::Lit(_) => {}
            BoolKind::Cmp(_, x, y) => {
                out.push(x.clone());
                out.push(y.clone());
            }
            BoolKind::And(x, y) | BoolKind::Or(x, y) | BoolKind::Implies(x, y) => {
                go(x, out);
                go(y, out);
            }
            BoolKind::Not(x) => go(x, out),
        }
    }
    go(b, &mut out);
    out
}
