//! Front end for the input language: a single `int` function with
//! JML-style `/*@ requires ...; ensures ...; */` annotations, integer
//! locals, linear arithmetic and `if`/`else`. Loops are rejected.

pub mod ast;
mod lexer;
mod parser;
mod print;
mod typecheck;

pub use ast::*;
pub use parser::parse_syntax;
pub use typecheck::{typecheck, Diagnostic, DiagnosticKind};

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{loc}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub loc: SourceLoc,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, loc: SourceLoc) -> Self {
        ParseError { kind, loc }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("unexpected {0}")]
    Unexpected(String),
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("expected an integer expression")]
    ExpectedInteger,
    #[error("expected a boolean expression")]
    ExpectedBoolean,
    #[error("integer literal {0} does not fit in 64 bits")]
    LiteralOutOfRange(String),
    #[error("unterminated comment")]
    UnterminatedComment,
    #[error("function must end with a return statement")]
    MissingReturn,
    #[error("missing postcondition (`ensures` clause)")]
    MissingPostcondition,
}

/// Parses a program and rejects constructs outside the supported fragment
/// (loops, floats, non-linear products, ...).
pub fn parse_program(text: &str) -> Result<Function, ParseError> {
    let f = parse_syntax(text)?;
    if let Some(loc) = first_nonlinear(&f) {
        return Err(ParseError::new(
            ParseErrorKind::Unsupported("non-linear term".into()),
            loc,
        ));
    }
    Ok(f)
}

fn first_nonlinear(f: &Function) -> Option<SourceLoc> {
    let mut found = None;
    let mut check = |e: &Expr| {
        if found.is_none() {
            if let ExprKind::Mul(a, b) = &e.kind {
                if !a.is_constant() && !b.is_constant() {
                    found = Some(e.loc);
                }
            }
        }
    };
    for_each_expr(f, &mut check);
    found
}

/// Visits every integer expression of the function, annotations included.
pub fn for_each_expr<'a>(f: &'a Function, visit: &mut impl FnMut(&'a Expr)) {
    fn stmts<'a>(body: &'a [Stmt], visit: &mut impl FnMut(&'a Expr)) {
        for s in body {
            match s {
                Stmt::Decl { init, .. } => {
                    if let Some(e) = init {
                        e.visit(visit);
                    }
                }
                Stmt::Assign { rhs, .. } => rhs.visit(visit),
                Stmt::Return { expr, .. } => expr.visit(visit),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    cond.visit(&mut |_| {}, visit);
                    stmts(then_branch, visit);
                    stmts(else_branch, visit);
                }
            }
        }
    }
    if let Some(pre) = &f.precondition {
        pre.visit(&mut |_| {}, visit);
    }
    f.postcondition.visit(&mut |_| {}, visit);
    stmts(&f.body, visit);
}
