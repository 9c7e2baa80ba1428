//! Typed syntax tree for the input language.

use serde::{Deserialize, Serialize};
use std::fmt;

/// 1-based position in the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceLoc {
    pub line: u32,
    pub column: u32,
}

impl SourceLoc {
    pub fn new(line: u32, column: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceLoc { line, column }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    IntLit(i64),
    Var(String),
    /// `\result`, only meaningful inside a postcondition.
    ResultRef,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    /// Product; linear only when one side is free of variables.
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SourceLoc) -> Self {
        Expr { kind, loc }
    }

    /// True when the expression mentions no variable (and no `\result`).
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            ExprKind::IntLit(_) => true,
            ExprKind::Var(_) | ExprKind::ResultRef => false,
            ExprKind::Neg(e) => e.is_constant(),
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(name) => Some(name),
            _ => None,
        }
    }

    /// Pre-order walk over every sub-expression.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::IntLit(_) | ExprKind::Var(_) | ExprKind::ResultRef => {}
            ExprKind::Neg(e) => e.visit(f),
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolExpr {
    pub kind: BoolKind,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolKind {
    Lit(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
    /// Only accepted inside annotations.
    Implies(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn new(kind: BoolKind, loc: SourceLoc) -> Self {
        BoolExpr { kind, loc }
    }

    pub fn visit<'a>(&'a self, on_bool: &mut impl FnMut(&'a BoolExpr), on_expr: &mut impl FnMut(&'a Expr)) {
        on_bool(self);
        match &self.kind {
            BoolKind::Lit(_) => {}
            BoolKind::Cmp(_, a, b) => {
                a.visit(on_expr);
                b.visit(on_expr);
            }
            BoolKind::And(a, b) | BoolKind::Or(a, b) | BoolKind::Implies(a, b) => {
                a.visit(on_bool, on_expr);
                b.visit(on_bool, on_expr);
            }
            BoolKind::Not(a) => a.visit(on_bool, on_expr),
        }
    }

    /// Every integer sub-expression, in pre-order.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.visit(&mut |_| {}, &mut |e| out.push(e));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Decl {
        name: String,
        init: Option<Expr>,
        loc: SourceLoc,
    },
    Assign {
        target: String,
        rhs: Expr,
        loc: SourceLoc,
    },
    If {
        cond: BoolExpr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
        loc: SourceLoc,
    },
    Return {
        expr: Expr,
        loc: SourceLoc,
    },
}

impl Stmt {
    pub fn loc(&self) -> SourceLoc {
        match self {
            Stmt::Decl { loc, .. }
            | Stmt::Assign { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::Return { loc, .. } => *loc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub loc: SourceLoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub loc: SourceLoc,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub precondition: Option<BoolExpr>,
    pub postcondition: BoolExpr,
}

impl Function {
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }
}
