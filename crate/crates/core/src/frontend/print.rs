//! Pretty-printer. Output is fully parenthesized so it re-parses to the
//! same tree.

use super::ast::*;
use std::fmt::{self, Display, Formatter, Write};

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::IntLit(v) => write!(f, "{v}"),
            ExprKind::Var(name) => f.write_str(name),
            ExprKind::ResultRef => f.write_str("\\result"),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Add(a, b) => write!(f, "({a} + {b})"),
            ExprKind::Sub(a, b) => write!(f, "({a} - {b})"),
            ExprKind::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

impl Display for BoolExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.kind {
            BoolKind::Lit(v) => write!(f, "{v}"),
            BoolKind::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            BoolKind::And(a, b) => write!(f, "({a} && {b})"),
            BoolKind::Or(a, b) => write!(f, "({a} || {b})"),
            BoolKind::Not(a) => write!(f, "(!{a})"),
            BoolKind::Implies(a, b) => write!(f, "({a} ==> {b})"),
        }
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) -> fmt::Result {
    for s in stmts {
        write_stmt(out, s, depth)?;
    }
    Ok(())
}

fn write_stmt(out: &mut String, stmt: &Stmt, depth: usize) -> fmt::Result {
    let pad = "    ".repeat(depth);
    match stmt {
        Stmt::Decl { name, init: None, .. } => writeln!(out, "{pad}int {name};"),
        Stmt::Decl {
            name, init: Some(e), ..
        } => writeln!(out, "{pad}int {name} = {e};"),
        Stmt::Assign { target, rhs, .. } => writeln!(out, "{pad}{target} = {rhs};"),
        Stmt::Return { expr, .. } => writeln!(out, "{pad}return {expr};"),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            writeln!(out, "{pad}if ({cond}) {{")?;
            write_block(out, then_branch, depth + 1)?;
            if else_branch.is_empty() {
                writeln!(out, "{pad}}}")
            } else {
                writeln!(out, "{pad}}} else {{")?;
                write_block(out, else_branch, depth + 1)?;
                writeln!(out, "{pad}}}")
            }
        }
    }
}

impl Display for Function {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        out.push_str("/*@");
        if let Some(pre) = &self.precondition {
            write!(out, " requires {pre};\n  @")?;
        }
        writeln!(out, " ensures {}; */", self.postcondition)?;
        let params: Vec<String> = self.params.iter().map(|p| format!("int {}", p.name)).collect();
        writeln!(out, "int {}({}) {{", self.name, params.join(", "))?;
        write_block(&mut out, &self.body, 1)?;
        out.push_str("}\n");
        f.write_str(&out)
    }
}
