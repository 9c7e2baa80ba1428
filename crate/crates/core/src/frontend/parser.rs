//! Recursive-descent parser.
//!
//! Integer and boolean expressions share one precedence grammar; operand
//! types are checked while the tree is built, so `(a + b) < c` and
//! `(a < b) && c > d` both parse without lookahead tricks.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind};

#[derive(Clone, Copy)]
struct Ctx {
    annotation: bool,
    allow_result: bool,
}

const CODE: Ctx = Ctx {
    annotation: false,
    allow_result: false,
};

enum Raw {
    Int(Expr),
    Bool(BoolExpr),
}

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    requires: Vec<BoolExpr>,
    ensures: Vec<BoolExpr>,
}

/// Syntax-only parse: no linearity or scoping checks.
pub fn parse_syntax(text: &str) -> Result<Function, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        requires: Vec::new(),
        ensures: Vec::new(),
    };
    p.file()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn loc(&self) -> SourceLoc {
        self.tokens[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        ParseError::new(ParseErrorKind::Unexpected(self.peek().describe()), self.loc())
    }

    fn expect(&mut self, tok: Tok) -> Result<SourceLoc, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance().loc)
        } else {
            Err(ParseError::new(
                ParseErrorKind::Expected {
                    expected: tok.describe(),
                    found: self.peek().describe(),
                },
                self.loc(),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, SourceLoc), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let loc = self.advance().loc;
                Ok((name, loc))
            }
            other => Err(ParseError::new(
                ParseErrorKind::Expected {
                    expected: "identifier".into(),
                    found: other.describe(),
                },
                self.loc(),
            )),
        }
    }

    fn annotations(&mut self) -> Result<(), ParseError> {
        while *self.peek() == Tok::AnnotOpen {
            self.advance();
            loop {
                match self.peek() {
                    Tok::AnnotClose => {
                        self.advance();
                        break;
                    }
                    Tok::Requires => {
                        self.advance();
                        let e = self.bool_expr(Ctx {
                            annotation: true,
                            allow_result: false,
                        })?;
                        self.expect(Tok::Semi)?;
                        self.requires.push(e);
                    }
                    Tok::Ensures => {
                        self.advance();
                        let e = self.bool_expr(Ctx {
                            annotation: true,
                            allow_result: true,
                        })?;
                        self.expect(Tok::Semi)?;
                        self.ensures.push(e);
                    }
                    _ => return Err(self.unexpected()),
                }
            }
        }
        Ok(())
    }

    fn file(&mut self) -> Result<Function, ParseError> {
        self.annotations()?;
        let f = if *self.peek() == Tok::Class {
            self.advance();
            self.ident()?;
            self.expect(Tok::LBrace)?;
            self.annotations()?;
            let f = self.function()?;
            self.expect(Tok::RBrace)?;
            f
        } else {
            self.function()?
        };
        if *self.peek() == Tok::AnnotOpen {
            return Err(ParseError::new(
                ParseErrorKind::Unexpected("annotation after the function".into()),
                self.loc(),
            ));
        }
        match self.peek() {
            Tok::Eof => Ok(f),
            Tok::IntKw => Err(ParseError::new(
                ParseErrorKind::Unsupported("multiple functions".into()),
                self.loc(),
            )),
            _ => Err(self.unexpected()),
        }
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        self.annotations()?;
        self.expect(Tok::IntKw)?;
        let (name, loc) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                self.expect(Tok::IntKw)?;
                let (pname, ploc) = self.ident()?;
                params.push(Param { name: pname, loc: ploc });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        let end = self.loc();
        match body.last() {
            Some(Stmt::Return { .. }) => {}
            _ => return Err(ParseError::new(ParseErrorKind::MissingReturn, end)),
        }
        if let Some(early) = find_early_return(&body[..body.len() - 1]) {
            return Err(ParseError::new(
                ParseErrorKind::Unsupported("return before the end of the function".into()),
                early,
            ));
        }
        let postcondition = conjoin(std::mem::take(&mut self.ensures))
            .ok_or_else(|| ParseError::new(ParseErrorKind::MissingPostcondition, loc))?;
        let precondition = conjoin(std::mem::take(&mut self.requires));
        Ok(Function {
            name,
            loc,
            params,
            body,
            precondition,
            postcondition,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected());
            }
            out.push(self.stmt()?);
        }
        self.advance();
        Ok(out)
    }

    fn branch(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::IntKw => {
                self.advance();
                let (name, _) = self.ident()?;
                let init = if *self.peek() == Tok::Assign {
                    self.advance();
                    Some(self.int_expr(CODE)?)
                } else {
                    None
                };
                if *self.peek() == Tok::Comma {
                    return Err(ParseError::new(
                        ParseErrorKind::Unsupported("multiple declarators".into()),
                        self.loc(),
                    ));
                }
                self.expect(Tok::Semi)?;
                Ok(Stmt::Decl { name, init, loc })
            }
            Tok::Ident(target) => {
                self.advance();
                self.expect(Tok::Assign)?;
                let rhs = self.int_expr(CODE)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Assign { target, rhs, loc })
            }
            Tok::If => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.bool_expr(CODE)?;
                self.expect(Tok::RParen)?;
                let then_branch = self.branch()?;
                let else_branch = if *self.peek() == Tok::Else {
                    self.advance();
                    self.branch()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                })
            }
            Tok::Return => {
                self.advance();
                let expr = self.int_expr(CODE)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return { expr, loc })
            }
            Tok::LBrace => Err(ParseError::new(
                ParseErrorKind::Unsupported("nested block".into()),
                loc,
            )),
            _ => Err(self.unexpected()),
        }
    }

    fn int_expr(&mut self, ctx: Ctx) -> Result<Expr, ParseError> {
        let loc = self.loc();
        let raw = self.implies(ctx)?;
        into_int(raw, loc)
    }

    fn bool_expr(&mut self, ctx: Ctx) -> Result<BoolExpr, ParseError> {
        let loc = self.loc();
        let raw = self.implies(ctx)?;
        into_bool(raw, loc)
    }

    fn implies(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let lhs = self.or(ctx)?;
        if *self.peek() != Tok::Implies {
            return Ok(lhs);
        }
        let op_loc = self.loc();
        if !ctx.annotation {
            return Err(ParseError::new(
                ParseErrorKind::Unsupported("implication outside an annotation".into()),
                op_loc,
            ));
        }
        self.advance();
        let lhs = into_bool(lhs, loc)?;
        let rhs_loc = self.loc();
        let rhs = into_bool(self.implies(ctx)?, rhs_loc)?;
        Ok(Raw::Bool(BoolExpr::new(
            BoolKind::Implies(Box::new(lhs), Box::new(rhs)),
            loc,
        )))
    }

    fn or(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let mut lhs = self.and(ctx)?;
        while *self.peek() == Tok::OrOr {
            self.advance();
            let a = into_bool(lhs, loc)?;
            let rhs_loc = self.loc();
            let b = into_bool(self.and(ctx)?, rhs_loc)?;
            lhs = Raw::Bool(BoolExpr::new(BoolKind::Or(Box::new(a), Box::new(b)), loc));
        }
        Ok(lhs)
    }

    fn and(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let mut lhs = self.cmp(ctx)?;
        while *self.peek() == Tok::AndAnd {
            self.advance();
            let a = into_bool(lhs, loc)?;
            let rhs_loc = self.loc();
            let b = into_bool(self.cmp(ctx)?, rhs_loc)?;
            lhs = Raw::Bool(BoolExpr::new(BoolKind::And(Box::new(a), Box::new(b)), loc));
        }
        Ok(lhs)
    }

    fn cmp(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let lhs = self.additive(ctx)?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let a = into_int(lhs, loc)?;
        let rhs_loc = self.loc();
        let b = into_int(self.additive(ctx)?, rhs_loc)?;
        if matches!(
            self.peek(),
            Tok::EqEq | Tok::NotEq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        ) {
            return Err(ParseError::new(
                ParseErrorKind::Unsupported("chained comparison".into()),
                self.loc(),
            ));
        }
        Ok(Raw::Bool(BoolExpr::new(BoolKind::Cmp(op, a, b), loc)))
    }

    fn additive(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let mut lhs = self.multiplicative(ctx)?;
        loop {
            let sub = match self.peek() {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => return Ok(lhs),
            };
            self.advance();
            let a = Box::new(into_int(lhs, loc)?);
            let rhs_loc = self.loc();
            let b = Box::new(into_int(self.multiplicative(ctx)?, rhs_loc)?);
            let kind = if sub { ExprKind::Sub(a, b) } else { ExprKind::Add(a, b) };
            lhs = Raw::Int(Expr::new(kind, loc));
        }
    }

    fn multiplicative(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        let mut lhs = self.unary(ctx)?;
        while *self.peek() == Tok::Star {
            self.advance();
            let a = Box::new(into_int(lhs, loc)?);
            let rhs_loc = self.loc();
            let b = Box::new(into_int(self.unary(ctx)?, rhs_loc)?);
            lhs = Raw::Int(Expr::new(ExprKind::Mul(a, b), loc));
        }
        Ok(lhs)
    }

    fn unary(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let inner_loc = self.loc();
                let e = into_int(self.unary(ctx)?, inner_loc)?;
                Ok(Raw::Int(Expr::new(ExprKind::Neg(Box::new(e)), loc)))
            }
            Tok::Bang => {
                self.advance();
                let inner_loc = self.loc();
                let e = into_bool(self.unary(ctx)?, inner_loc)?;
                Ok(Raw::Bool(BoolExpr::new(BoolKind::Not(Box::new(e)), loc)))
            }
            _ => self.primary(ctx),
        }
    }

    fn primary(&mut self, ctx: Ctx) -> Result<Raw, ParseError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Raw::Int(Expr::new(ExprKind::IntLit(v), loc)))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    return Err(ParseError::new(
                        ParseErrorKind::Unsupported("method call".into()),
                        loc,
                    ));
                }
                Ok(Raw::Int(Expr::new(ExprKind::Var(name), loc)))
            }
            Tok::Result => {
                if !ctx.allow_result {
                    return Err(ParseError::new(
                        ParseErrorKind::Unsupported("`\\result` outside a postcondition".into()),
                        loc,
                    ));
                }
                self.advance();
                Ok(Raw::Int(Expr::new(ExprKind::ResultRef, loc)))
            }
            Tok::True | Tok::False => {
                let v = *self.peek() == Tok::True;
                self.advance();
                Ok(Raw::Bool(BoolExpr::new(BoolKind::Lit(v), loc)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.implies(ctx)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn into_int(raw: Raw, loc: SourceLoc) -> Result<Expr, ParseError> {
    match raw {
        Raw::Int(e) => Ok(e),
        Raw::Bool(_) => Err(ParseError::new(ParseErrorKind::ExpectedInteger, loc)),
    }
}

fn into_bool(raw: Raw, loc: SourceLoc) -> Result<BoolExpr, ParseError> {
    match raw {
        Raw::Bool(b) => Ok(b),
        Raw::Int(_) => Err(ParseError::new(ParseErrorKind::ExpectedBoolean, loc)),
    }
}

fn conjoin(mut parts: Vec<BoolExpr>) -> Option<BoolExpr> {
    if parts.is_empty() {
        return None;
    }
    let first = parts.remove(0);
    Some(parts.into_iter().fold(first, |acc, next| {
        let loc = acc.loc;
        BoolExpr::new(BoolKind::And(Box::new(acc), Box::new(next)), loc)
    }))
}

fn find_early_return(stmts: &[Stmt]) -> Option<SourceLoc> {
    stmts.iter().find_map(|s| match s {
        Stmt::Return { loc, .. } => Some(*loc),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => find_early_return(then_branch).or_else(|| find_early_return(else_branch)),
        _ => None,
    })
}
