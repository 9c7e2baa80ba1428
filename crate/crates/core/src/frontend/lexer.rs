use super::ast::SourceLoc;
use super::{ParseError, ParseErrorKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Class,
    IntKw,
    If,
    Else,
    Return,
    True,
    False,
    Requires,
    Ensures,
    Result,
    AnnotOpen,
    AnnotClose,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Bang,
    AndAnd,
    OrOr,
    Implies,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Class => "class",
            Tok::IntKw => "int",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::Return => "return",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Requires => "requires",
            Tok::Ensures => "ensures",
            Tok::Result => "\\result",
            Tok::AnnotOpen => "/*@",
            Tok::AnnotClose => "*/",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Implies => "==>",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub loc: SourceLoc,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    in_annotation: bool,
    out: Vec<Token>,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        in_annotation: false,
        out: Vec::new(),
    };
    lx.run()?;
    Ok(lx.out)
}

fn unsupported(what: &str, loc: SourceLoc) -> ParseError {
    ParseError::new(ParseErrorKind::Unsupported(what.to_string()), loc)
}

impl Lexer {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn loc(&self) -> SourceLoc {
        SourceLoc::new(self.line, self.col)
    }

    fn push(&mut self, tok: Tok, loc: SourceLoc) {
        self.out.push(Token { tok, loc });
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn run(&mut self) -> Result<(), ParseError> {
        while let Some(c) = self.peek(0) {
            let loc = self.loc();
            if c.is_whitespace() || (self.in_annotation && c == '@') {
                self.bump();
                continue;
            }
            if self.starts_with("//") {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            if self.starts_with("*/") {
                if !self.in_annotation {
                    return Err(ParseError::new(ParseErrorKind::Unexpected("`*/`".into()), loc));
                }
                self.bump();
                self.bump();
                self.in_annotation = false;
                self.push(Tok::AnnotClose, loc);
                continue;
            }
            if self.starts_with("/*@") {
                if self.in_annotation {
                    return Err(ParseError::new(ParseErrorKind::Unexpected("nested annotation".into()), loc));
                }
                for _ in 0..3 {
                    self.bump();
                }
                self.in_annotation = true;
                self.push(Tok::AnnotOpen, loc);
                continue;
            }
            if self.starts_with("/*") {
                self.bump();
                self.bump();
                loop {
                    if self.starts_with("*/") {
                        self.bump();
                        self.bump();
                        break;
                    }
                    if self.bump().is_none() {
                        return Err(ParseError::new(ParseErrorKind::UnterminatedComment, loc));
                    }
                }
                continue;
            }
            if c.is_ascii_digit() {
                self.number(loc)?;
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                self.word(loc)?;
                continue;
            }
            if c == '\\' {
                self.bump();
                let mut word = String::new();
                while let Some(c) = self.peek(0) {
                    if !(c.is_alphanumeric() || c == '_') {
                        break;
                    }
                    word.push(c);
                    self.bump();
                }
                if word != "result" {
                    return Err(ParseError::new(ParseErrorKind::Unexpected(format!("`\\{word}`")), loc));
                }
                self.push(Tok::Result, loc);
                continue;
            }
            self.punct(c, loc)?;
        }
        if self.in_annotation {
            return Err(ParseError::new(ParseErrorKind::UnterminatedComment, self.loc()));
        }
        let loc = self.loc();
        self.push(Tok::Eof, loc);
        Ok(())
    }

    fn number(&mut self, loc: SourceLoc) -> Result<(), ParseError> {
        let mut digits = String::new();
        while let Some(c) = self.peek(0) {
            if !c.is_ascii_digit() {
                break;
            }
            digits.push(c);
            self.bump();
        }
        match self.peek(0) {
            Some('.') | Some('e') | Some('E') | Some('f') | Some('F') | Some('d') | Some('D') => {
                return Err(unsupported("float literal", loc));
            }
            Some('l') | Some('L') => return Err(unsupported("long literal", loc)),
            Some(c) if c.is_alphanumeric() || c == '_' => {
                return Err(ParseError::new(ParseErrorKind::Unexpected(format!("`{c}` in number")), loc));
            }
            _ => {}
        }
        let value = digits
            .parse::<i64>()
            .map_err(|_| ParseError::new(ParseErrorKind::LiteralOutOfRange(digits.clone()), loc))?;
        self.push(Tok::Int(value), loc);
        Ok(())
    }

    fn word(&mut self, loc: SourceLoc) -> Result<(), ParseError> {
        let mut word = String::new();
        while let Some(c) = self.peek(0) {
            if !(c.is_alphanumeric() || c == '_') {
                break;
            }
            word.push(c);
            self.bump();
        }
        let tok = match word.as_str() {
            "class" => Tok::Class,
            "int" => Tok::IntKw,
            "if" => Tok::If,
            "else" => Tok::Else,
            "return" => Tok::Return,
            "true" => Tok::True,
            "false" => Tok::False,
            "requires" if self.in_annotation => Tok::Requires,
            "ensures" if self.in_annotation => Tok::Ensures,
            "while" | "for" | "do" | "break" | "continue" => return Err(unsupported("loop", loc)),
            "boolean" | "long" | "short" | "byte" | "char" | "float" | "double" | "void" | "String" => {
                return Err(unsupported(&format!("type `{word}`"), loc))
            }
            "new" | "null" | "this" | "switch" | "case" | "goto" | "throw" | "try" => {
                return Err(unsupported(&format!("keyword `{word}`"), loc))
            }
            _ => Tok::Ident(word),
        };
        self.push(tok, loc);
        Ok(())
    }

    fn punct(&mut self, c: char, loc: SourceLoc) -> Result<(), ParseError> {
        let next = self.peek(1);
        let two = |a: char, b: char| c == a && next == Some(b);
        let (tok, len) = if self.starts_with("==>") {
            (Tok::Implies, 3)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::NotEq, 2)
        } else if two('<', '=') {
            (Tok::Le, 2)
        } else if two('>', '=') {
            (Tok::Ge, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else if two('+', '+') || two('-', '-') || two('+', '=') || two('-', '=') || two('*', '=') {
            return Err(unsupported("compound assignment", loc));
        } else {
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '=' => Tok::Assign,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '!' => Tok::Bang,
                '/' | '%' => return Err(unsupported("division", loc)),
                '?' => return Err(unsupported("conditional expression", loc)),
                '[' | ']' => return Err(unsupported("array", loc)),
                '.' => return Err(unsupported("member access", loc)),
                '&' | '|' | '^' | '~' => return Err(unsupported("bitwise operator", loc)),
                other => {
                    return Err(ParseError::new(ParseErrorKind::Unexpected(format!("character {other:?}")), loc))
                }
            };
            (tok, 1)
        };
        for _ in 0..len {
            self.bump();
        }
        self.push(tok, loc);
        Ok(())
    }
}
