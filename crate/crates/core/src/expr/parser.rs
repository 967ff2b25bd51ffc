//! Recursive descent parser for the expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;            (* right-associative *)
//! primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//! variable = "x" digit { digit } ;             (* x1 .. xn *)
//! func    = "sin" | "cos" | "exp" | "ln" | "sqrt" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```

use std::fmt;

use super::ast::{Expr, Func};

/// Trees deeper than this are rejected to keep evaluation off the stack limit.
pub const MAX_DEPTH: usize = 256;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: found {found}, expected {}", .expected.join(" or "))]
    Syntax { line: usize, column: usize, found: String, expected: Vec<&'static str> },
    #[error("unknown identifier '{name}' at {line}:{column}")]
    UnknownIdentifier { line: usize, column: usize, name: String },
    #[error("variable x{index} at {line}:{column} exceeds dimension {dimension}")]
    DimensionExceeded { line: usize, column: usize, index: usize, dimension: usize },
    #[error("expression nested deeper than {MAX_DEPTH} at {line}:{column}")]
    TooDeep { line: usize, column: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Bad(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Bad(c) => write!(f, "character {c:?}"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Vec<(Tok, Pos)> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Tok::Num(v),
                _ => Tok::Bad(c),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                other => Tok::Bad(other),
            }
        };
        column += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column }));
    out
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    dimension: usize,
}

const OPERAND: &[&str] = &["number", "variable", "function call", "'('", "'-'"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        let p = self.pos();
        ParseError::Syntax { line: p.line, column: p.column, found: self.peek().to_string(), expected: expected.to_vec() }
    }

    fn check_depth(&self, depth: usize) -> Result<(), ParseError> {
        if depth > MAX_DEPTH {
            let p = self.pos();
            Err(ParseError::TooDeep { line: p.line, column: p.column })
        } else {
            Ok(())
        }
    }

    fn expr(&mut self, nest: usize) -> Result<(Expr, usize), ParseError> {
        self.check_depth(nest)?;
        let (mut lhs, mut depth) = self.term(nest)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => Expr::add as fn(Expr, Expr) -> Expr,
                Tok::Minus => Expr::sub,
                _ => return Ok((lhs, depth)),
            };
            self.bump();
            let (rhs, d) = self.term(nest)?;
            depth = depth.max(d) + 1;
            self.check_depth(depth)?;
            lhs = op(lhs, rhs);
        }
    }

    fn term(&mut self, nest: usize) -> Result<(Expr, usize), ParseError> {
        let (mut lhs, mut depth) = self.unary(nest)?;
        loop {
            let op = match self.peek() {
                Tok::Star => Expr::mul as fn(Expr, Expr) -> Expr,
                Tok::Slash => |a, b| Expr::Div(Box::new(a), Box::new(b)),
                _ => return Ok((lhs, depth)),
            };
            self.bump();
            let (rhs, d) = self.unary(nest)?;
            depth = depth.max(d) + 1;
            self.check_depth(depth)?;
            lhs = op(lhs, rhs);
        }
    }

    fn unary(&mut self, nest: usize) -> Result<(Expr, usize), ParseError> {
        self.check_depth(nest)?;
        if *self.peek() == Tok::Minus {
            self.bump();
            let (inner, d) = self.unary(nest + 1)?;
            return Ok((Expr::Neg(Box::new(inner)), d + 1));
        }
        self.power(nest)
    }

    fn power(&mut self, nest: usize) -> Result<(Expr, usize), ParseError> {
        let (base, d) = self.primary(nest)?;
        if *self.peek() != Tok::Caret {
            return Ok((base, d));
        }
        self.bump();
        let (exponent, e) = self.unary(nest + 1)?;
        Ok((Expr::pow(base, exponent), d.max(e) + 1))
    }

    fn primary(&mut self, nest: usize) -> Result<(Expr, usize), ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok((Expr::Num(v), 1))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr(nest + 1)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (_, pos) = self.bump();
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.syntax(&["'('"]));
                    }
                    self.bump();
                    let (arg, d) = self.expr(nest + 1)?;
                    self.expect_rparen()?;
                    return Ok((Expr::Call(func, Box::new(arg)), d + 1));
                }
                let index = variable_index(&name).ok_or_else(|| ParseError::UnknownIdentifier {
                    line: pos.line,
                    column: pos.column,
                    name: name.clone(),
                })?;
                if index > self.dimension {
                    return Err(ParseError::DimensionExceeded {
                        line: pos.line,
                        column: pos.column,
                        index,
                        dimension: self.dimension,
                    });
                }
                Ok((Expr::Var(index - 1), 1))
            }
            _ => Err(self.syntax(OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&["')'", "operator"]))
        }
    }
}

/// `x<k>` with k >= 1, no leading zeros.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Parses `source` into an expression over the coordinates `x1..x<dimension>`.
pub fn parse(source: &str, dimension: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(source), at: 0, dimension };
    let (e, _) = p.expr(0)?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(e)
}
