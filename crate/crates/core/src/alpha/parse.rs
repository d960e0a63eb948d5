//! Recursive-descent parser for factor expressions.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | field | call | '(' expr ')'
//! call    := ident '(' expr (',' expr)* ')'
//! ```
//!
//! A minus sign directly in front of a number literal folds into a negative
//! literal. Window arguments must be positive integer literals.

use thiserror::Error;

use super::ast::{AlphaExpr, BinaryOp, FieldRef, TsKind, UnaryOp, CORR_MIN_WINDOW};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax { pos: usize, expected: Vec<String>, found: String },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("unknown field `{name}` at {pos}")]
    UnknownField { name: String, pos: usize },
    #[error("`{name}` takes {expected} argument(s), got {found}")]
    Arity { name: String, expected: usize, found: usize, pos: usize },
    #[error("`{name}` needs an integer window >= {min}, got `{window}`")]
    InvalidWindow { name: String, window: String, min: usize, pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_, raw) => format!("number `{raw}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let raw = &src[start..i];
                let value = raw.parse::<f64>().map_err(|_| ParseError::Syntax {
                    pos: start,
                    expected: vec!["number".into()],
                    found: format!("`{raw}`"),
                })?;
                out.push((Tok::Num(value, raw.to_string()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_ascii_lowercase()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    pos: start,
                    expected: vec!["expression".into()],
                    found: format!("`{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

enum Callee {
    Unary(UnaryOp),
    Rank,
    Ts(TsKind),
    Corr,
    Adv,
}

fn callee(name: &str) -> Option<Callee> {
    Some(match name {
        "abs" => Callee::Unary(UnaryOp::Abs),
        "log" => Callee::Unary(UnaryOp::Log),
        "rank" => Callee::Rank,
        "ts_min" => Callee::Ts(TsKind::Min),
        "ts_max" => Callee::Ts(TsKind::Max),
        "ts_rank" => Callee::Ts(TsKind::Rank),
        "ts_argmax" => Callee::Ts(TsKind::ArgMax),
        "ts_argmin" => Callee::Ts(TsKind::ArgMin),
        "stddev" | "ts_stddev" => Callee::Ts(TsKind::Stddev),
        "sum" | "ts_sum" => Callee::Ts(TsKind::Sum),
        "mean" | "ts_mean" => Callee::Ts(TsKind::Mean),
        "delta" => Callee::Ts(TsKind::Delta),
        "decay_linear" => Callee::Ts(TsKind::DecayLinear),
        "corr" | "correlation" => Callee::Corr,
        "adv" => Callee::Adv,
        _ => return None,
    })
}

fn bare_field(name: &str) -> Option<FieldRef> {
    Some(match name {
        "open" => FieldRef::Open,
        "high" => FieldRef::High,
        "low" => FieldRef::Low,
        "close" => FieldRef::Close,
        "volume" => FieldRef::Volume,
        "vwap" => FieldRef::Vwap,
        _ => {
            let digits = name.strip_prefix("adv")?;
            let n: usize = digits.parse().ok()?;
            if n == 0 || digits.starts_with('0') {
                return None;
            }
            FieldRef::Adv(n)
        }
    })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<AlphaExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = AlphaExpr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<AlphaExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = AlphaExpr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<AlphaExpr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Num(v, _) = *self.peek() {
                self.bump();
                return Ok(AlphaExpr::Literal(-v));
            }
            return Ok(AlphaExpr::unary(UnaryOp::Neg, self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AlphaExpr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                Ok(AlphaExpr::Literal(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.call(name, pos)
                } else {
                    bare_field(&name)
                        .map(AlphaExpr::Field)
                        .ok_or(ParseError::UnknownField { name, pos })
                }
            }
            _ => Err(self.unexpected(&["number", "field", "function call", "`(`", "`-`"])),
        }
    }

    fn call(&mut self, name: String, pos: usize) -> Result<AlphaExpr, ParseError> {
        let callee = callee(&name).ok_or_else(|| ParseError::UnknownFunction { name: name.clone(), pos })?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args: Vec<(AlphaExpr, usize)> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let at = self.pos();
                args.push((self.expr()?, at));
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.unexpected(&["`,`", "`)`"])),
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;

        let arity = |expected: usize| -> Result<(), ParseError> {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ParseError::Arity { name: name.clone(), expected, found: args.len(), pos })
            }
        };

        match callee {
            Callee::Unary(op) => {
                arity(1)?;
                Ok(AlphaExpr::unary(op, args.remove(0).0))
            }
            Callee::Rank => {
                arity(1)?;
                Ok(AlphaExpr::rank(args.remove(0).0))
            }
            Callee::Adv => {
                arity(1)?;
                let (arg, at) = args.remove(0);
                Ok(AlphaExpr::Field(FieldRef::Adv(window(&name, &arg, 1, at)?)))
            }
            Callee::Ts(kind) => {
                arity(2)?;
                let (w, at) = args.pop().expect("arity checked");
                let w = window(&name, &w, kind.min_window(), at)?;
                Ok(AlphaExpr::ts(kind, args.remove(0).0, w))
            }
            Callee::Corr => {
                arity(3)?;
                let (w, at) = args.pop().expect("arity checked");
                let w = window(&name, &w, CORR_MIN_WINDOW, at)?;
                let right = args.pop().expect("arity checked").0;
                let left = args.pop().expect("arity checked").0;
                Ok(AlphaExpr::corr(left, right, w))
            }
        }
    }
}

fn window(name: &str, arg: &AlphaExpr, min: usize, pos: usize) -> Result<usize, ParseError> {
    let bad = || ParseError::InvalidWindow { name: name.to_string(), window: arg.to_string(), min, pos };
    match arg {
        AlphaExpr::Literal(v) if v.fract() == 0.0 && *v >= min as f64 && *v <= 1e6 => Ok(*v as usize),
        _ => Err(bad()),
    }
}

/// Parses a factor expression.
pub fn parse(text: &str) -> Result<AlphaExpr, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["operator", "end of input"]));
    }
    Ok(e)
}
