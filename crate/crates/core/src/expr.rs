//! Closed-form arithmetic expressions over named parameters.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'pi' | ident | func '(' expr ')' | '(' expr ')'
//! func    := sqrt | cosh | arccosh | cos | sin
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Cosh,
    Arccosh,
    Cos,
    Sin,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Cosh => "cosh",
            Func::Arccosh => "arccosh",
            Func::Cos => "cos",
            Func::Sin => "sin",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "cosh" => Func::Cosh,
            "arccosh" => Func::Arccosh,
            "cos" => Func::Cos,
            "sin" => Func::Sin,
            _ => return None,
        })
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Cosh => x.cosh(),
            Func::Arccosh => x.acosh(),
            Func::Cos => x.cos(),
            Func::Sin => x.sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

pub type Env = BTreeMap<String, f64>;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        parse_at(src, 1, 1)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(n) => *env
                .get(n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{n}`")))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, e) => f.eval(e.eval(env)?),
        })
    }

    /// Names referenced by the expression, sorted.
    pub fn variables(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Var(n) => out.push(n.clone()),
                Expr::Neg(a) | Expr::Call(_, a) => walk(a, out),
                Expr::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Num(_) | Expr::Pi => {}
            }
        }
        let mut v = Vec::new();
        walk(self, &mut v);
        v.sort();
        v.dedup();
        v
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            _ => 4,
        }
    }
}

/// Parses with positions reported relative to (`line`, `col`).
pub fn parse_at(src: &str, line: usize, col: usize) -> Result<Expr> {
    let mut p = Parser {
        s: src.as_bytes(),
        i: 0,
        line,
        col,
    };
    let e = p.expr()?;
    p.ws();
    if p.i < p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col + self.i,
            msg: msg.to_string(),
        }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.i += 1;
            // a sign directly on a literal belongs to the literal
            if matches!(self.s.get(self.i), Some(c) if c.is_ascii_digit() || *c == b'.') {
                if let Expr::Num(v) = self.number()? {
                    return Ok(Expr::Num(-v));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.i += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).unwrap().to_string();
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(f) = Func::from_name(&name) {
                    if self.peek() != Some(b'(') {
                        return Err(self.err(&format!("`{name}` takes exactly one argument")));
                    }
                    self.i += 1;
                    let arg = self.expr()?;
                    match self.peek() {
                        Some(b')') => self.i += 1,
                        Some(b',') => return Err(self.err(&format!("`{name}` takes exactly one argument"))),
                        _ => return Err(self.err("expected `)`")),
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if self.peek() == Some(b'(') {
                    return Err(self.err(&format!("unknown function `{name}`")));
                }
                Ok(Expr::Var(name))
            }
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.i;
        let s = self.s;
        while self.i < s.len() && (s[self.i].is_ascii_digit() || s[self.i] == b'.') {
            self.i += 1;
        }
        if self.i < s.len() && (s[self.i] == b'e' || s[self.i] == b'E') {
            let save = self.i;
            self.i += 1;
            if self.i < s.len() && (s[self.i] == b'+' || s[self.i] == b'-') {
                self.i += 1;
            }
            let digits = self.i;
            while self.i < s.len() && s[self.i].is_ascii_digit() {
                self.i += 1;
            }
            if self.i == digits {
                self.i = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.i]).unwrap();
        text.parse::<f64>().map(Expr::Num).map_err(|_| Error::Parse {
            line: self.line,
            col: self.col + start,
            msg: format!("bad number `{text}`"),
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(e) => {
                if e.prec() < 3 || matches!(**e, Expr::Num(_)) {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, a, b) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, "+"),
                    BinOp::Sub => (1, "-"),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                if a.prec() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {sym} ")?;
                // the right operand binds tighter to keep the tree shape
                if b.prec() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}
