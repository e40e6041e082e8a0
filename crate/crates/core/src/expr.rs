//! A small expression language for coefficient functions and exact solutions.
//!
//! Expressions range over numeric literals, the variables `x`, `t`, `v`, the
//! constant `pi`, the binary operators `+ - * / ^`, unary negation and the
//! functions `sin cos tan exp log sqrt abs tanh pow`.
//!
//! Precedence from loosest to tightest: `+ -`, then `* /`, then unary minus,
//! then `^` (right-associative). So `-x^2` is `-(x^2)`.
//!
//! ```
//! use sobolev_spectral::expr::{Expr, Var};
//!
//! let e: Expr = "x^2 + sin(t)*v".parse()?;
//! assert_eq!(e.eval(2.0, 0.0, 3.0)?, 4.0);
//!
//! let d = e.diff(Var::X)?;
//! assert_eq!(d.to_string(), "2.0*x");
//! # Ok::<(), sobolev_spectral::expr::ExprError>(())
//! ```

use std::fmt;
use std::ops;
use std::str::FromStr;

use thiserror::Error;

/// Nesting limit for parenthesized sub-expressions and unary chains.
const MAX_NESTING: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("domain error in `{expr}`: {message}")]
    Domain { expr: String, message: String },

    #[error("cannot differentiate `{expr}` (abs is not differentiable at 0)")]
    UnsupportedDerivative { expr: String },
}

impl ExprError {
    /// Byte offset of a parse error, if this is one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ExprError::Syntax { offset, .. } | ExprError::UnknownIdentifier { offset, .. } => {
                Some(*offset)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
            Var::V => "v",
        }
    }
}

impl FromStr for Var {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Var::X),
            "t" => Ok(Var::T),
            "v" => Ok(Var::V),
            _ => Err(ExprError::UnknownIdentifier {
                offset: 0,
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, a: f64) -> f64 {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Tanh => a.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => power(a, b),
        }
    }
}

fn power(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Immutable expression tree. `pow(a, b)` parses to the same node as `a^b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        Parser::new(source)?.parse_all()
    }

    pub fn num(c: f64) -> Expr {
        Expr::Num(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            _ => None,
        }
    }

    fn is_num(&self, c: f64) -> bool {
        self.as_num() == Some(c)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Call(_, e) => 1 + e.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    pub fn eval(&self, x: f64, t: f64, v: f64) -> Result<f64, ExprError> {
        let value = match self {
            Expr::Num(c) => return Ok(*c),
            Expr::Pi => return Ok(std::f64::consts::PI),
            Expr::Var(Var::X) => return Ok(x),
            Expr::Var(Var::T) => return Ok(t),
            Expr::Var(Var::V) => return Ok(v),
            Expr::Neg(e) => return Ok(-e.eval(x, t, v)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(x, t, v)?;
                let b = r.eval(x, t, v)?;
                if *op == BinOp::Div && b == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                op.apply(a, b)
            }
            Expr::Call(f, e) => {
                let a = e.eval(x, t, v)?;
                match f {
                    Func::Log if a <= 0.0 => {
                        return Err(self.domain(&format!("log of non-positive value {a}")))
                    }
                    Func::Sqrt if a < 0.0 => {
                        return Err(self.domain(&format!("sqrt of negative value {a}")))
                    }
                    _ => f.apply(a),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn domain(&self, message: &str) -> ExprError {
        ExprError::Domain {
            expr: self.to_string(),
            message: message.to_string(),
        }
    }

    /// Partial derivative with respect to `var`, lightly simplified.
    pub fn diff(&self, var: Var) -> Result<Expr, ExprError> {
        if !self.depends_on(var) {
            return Ok(Expr::Num(0.0));
        }
        Ok(match self {
            Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => -e.diff(var)?,
            Expr::Binary(op, l, r) => {
                let (u, w) = (l.as_ref(), r.as_ref());
                match op {
                    BinOp::Add => u.diff(var)? + w.diff(var)?,
                    BinOp::Sub => u.diff(var)? - w.diff(var)?,
                    BinOp::Mul => u.diff(var)? * w.clone() + u.clone() * w.diff(var)?,
                    BinOp::Div => {
                        (u.diff(var)? * w.clone() - u.clone() * w.diff(var)?)
                            / w.clone().pow(Expr::Num(2.0))
                    }
                    BinOp::Pow => {
                        if !w.depends_on(var) {
                            let lowered = w.clone() - Expr::Num(1.0);
                            w.clone() * u.clone().pow(lowered) * u.diff(var)?
                        } else if !u.depends_on(var) {
                            self.clone() * Expr::call(Func::Log, u.clone()) * w.diff(var)?
                        } else {
                            self.clone()
                                * (w.diff(var)? * Expr::call(Func::Log, u.clone())
                                    + w.clone() * u.diff(var)? / u.clone())
                        }
                    }
                }
            }
            Expr::Call(f, e) => {
                let inner = e.as_ref().clone();
                let de = e.diff(var)?;
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => -Expr::call(Func::Sin, inner),
                    Func::Tan => Expr::Num(1.0) / Expr::call(Func::Cos, inner).pow(Expr::Num(2.0)),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::Num(1.0) / inner,
                    Func::Sqrt => Expr::Num(1.0) / (Expr::Num(2.0) * self.clone()),
                    Func::Tanh => Expr::Num(1.0) - self.clone().pow(Expr::Num(2.0)),
                    Func::Abs => {
                        return Err(ExprError::UnsupportedDerivative {
                            expr: self.to_string(),
                        })
                    }
                };
                outer * de
            }
        })
    }

    /// Replaces every occurrence of `var` by `replacement`.
    pub fn substitute(&self, var: Var, replacement: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => replacement.clone(),
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(var, replacement))),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(var, replacement))),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.substitute(var, replacement)),
                Box::new(r.substitute(var, replacement)),
            ),
        }
    }

    /// `f(self)` with constant folding.
    pub fn call(f: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_num() {
            let folded = f.apply(c);
            if folded.is_finite() && (f != Func::Log || c > 0.0) && (f != Func::Sqrt || c >= 0.0) {
                return Expr::Num(folded);
            }
        }
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_num(), exponent.as_num()) {
            let c = power(a, b);
            if c.is_finite() {
                return Expr::Num(c);
            }
        }
        if exponent.is_num(1.0) {
            return self;
        }
        if exponent.is_num(0.0) {
            return Expr::Num(1.0);
        }
        Expr::Binary(BinOp::Pow, Box::new(self), Box::new(exponent))
    }

    fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
        let (x, y) = (a.as_num()?, b.as_num()?);
        if op == BinOp::Div && y == 0.0 {
            return None;
        }
        let c = op.apply(x, y);
        c.is_finite().then_some(Expr::Num(c))
    }

    fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Add, &self, &rhs) {
            return e;
        }
        if self.is_num(0.0) {
            return rhs;
        }
        if rhs.is_num(0.0) {
            return self;
        }
        Expr::binary(BinOp::Add, self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Sub, &self, &rhs) {
            return e;
        }
        if rhs.is_num(0.0) {
            return self;
        }
        if self.is_num(0.0) {
            return -rhs;
        }
        Expr::binary(BinOp::Sub, self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Mul, &self, &rhs) {
            return e;
        }
        if self.is_num(0.0) || rhs.is_num(0.0) {
            return Expr::Num(0.0);
        }
        if self.is_num(1.0) {
            return rhs;
        }
        if rhs.is_num(1.0) {
            return self;
        }
        if self.is_num(-1.0) {
            return -rhs;
        }
        if rhs.is_num(-1.0) {
            return -self;
        }
        Expr::binary(BinOp::Mul, self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        if let Some(e) = Expr::fold(BinOp::Div, &self, &rhs) {
            return e;
        }
        if self.is_num(0.0) && !rhs.is_num(0.0) {
            return Expr::Num(0.0);
        }
        if rhs.is_num(1.0) {
            return self;
        }
        Expr::binary(BinOp::Div, self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(-c),
            Expr::Neg(e) => *e,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

impl FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

// Binding strength used by the printer; mirrors the parser's grammar levels.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(c) if c.is_sign_negative() => PREC_UNARY,
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_UNARY,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_SUM,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_PRODUCT,
            Expr::Binary(BinOp::Pow, ..) => PREC_POWER,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                match **e {
                    // A bare literal would fold into a negative number on re-parse.
                    Expr::Num(_) => e.write_at(f, PREC_ATOM + 1),
                    _ => e.write_at(f, PREC_UNARY),
                }
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.write_at(f, 0)?;
                write!(f, ")")
            }
            Expr::Binary(op, l, r) => {
                let (lmin, rmin) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_SUM, PREC_PRODUCT),
                    BinOp::Mul | BinOp::Div => (PREC_PRODUCT, PREC_UNARY),
                    BinOp::Pow => (PREC_ATOM, PREC_UNARY),
                };
                l.write_at(f, lmin)?;
                write!(f, "{}", op.symbol())?;
                r.write_at(f, rmin)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(c) => format!("number {c}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        match ch {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Token::Op(ch as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b',' => {
                out.push((i, Token::Comma));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((start, Token::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
            }
            _ => {
                let c = src[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    out.push((src.len(), Token::End));
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ExprError> {
        Ok(Parser {
            tokens: tokenize(src)?,
            pos: 0,
            depth: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        }
    }

    fn expect(&mut self, token: Token, expected: &str) -> Result<(), ExprError> {
        if *self.peek() == token {
            self.advance();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            Err(ExprError::Syntax {
                offset: self.offset(),
                message: format!("expression nested deeper than {MAX_NESTING} levels"),
            })
        } else {
            Ok(())
        }
    }

    fn parse_all(mut self) -> Result<Expr, ExprError> {
        let e = self.sum()?;
        if *self.peek() != Token::End {
            return Err(self.error("operator or end of input"));
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Token::Op('-') {
            self.advance();
            let literal = matches!(self.peek(), Token::Num(_));
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(match inner {
                Expr::Num(c) if literal => Expr::Num(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Token::Op('^') {
            self.advance();
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Token::Num(c) => {
                self.advance();
                Ok(Expr::Num(c))
            }
            Token::LParen => {
                self.advance();
                self.enter()?;
                let e = self.sum()?;
                self.depth -= 1;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => {
                self.advance();
                match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "v" => return Ok(Expr::Var(Var::V)),
                    "pi" => return Ok(Expr::Pi),
                    _ => {}
                }
                let func = Func::from_name(&name);
                if func.is_none() && name != "pow" {
                    return Err(ExprError::UnknownIdentifier { offset, name });
                }
                self.expect(Token::LParen, &format!("`(` after `{name}`"))?;
                self.enter()?;
                let first = self.sum()?;
                let result = match func {
                    Some(f) => Expr::Call(f, Box::new(first)),
                    None => {
                        self.expect(Token::Comma, "`,` in pow(base, exponent)")?;
                        let second = self.sum()?;
                        Expr::binary(BinOp::Pow, first, second)
                    }
                };
                self.depth -= 1;
                self.expect(Token::RParen, "`)`")?;
                Ok(result)
            }
            _ => Err(self.error("number, variable, function or `(`")),
        }
    }
}
