//! A small arithmetic expression language for cost curves: parse, evaluate,
//! and numerically differentiate functions of one variable `x` with named
//! parameters.
//!
//! Grammar (recursive descent, `^` right-associative, unary minus allowed):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | identifier | '(' expr ')' | func '(' expr ')'
//! func   := exp | ln | sqrt | abs
//! ```
//!
//! Number literals are decimal (`1`, `0.875`, `1.5e-2`) and are kept as exact
//! rationals in the AST, so curves built from decimal text can be evaluated
//! exactly at rational arguments when no transcendental function or
//! fractional power is involved.

use crate::{CoreError, Rational, Result};
use num::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Built-in unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Decimal literal, stored exactly.
    Num(Rational),
    /// The free variable `x`.
    Var,
    /// A named parameter, bound via [`CostCurve::with_params`].
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

/// A cost curve: source text, parsed AST, and bound parameter values.
///
/// Invariant (checked by [`CostCurve::validate_unit_domain`]): evaluation is
/// total on `[0, 1]` — no NaN, infinity, or domain error on a 1001-point grid.
#[derive(Clone, Debug)]
pub struct CostCurve {
    source: String,
    ast: Arc<Expr>,
    params: BTreeMap<String, f64>,
}

impl PartialEq for CostCurve {
    fn eq(&self, other: &Self) -> bool {
        *self.ast == *other.ast && self.params == other.params
    }
}

impl fmt::Display for CostCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Parse an expression into a curve with no parameters bound.
///
/// Identifiers other than `x` are collected as free parameters; they must be
/// bound with [`CostCurve::with_params`] before evaluation (binding an
/// incomplete set, or evaluating with one unbound, is an
/// [`CoreError::UnknownIdentifier`]).
pub fn parse(text: &str) -> Result<CostCurve> {
    if text.trim().is_empty() {
        return Err(CoreError::Syntax {
            pos: 0,
            msg: "empty expression".to_string(),
        });
    }
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let ast = p.expr()?;
    if p.pos < p.tokens.len() {
        let (tok, at) = &p.tokens[p.pos];
        return Err(CoreError::Syntax {
            pos: *at,
            msg: format!("unexpected `{tok}` after expression"),
        });
    }
    Ok(CostCurve {
        source: text.to_string(),
        ast: Arc::new(ast),
        params: BTreeMap::new(),
    })
}

impl CostCurve {
    /// The original source text.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// The parsed expression tree.
    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Bound parameter values.
    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Identifiers used in the expression that are not `x`.
    pub fn free_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_params(&self.ast, &mut out);
        out
    }

    /// Bind parameter values. Every free identifier must be covered.
    pub fn with_params<I, S>(mut self, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        self.params = params.into_iter().map(|(k, v)| (k.into(), v)).collect();
        for name in self.free_params() {
            if !self.params.contains_key(&name) {
                return Err(CoreError::UnknownIdentifier { name });
            }
        }
        Ok(self)
    }

    /// Evaluate at `x` in IEEE double arithmetic.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = eval_f64(&self.ast, x, &self.params)?;
        if !v.is_finite() {
            return Err(CoreError::domain(format!(
                "non-finite value {v} at x = {x} in `{}`",
                self.source
            )));
        }
        Ok(v)
    }

    /// Evaluate exactly at a rational `x`, if the expression permits it
    /// (no transcendental functions, fractional powers, or parameters).
    ///
    /// `None` means "fall back to double evaluation", including the case of
    /// an exact division by zero.
    pub fn eval_exact(&self, x: &Rational) -> Option<Rational> {
        eval_exact(&self.ast, x)
    }

    /// Numeric derivative at `x` with step `h`: central difference
    /// `(f(x+h) − f(x−h)) / 2h`, falling back to a one-sided difference when
    /// one side is outside the expression's domain.
    pub fn derivative(&self, x: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(CoreError::invalid("derivative step must be positive"));
        }
        match (self.eval(x + h), self.eval(x - h)) {
            (Ok(fp), Ok(fm)) => Ok((fp - fm) / (2.0 * h)),
            (Ok(fp), Err(_)) => Ok((fp - self.eval(x)?) / h),
            (Err(_), Ok(fm)) => Ok((self.eval(x)? - fm) / h),
            (Err(e), Err(_)) => Err(e),
        }
    }

    /// Canonical printed form; parsing it back yields an identical AST.
    pub fn canonical(&self) -> String {
        print_expr(&self.ast, 0)
    }

    /// Check that evaluation is total on `[0, 1]` (1001-point grid).
    pub fn validate_unit_domain(&self) -> Result<()> {
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            self.eval(x).map_err(|e| {
                CoreError::invalid(format!(
                    "curve `{}` is not evaluable on [0,1]: {e} (at x = {x})",
                    self.source
                ))
            })?;
        }
        Ok(())
    }
}

fn collect_params(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Num(_) | Expr::Var => {}
        Expr::Param(name) => {
            out.insert(name.clone());
        }
        Expr::Neg(a) | Expr::Func(_, a) => collect_params(a, out),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            collect_params(a, out);
            collect_params(b, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(r) => write!(f, "{}", rational_decimal(r)),
            Token::Ident(s) => f.write_str(s),
            Token::Plus => f.write_str("+"),
            Token::Minus => f.write_str("-"),
            Token::Star => f.write_str("*"),
            Token::Slash => f.write_str("/"),
            Token::Caret => f.write_str("^"),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut frac_len = 0usize;
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac_len = i - fs;
                    if frac_len == 0 {
                        return Err(CoreError::Syntax {
                            pos: i,
                            msg: "expected digits after decimal point".to_string(),
                        });
                    }
                }
                let mantissa_end = i;
                let mut exp: i64 = 0;
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    // Only a valid exponent suffix counts; otherwise `e` starts
                    // an identifier (e.g. `2exp(x)` is a syntax error anyway).
                    let mut j = i + 1;
                    let mut sign = 1i64;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        if bytes[j] == b'-' {
                            sign = -1;
                        }
                        j += 1;
                    }
                    let ds = j;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j > ds {
                        let digits = std::str::from_utf8(&bytes[ds..j]).unwrap();
                        exp = sign
                            * digits.parse::<i64>().map_err(|_| CoreError::Syntax {
                                pos: ds,
                                msg: "exponent too large".to_string(),
                            })?;
                        i = j;
                    }
                }
                let mantissa: String = text[start..mantissa_end]
                    .chars()
                    .filter(|&ch| ch != '.')
                    .collect();
                let num: num::BigInt = mantissa.parse().map_err(|_| CoreError::Syntax {
                    pos: start,
                    msg: "bad number".to_string(),
                })?;
                let ten = num::BigInt::from(10u8);
                let shift = exp - frac_len as i64;
                let r = if shift >= 0 {
                    BigRational::from(num * ten.pow(shift as u32))
                } else {
                    BigRational::new(num, ten.pow((-shift) as u32))
                };
                out.push((Token::Num(r), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(CoreError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn at(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or_else(|| {
                self.tokens
                    .last()
                    .map(|(t, p)| p + t.to_string().len())
                    .unwrap_or(0)
            })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(CoreError::Syntax {
                pos: self.at(),
                msg: format!("expected `{want}`, found `{t}`"),
            }),
            None => Err(CoreError::Syntax {
                pos: self.at(),
                msg: format!("expected `{want}`, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            let exponent = self.factor()?; // right-associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let at = self.at();
        match self.bump() {
            Some(Token::Num(r)) => Ok(Expr::Num(r)),
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Token::LParen)?;
                    let inner = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(Expr::Func(func, Box::new(inner)))
                } else if name == "x" {
                    Ok(Expr::Var)
                } else {
                    Ok(Expr::Param(name))
                }
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(t) => Err(CoreError::Syntax {
                pos: at,
                msg: format!("expected a value, found `{t}`"),
            }),
            None => Err(CoreError::Syntax {
                pos: at,
                msg: "unexpected end of input".to_string(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn eval_f64(e: &Expr, x: f64, params: &BTreeMap<String, f64>) -> Result<f64> {
    Ok(match e {
        Expr::Num(r) => r.to_f64().unwrap_or(f64::NAN),
        Expr::Var => x,
        Expr::Param(name) => *params.get(name).ok_or_else(|| CoreError::UnknownIdentifier {
            name: name.clone(),
        })?,
        Expr::Neg(a) => -eval_f64(a, x, params)?,
        Expr::Add(a, b) => eval_f64(a, x, params)? + eval_f64(b, x, params)?,
        Expr::Sub(a, b) => eval_f64(a, x, params)? - eval_f64(b, x, params)?,
        Expr::Mul(a, b) => eval_f64(a, x, params)? * eval_f64(b, x, params)?,
        Expr::Div(a, b) => {
            let num = eval_f64(a, x, params)?;
            let den = eval_f64(b, x, params)?;
            if den == 0.0 {
                return Err(CoreError::domain(format!("division by zero at x = {x}")));
            }
            num / den
        }
        Expr::Pow(a, b) => {
            let base = eval_f64(a, x, params)?;
            let exp = eval_f64(b, x, params)?;
            pow_checked(base, exp, x)?
        }
        Expr::Func(f, a) => {
            let v = eval_f64(a, x, params)?;
            match f {
                Func::Exp => v.exp(),
                Func::Ln => {
                    if v <= 0.0 {
                        return Err(CoreError::domain(format!(
                            "ln of non-positive value {v} at x = {x}"
                        )));
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(CoreError::domain(format!(
                            "sqrt of negative value {v} at x = {x}"
                        )));
                    }
                    v.sqrt()
                }
                Func::Abs => v.abs(),
            }
        }
    })
}

fn pow_checked(base: f64, exp: f64, x: f64) -> Result<f64> {
    if base == 0.0 {
        if exp > 0.0 {
            return Ok(0.0);
        }
        if exp == 0.0 {
            return Ok(1.0); // 0^0 = 1 convention
        }
        return Err(CoreError::domain(format!(
            "zero raised to negative power {exp} at x = {x}"
        )));
    }
    if base < 0.0 {
        if exp.fract() == 0.0 && exp.abs() < 2f64.powi(31) {
            let p = base.abs().powf(exp);
            let odd = (exp as i64) % 2 != 0;
            return Ok(if odd { -p } else { p });
        }
        return Err(CoreError::domain(format!(
            "non-integer power {exp} of negative base {base} at x = {x}"
        )));
    }
    Ok(base.powf(exp))
}

fn eval_exact(e: &Expr, x: &Rational) -> Option<Rational> {
    match e {
        Expr::Num(r) => Some(r.clone()),
        Expr::Var => Some(x.clone()),
        Expr::Param(_) => None, // parameters are doubles; fall back
        Expr::Neg(a) => Some(-eval_exact(a, x)?),
        Expr::Add(a, b) => Some(eval_exact(a, x)? + eval_exact(b, x)?),
        Expr::Sub(a, b) => Some(eval_exact(a, x)? - eval_exact(b, x)?),
        Expr::Mul(a, b) => Some(eval_exact(a, x)? * eval_exact(b, x)?),
        Expr::Div(a, b) => {
            let den = eval_exact(b, x)?;
            if den.is_zero() {
                return None; // let the double path raise the domain error
            }
            Some(eval_exact(a, x)? / den)
        }
        Expr::Pow(a, b) => {
            let exp = eval_exact(b, x)?;
            if !exp.is_integer() {
                return None;
            }
            let exp = exp.to_integer().to_i64()?;
            if exp.abs() > 1000 {
                return None;
            }
            let base = eval_exact(a, x)?;
            if base.is_zero() {
                return match exp.cmp(&0) {
                    std::cmp::Ordering::Greater => Some(Rational::zero()),
                    std::cmp::Ordering::Equal => Some(Rational::from_integer(1.into())),
                    std::cmp::Ordering::Less => None,
                };
            }
            Some(base.pow(exp as i32))
        }
        Expr::Func(Func::Abs, a) => Some(eval_exact(a, x)?.abs()),
        Expr::Func(_, _) => None,
    }
}

// ---------------------------------------------------------------------------
// Canonical printing
// ---------------------------------------------------------------------------

/// Render a rational with a power-of-ten-smooth denominator as an exact
/// decimal string (parser literals always qualify).
fn rational_decimal(r: &Rational) -> String {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = num::BigInt::from(2u8);
    let five = num::BigInt::from(5u8);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den != 1.into() {
        // Not exactly printable as a decimal; fall back to a fraction.
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let ten = num::BigInt::from(10u8);
    let scaled = r.numer() * ten.pow(places) / r.denom();
    let neg = scaled < 0.into();
    let digits = scaled.abs().to_string();
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    if places == 0 {
        s.push_str(&digits);
        return s;
    }
    let places = places as usize;
    if digits.len() <= places {
        s.push_str("0.");
        s.push_str(&"0".repeat(places - digits.len()));
        s.push_str(&digits);
    } else {
        let split = digits.len() - places;
        s.push_str(&digits[..split]);
        s.push('.');
        s.push_str(&digits[split..]);
    }
    s
}

/// Print with enough parentheses that reparsing reproduces the AST.
/// `min_prec` is the binding strength required by the context.
fn print_expr(e: &Expr, min_prec: u8) -> String {
    let (prec, s) = match e {
        Expr::Num(r) => (5, rational_decimal(r)),
        Expr::Var => (5, "x".to_string()),
        Expr::Param(name) => (5, name.clone()),
        Expr::Func(f, a) => (5, format!("{}({})", f.name(), print_expr(a, 0))),
        Expr::Neg(a) => (3, format!("-{}", print_expr(a, 3))),
        Expr::Add(a, b) => (
            1,
            format!("{} + {}", print_expr(a, 1), print_expr(b, 2)),
        ),
        Expr::Sub(a, b) => (
            1,
            format!("{} - {}", print_expr(a, 1), print_expr(b, 2)),
        ),
        Expr::Mul(a, b) => (
            2,
            format!("{}*{}", print_expr(a, 2), print_expr(b, 3)),
        ),
        Expr::Div(a, b) => (
            2,
            format!("{}/{}", print_expr(a, 2), print_expr(b, 3)),
        ),
        Expr::Pow(a, b) => (
            4,
            format!("{}^{}", print_expr(a, 5), print_expr(b, 4)),
        ),
    };
    if prec < min_prec {
        format!("({s})")
    } else {
        s
    }
}
