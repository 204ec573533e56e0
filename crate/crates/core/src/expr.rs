//! Closed-form expressions in one variable `t`, used for function pieces and
//! for rational constants in literals.
//!
//! Grammar (usual precedence, `^` right-associative):
//! `expr := term (('+'|'-') term)*`, `term := unary (('*'|'/') unary)*`,
//! `unary := '-' unary | power`, `power := atom ('^' unary)?`,
//! `atom := number | t | pi | sin(expr) | cos(expr) | (expr)`.

use std::fmt;

use num_traits::{ToPrimitive, Zero};

use crate::error::ParseError;
use crate::poly::Poly;
use crate::scalar::{fmt_rational, parse_rational, to_f64, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Rational),
    Pi,
    T,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { src, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.err(format!("unexpected `{}`", &src[p.pos..])));
        }
        Ok(e)
    }

    pub fn from_poly(p: &Poly) -> Expr {
        let mut acc: Option<Expr> = None;
        for (k, c) in p.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = match k {
                0 => Expr::Const(c.clone()),
                _ => Expr::Mul(
                    Box::new(Expr::Const(c.clone())),
                    Box::new(Expr::Pow(Box::new(Expr::T), Box::new(Expr::Const(Rational::from_integer(k.into()))))),
                ),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::Add(Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or(Expr::Const(Rational::zero()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Const(c) => to_f64(c),
            Expr::Pi => std::f64::consts::PI,
            Expr::T => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => {
                let base = a.eval(t);
                match b.as_ref() {
                    Expr::Const(c) if c.is_integer() => match c.to_i32() {
                        Some(k) => base.powi(k),
                        None => base.powf(to_f64(c)),
                    },
                    _ => base.powf(b.eval(t)),
                }
            }
            Expr::Sin(a) => a.eval(t).sin(),
            Expr::Cos(a) => a.eval(t).cos(),
        }
    }

    /// Polynomial form, when the expression is a polynomial in `t` with
    /// rational coefficients.
    pub fn to_poly(&self) -> Option<Poly> {
        Some(match self {
            Expr::Const(c) => Poly::constant(c.clone()),
            Expr::T => Poly::identity(),
            Expr::Pi | Expr::Sin(_) | Expr::Cos(_) => return None,
            Expr::Neg(a) => -&a.to_poly()?,
            Expr::Add(a, b) => &a.to_poly()? + &b.to_poly()?,
            Expr::Sub(a, b) => &a.to_poly()? - &b.to_poly()?,
            Expr::Mul(a, b) => &a.to_poly()? * &b.to_poly()?,
            Expr::Div(a, b) => {
                let d = b.to_poly()?;
                if !d.is_constant() || d.is_zero() {
                    return None;
                }
                let inv = Rational::from_integer(1.into()) / d.constant_term();
                a.to_poly()?.scale(&inv)
            }
            Expr::Pow(a, b) => {
                let e = b.to_poly()?;
                if !e.is_constant() {
                    return None;
                }
                let e = e.constant_term();
                if !e.is_integer() || e < Rational::zero() {
                    return None;
                }
                let k = e.to_u32().filter(|k| *k <= 4096)?;
                let base = a.to_poly()?;
                let mut acc = Poly::constant(Rational::from_integer(1.into()));
                for _ in 0..k {
                    acc = &acc * &base;
                }
                acc
            }
        })
    }

    /// Exact value of a constant expression.
    pub fn to_rational(&self) -> Option<Rational> {
        Some(match self {
            Expr::Const(c) => c.clone(),
            Expr::T | Expr::Pi | Expr::Sin(_) | Expr::Cos(_) => return None,
            Expr::Neg(a) => -a.to_rational()?,
            Expr::Add(a, b) => a.to_rational()? + b.to_rational()?,
            Expr::Sub(a, b) => a.to_rational()? - b.to_rational()?,
            Expr::Mul(a, b) => a.to_rational()? * b.to_rational()?,
            Expr::Div(a, b) => {
                let d = b.to_rational()?;
                if d.is_zero() {
                    return None;
                }
                a.to_rational()? / d
            }
            Expr::Pow(a, b) => {
                let e = b.to_rational()?;
                let k = e.is_integer().then(|| e.to_integer().to_i32()).flatten().filter(|k| k.abs() <= 4096)?;
                let base = a.to_rational()?;
                if base.is_zero() && k < 0 {
                    return None;
                }
                num_traits::Pow::pow(base, k)
            }
        })
    }

    pub fn mentions_t(&self) -> bool {
        match self {
            Expr::T => true,
            Expr::Const(_) | Expr::Pi => false,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => a.mentions_t(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.mentions_t() || b.mentions_t()
            }
        }
    }

    pub fn scaled(self, c: &Rational) -> Expr {
        Expr::Mul(Box::new(Expr::Const(c.clone())), Box::new(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() && *c >= Rational::zero() {
                    f.write_str(&fmt_rational(c))
                } else {
                    write!(f, "({})", fmt_rational(c))
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::T => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Pow(a, b) => write!(f, "{a}^{b}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(msg, 0, 0).at(self.src, self.pos)
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                let rest = &self.src[start..];
                let mut len = rest.find(|ch: char| !(ch.is_ascii_digit() || ch == '.')).unwrap_or(rest.len());
                // exponent suffix such as 1e-9
                let tail = &rest[len..];
                if tail.starts_with(['e', 'E']) {
                    let after = &tail[1..];
                    let sign = usize::from(after.starts_with(['+', '-']));
                    let digits = after[sign..].find(|ch: char| !ch.is_ascii_digit()).unwrap_or(after.len() - sign);
                    if digits > 0 {
                        len += 1 + sign + digits;
                    }
                }
                let text = &rest[..len];
                self.pos += len;
                parse_rational(text).map(Expr::Const).map_err(|e| e.at(self.src, start))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let rest = &self.src[start..];
                let len = rest.find(|ch: char| !ch.is_ascii_alphanumeric() && ch != '_').unwrap_or(rest.len());
                let name = &rest[..len];
                self.pos += len;
                match name {
                    "t" => Ok(Expr::T),
                    "pi" => Ok(Expr::Pi),
                    "sin" | "cos" => {
                        if !self.eat('(') {
                            return Err(self.err(format!("expected `(` after {name}")));
                        }
                        let arg = self.expr()?;
                        if !self.eat(')') {
                            return Err(self.err("expected `)`"));
                        }
                        Ok(if name == "sin" { Expr::Sin(Box::new(arg)) } else { Expr::Cos(Box::new(arg)) })
                    }
                    _ => Err(ParseError::new(format!("unknown name `{name}`"), 0, 0).at(self.src, start)),
                }
            }
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn polynomial_expressions_reduce() {
        let e = Expr::parse("3/2*t^2 - t").unwrap();
        let p = e.to_poly().unwrap();
        assert_eq!(p.coeffs(), &[int(0), int(-1), rat(3, 2)]);
        assert_eq!(Expr::parse("(1/3)^2 + 1").unwrap().to_rational(), Some(rat(10, 9)));
        assert_eq!(Expr::parse("-2^2").unwrap().to_rational(), Some(int(-4)));
        assert_eq!(Expr::parse("1e-3").unwrap().to_rational(), Some(rat(1, 1000)));
    }

    #[test]
    fn transcendental_evaluation() {
        let e = Expr::parse("t^2*cos(pi/t^2)").unwrap();
        assert!(e.to_poly().is_none());
        assert_eq!(e.eval(1.0), -1.0);
        let g = Expr::parse("2*t*cos(pi/t^2) + (2*pi/t)*sin(pi/t^2)").unwrap();
        assert!((g.eval(1.0) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_positions() {
        let err = Expr::parse("t + foo").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
        assert!(Expr::parse("(t").is_err());
        assert!(Expr::parse("t t").is_err());
    }
}
