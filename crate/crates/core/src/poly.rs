//! Dense polynomials with rational coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::scalar::{best_rational, fmt_rational, to_f64, Rational, Scalar};

/// Coefficients in ascending order; no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Rational) -> Self {
        Poly::new(vec![c])
    }

    pub fn identity() -> Self {
        Poly::new(vec![Rational::zero(), Rational::one()])
    }

    pub fn monomial(c: Rational, degree: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); degree + 1];
        coeffs[degree] = c;
        Poly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn constant_term(&self) -> Rational {
        self.coeffs.first().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + to_f64(c))
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rational::from_integer((k as i64).into()))
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Poly {
        let mut coeffs = vec![Rational::zero()];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / Rational::from_integer((k as i64 + 1).into())),
        );
        Poly::new(coeffs)
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Upper bound for `|p(t)|` on `|t| <= radius`.
    pub fn abs_bound(&self, radius: &Rational) -> Rational {
        let r = radius.abs();
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * &r + c.abs())
    }

    /// Real roots of odd multiplicity (sign changes) strictly inside `(lo, hi)`,
    /// in increasing order, as floats.
    pub fn sign_change_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        let coeffs: Vec<f64> = self.coeffs.iter().map(to_f64).collect();
        sign_changes(&coeffs, lo, hi)
    }

    /// Exact total variation on `[lo, hi]` when every sign change of `p'`
    /// inside the interval is at a rational point; a float estimate otherwise.
    pub fn variation(&self, lo: &Rational, hi: &Rational) -> Scalar {
        let d = self.derivative();
        let roots = d.sign_change_roots(to_f64(lo), to_f64(hi));
        let mut exact_nodes = vec![lo.clone()];
        let mut exact = true;
        for r in &roots {
            match best_rational(*r, 1_000_000).filter(|q| d.eval(q).is_zero() && q > lo && q < hi) {
                Some(q) => exact_nodes.push(q),
                None => {
                    exact = false;
                    break;
                }
            }
        }
        if exact {
            exact_nodes.push(hi.clone());
            let total = exact_nodes
                .windows(2)
                .fold(Rational::zero(), |acc, w| acc + (self.eval(&w[1]) - self.eval(&w[0])).abs());
            return Scalar::Exact(total);
        }
        let mut nodes = vec![to_f64(lo)];
        nodes.extend(roots);
        nodes.push(to_f64(hi));
        Scalar::Approx(nodes.windows(2).map(|w| (self.eval_f64(w[1]) - self.eval_f64(w[0])).abs()).sum())
    }
}

fn eval_coeffs(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

fn sign_changes(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let deg = match c.iter().rposition(|a| *a != 0.0) {
        Some(d) => d,
        None => return Vec::new(),
    };
    if deg == 0 {
        return Vec::new();
    }
    // monotone segments of p are delimited by sign changes of p'
    let dc: Vec<f64> = (1..=deg).map(|k| c[k] * k as f64).collect();
    let mut nodes = vec![lo];
    nodes.extend(sign_changes(&dc, lo, hi));
    nodes.push(hi);
    let mut roots = Vec::new();
    for w in nodes.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (eval_coeffs(c, a), eval_coeffs(c, b));
        if fa == 0.0 || fb == 0.0 || (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let sa = fa > 0.0;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (eval_coeffs(c, m) > 0.0) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Rational::zero();
        Poly::new(
            (0..n)
                .map(|k| self.coeffs.get(k).unwrap_or(&zero) + rhs.coeffs.get(k).unwrap_or(&zero))
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            }
            first = false;
            let mag_s = fmt_rational(&mag);
            match k {
                0 => f.write_str(&mag_s)?,
                _ => {
                    if !mag.is_one() {
                        write!(f, "{mag_s}*")?;
                    }
                    if k == 1 {
                        f.write_str("t")?;
                    } else {
                        write!(f, "t^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}
