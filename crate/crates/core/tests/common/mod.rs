//! Reference values computed without the integration engines.
#![allow(dead_code)]

use gaugeks_core::{ElementarySet, PiecewiseFunction, Rational, Scalar};

/// Riemann-Stieltjes sum for a step function `f` on a partition whose only
/// non-constant cells are `[p−ε, p]` and `[p, p+ε]` around each breakpoint
/// `p` (and the ends `c`, `d`), all tagged at `p`. Every finer gauge-fine
/// partition with these tags gives the same sum, so this is the integral.
pub fn step_sum(f: &PiecewiseFunction, h: impl Fn(&Rational) -> Scalar, c: &Rational, d: &Rational) -> Scalar {
    let mut pts = vec![c.clone()];
    pts.extend(f.breakpoints().iter().filter(|x| *x > c && *x < d).cloned());
    pts.push(d.clone());
    let eps = pts.windows(2).map(|w| &w[1] - &w[0]).min().unwrap() / Rational::from_integer(4.into());
    let mut total = Scalar::zero();
    for p in &pts {
        let hp = h(p);
        if p > c {
            total = total + (f.eval(p) - f.eval(&(p - &eps))) * hp.clone();
        }
        if p < d {
            total = total + (f.eval(&(p + &eps)) - f.eval(p)) * hp;
        }
    }
    total
}

/// `∫_c^d [df] (g χ_S)` for a step function `f`, from membership and point values only.
pub fn step_sum_over(f: &PiecewiseFunction, g: &PiecewiseFunction, s: &ElementarySet) -> Scalar {
    step_sum(f, |t| if s.contains(t) { g.eval(t) } else { Scalar::zero() }, f.domain_lo(), f.domain_hi())
}

/// `∫_c^d [df] h` for continuous `f` and piecewise constant `h`: the values
/// of `h` at cell midpoints times the increments of `f` (telescoping).
pub fn telescoped(f: &PiecewiseFunction, h: impl Fn(&Rational) -> Scalar, cuts: &[Rational], c: &Rational, d: &Rational) -> Scalar {
    let mut pts = vec![c.clone()];
    pts.extend(cuts.iter().filter(|x| *x > c && *x < d).cloned());
    pts.push(d.clone());
    pts.sort();
    pts.dedup();
    let two = Rational::from_integer(2.into());
    pts.windows(2)
        .map(|w| h(&((&w[0] + &w[1]) / &two)) * (f.eval(&w[1]) - f.eval(&w[0])))
        .fold(Scalar::zero(), |a, b| a + b)
}

/// Sample points: every endpoint, every midpoint between consecutive
/// endpoints, and points just outside the range.
pub fn probe_points(mut ends: Vec<Rational>) -> Vec<Rational> {
    ends.sort();
    ends.dedup();
    let two = Rational::from_integer(2.into());
    let mut out = ends.clone();
    out.extend(ends.windows(2).map(|w| (&w[0] + &w[1]) / &two));
    if let (Some(lo), Some(hi)) = (ends.first(), ends.last()) {
        out.push(lo - Rational::from_integer(1.into()));
        out.push(hi + Rational::from_integer(1.into()));
    }
    out
}
