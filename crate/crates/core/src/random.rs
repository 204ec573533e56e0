//! Seeded generators of step functions, piecewise polynomials, elementary
//! sets and gauges on a uniform rational grid, for property checks.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::functions::{Piece, PiecewiseFunction};
use crate::interval_sets::{ElementarySet, Interval};
use crate::partitions::Gauge;
use crate::poly::Poly;
use crate::scalar::{Rational, Scalar};

/// Grid of `GRID` equal steps across the hull.
const GRID: u64 = 360;

fn small(rng: &mut (impl Rng + ?Sized)) -> Rational {
    Rational::new(rng.gen_range(-12i64..=12).into(), rng.gen_range(1i64..=4).into())
}

/// `k` distinct grid points strictly inside `(a, b)`, sorted.
pub fn grid_points(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational, k: usize) -> Vec<Rational> {
    let k = k.min(GRID as usize - 1);
    let mut idx: Vec<usize> = sample(rng, GRID as usize - 1, k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| grid_point(a, b, i as u64 + 1)).collect()
}

fn grid_point(a: &Rational, b: &Rational, i: u64) -> Rational {
    a + (b - a) * Rational::new(i.into(), GRID.into())
}

/// Grid point in `[a, b]`, ends included.
pub fn grid_point_closed(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational) -> Rational {
    grid_point(a, b, rng.gen_range(0..=GRID))
}

/// Point values agree with the left limit, the right limit, or neither.
fn point_value(rng: &mut (impl Rng + ?Sized), left: Option<&Rational>, right: Option<&Rational>) -> Rational {
    match (rng.gen_range(0..3), left, right) {
        (0, Some(l), _) => l.clone(),
        (1, _, Some(r)) => r.clone(),
        _ => small(rng),
    }
}

/// Step function on `[a, b]` with at most `max_jumps` interior breakpoints.
pub fn step_function(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational, max_jumps: usize) -> Result<PiecewiseFunction> {
    let m = rng.gen_range(0..=max_jumps);
    let mut bps = vec![a.clone()];
    bps.extend(grid_points(rng, a, b, m));
    bps.push(b.clone());
    let gaps: Vec<Rational> = (0..bps.len() - 1).map(|_| small(rng)).collect();
    let points = (0..bps.len())
        .map(|i| point_value(rng, i.checked_sub(1).map(|k| &gaps[k]), gaps.get(i)))
        .collect();
    PiecewiseFunction::step(bps, gaps, points)
}

pub fn polynomial(rng: &mut (impl Rng + ?Sized), max_degree: usize) -> Poly {
    let d = rng.gen_range(0..=max_degree);
    Poly::new((0..=d).map(|_| small(rng)).collect())
}

/// Piecewise polynomial with at most `max_breaks` interior breakpoints and
/// arbitrary point values there.
pub fn piecewise_polynomial(
    rng: &mut (impl Rng + ?Sized),
    a: &Rational,
    b: &Rational,
    max_breaks: usize,
    max_degree: usize,
) -> Result<PiecewiseFunction> {
    let m = rng.gen_range(0..=max_breaks);
    let mut bps = vec![a.clone()];
    bps.extend(grid_points(rng, a, b, m));
    bps.push(b.clone());
    let polys: Vec<Poly> = (0..bps.len() - 1).map(|_| polynomial(rng, max_degree)).collect();
    let values = (0..bps.len())
        .map(|i| {
            let left = i.checked_sub(1).map(|k| polys[k].eval(&bps[i]));
            let right = polys.get(i).map(|p| p.eval(&bps[i]));
            Scalar::Exact(point_value(rng, left.as_ref(), right.as_ref()))
        })
        .collect();
    PiecewiseFunction::new(bps, polys.into_iter().map(Piece::Poly).collect(), values)
}

/// Interval with grid ends in `[a, b]` and random end types; degenerate
/// draws give singletons.
pub fn interval(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational) -> Interval {
    let (x, y) = (grid_point_closed(rng, a, b), grid_point_closed(rng, a, b));
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if lo == hi {
        return Interval::singleton(lo);
    }
    Interval::new(lo, hi, rng.gen_bool(0.5), rng.gen_bool(0.5)).expect("lo < hi")
}

/// Union of up to `max_parts` random intervals and points.
pub fn elementary_set(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational, max_parts: usize) -> ElementarySet {
    let k = rng.gen_range(1..=max_parts.max(1));
    (0..k).fold(ElementarySet::empty(), |acc, _| {
        let part = if rng.gen_bool(0.2) {
            Interval::singleton(grid_point_closed(rng, a, b))
        } else {
            interval(rng, a, b)
        };
        acc.union(&ElementarySet::from_interval(part))
    })
}

/// Step gauge with up to `max_plateaus` plateaus of size `(b−a)·2^{-k}/3`
/// and up to `max_overrides` point overrides far below the plateaus.
pub fn gauge(rng: &mut (impl Rng + ?Sized), a: &Rational, b: &Rational, max_plateaus: usize, max_overrides: usize) -> Result<Gauge> {
    let m = rng.gen_range(1..=max_plateaus.max(1));
    let mut bps = vec![a.clone()];
    bps.extend(grid_points(rng, a, b, m - 1));
    bps.push(b.clone());
    let len = b - a;
    let scale = |k: u32| &len / Rational::from_integer((3u64 << k).into());
    let plateaus = (0..bps.len() - 1).map(|_| scale(rng.gen_range(0..8))).collect();
    let mut g = Gauge::step(bps, plateaus)?;
    for _ in 0..rng.gen_range(0..=max_overrides) {
        let at = grid_point_closed(rng, a, b);
        g = g.with_override(at, scale(rng.gen_range(8..14)))?;
    }
    Ok(g)
}
