//! Closed sets described through a proper cover of their complement, and
//! the reconstruction `∫_hull = ∫_T + Σ ∫_{E_i}` with explicit truncation
//! bounds.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{Piece, PiecewiseFunction};
use crate::integrator::{integrate_grid, singleton_integral, Engine, IntegralResult, OracleConfig};
use crate::interval_sets::{ElementarySet, GridSet, Interval};
use crate::scalar::{fmt_rational, to_f64, Rational, Scalar};

/// How Cantor-like complements are enumerated: one removed interval per
/// element, or one whole generation per element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    Interval,
    Generation,
}

type Generator = Arc<dyn Fn(usize) -> ElementarySet + Send + Sync>;
type TailLength = Arc<dyn Fn(usize) -> Rational + Send + Sync>;
type Membership = Arc<dyn Fn(&Rational) -> Option<bool> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Finite(Vec<ElementarySet>),
    Cantor { ratio: Rational, grouping: Grouping },
    Custom { generator: Generator, total: Option<usize>, tail_length: Option<TailLength>, membership: Option<Membership>, null: bool },
}

/// `T = hull \ ∪ E_i` for pairwise disjoint elementary sets `E_1, E_2, …`.
#[derive(Clone)]
pub struct ClosedSetDescription {
    hull: Interval,
    source: Source,
}

impl fmt::Debug for ClosedSetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosedSetDescription({self})")
    }
}

impl fmt::Display for ClosedSetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Finite(cover) => {
                write!(f, "complement{{hull:{}, intervals:", self.hull)?;
                let mut first = true;
                for e in cover {
                    for c in e.components() {
                        write!(f, "{}{c}", if first { " " } else { ", " })?;
                        first = false;
                    }
                }
                write!(f, "}}")
            }
            Source::Cantor { ratio, grouping } => {
                write!(f, "cantor{{hull:{}, ratio:{}", self.hull, fmt_rational(ratio))?;
                if *grouping == Grouping::Interval {
                    write!(f, ", grouping:interval")?;
                }
                write!(f, "}}")
            }
            Source::Custom { .. } => write!(f, "custom{{hull:{}}}", self.hull),
        }
    }
}

impl ClosedSetDescription {
    /// Finitely many cover elements inside `hull`, checked pairwise.
    pub fn finite(hull: Interval, cover: Vec<ElementarySet>) -> Result<Self> {
        let hull_set = ElementarySet::from_interval(hull.clone());
        for e in &cover {
            if !e.is_subset_of(&hull_set) {
                return Err(Error::NotContained { set: e.to_string(), hull: hull.to_string() });
            }
        }
        check_disjoint(&cover, 0)?;
        Ok(ClosedSetDescription { hull, source: Source::Finite(cover) })
    }

    /// `T = hull`: the complement is empty.
    pub fn whole(hull: Interval) -> Self {
        ClosedSetDescription { hull, source: Source::Finite(Vec::new()) }
    }

    /// Removes the open middle part of relative length `ratio` from every
    /// remaining interval of `[lo, hi]`, level by level. Elements are whole
    /// generations; see [`Self::with_grouping`].
    pub fn cantor(lo: Rational, hi: Rational, ratio: Rational) -> Result<Self> {
        if ratio <= Rational::zero() || ratio >= Rational::one() {
            return Err(Error::InvalidInterval(format!("ratio {} outside (0,1)", fmt_rational(&ratio))));
        }
        if lo >= hi {
            return Err(Error::InvalidInterval(format!("empty hull [{},{}]", fmt_rational(&lo), fmt_rational(&hi))));
        }
        let hull = Interval::closed(lo, hi)?;
        Ok(ClosedSetDescription { hull, source: Source::Cantor { ratio, grouping: Grouping::Generation } })
    }

    pub fn with_grouping(mut self, grouping: Grouping) -> Self {
        if let Source::Cantor { grouping: g, .. } = &mut self.source {
            *g = grouping;
        }
        self
    }

    /// Cover given by a rule `i ↦ E_i` (`i ≥ 1`); the caller vouches for
    /// disjointness, which is spot-checked by [`proper_cover`].
    pub fn custom(hull: Interval, generator: impl Fn(usize) -> ElementarySet + Send + Sync + 'static) -> Self {
        ClosedSetDescription {
            hull,
            source: Source::Custom {
                generator: Arc::new(generator),
                total: None,
                tail_length: None,
                membership: None,
                null: false,
            },
        }
    }

    pub fn with_total(mut self, n: usize) -> Self {
        if let Source::Custom { total, .. } = &mut self.source {
            *total = Some(n);
        }
        self
    }

    /// `N ↦ Σ_{i>N} length(E_i)` in closed form.
    pub fn with_tail_length(mut self, rule: impl Fn(usize) -> Rational + Send + Sync + 'static) -> Self {
        if let Source::Custom { tail_length, .. } = &mut self.source {
            *tail_length = Some(Arc::new(rule));
        }
        self
    }

    /// Membership test for `T` (`None` when undecided) and whether `T` has
    /// zero length.
    pub fn with_membership(mut self, rule: impl Fn(&Rational) -> Option<bool> + Send + Sync + 'static, null_set: bool) -> Self {
        if let Source::Custom { membership, null, .. } = &mut self.source {
            *membership = Some(Arc::new(rule));
            *null = null_set;
        }
        self
    }

    pub fn hull(&self) -> &Interval {
        &self.hull
    }

    pub fn grouping(&self) -> Option<Grouping> {
        match &self.source {
            Source::Cantor { grouping, .. } => Some(*grouping),
            _ => None,
        }
    }

    /// Number of nonempty cover elements when finite.
    pub fn total_count(&self) -> Option<usize> {
        match &self.source {
            Source::Finite(cover) => Some(cover.len()),
            Source::Cantor { .. } => None,
            Source::Custom { total, .. } => *total,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total_count().is_some()
    }

    /// `E_i` for `i ≥ 1`; empty past the end of a finite cover.
    pub fn element(&self, i: usize) -> ElementarySet {
        assert!(i >= 1, "cover elements are indexed from 1");
        match &self.source {
            Source::Finite(cover) => cover.get(i - 1).cloned().unwrap_or_default(),
            Source::Cantor { ratio, grouping: Grouping::Interval } => {
                ElementarySet::from_interval(cantor_interval(&self.hull, ratio, i))
            }
            Source::Cantor { ratio, grouping: Grouping::Generation } => {
                cantor_generations(&self.hull, ratio, i).pop().unwrap_or_default()
            }
            Source::Custom { generator, total, .. } => match total {
                Some(t) if i > *t => ElementarySet::empty(),
                _ => generator(i),
            },
        }
    }

    /// `E_1, …, E_n`, truncated to the total count of a finite cover.
    pub fn elements(&self, n: usize) -> Vec<ElementarySet> {
        let n = self.total_count().map_or(n, |t| n.min(t));
        match &self.source {
            Source::Cantor { ratio, grouping: Grouping::Generation } => cantor_generations(&self.hull, ratio, n),
            _ => (1..=n).into_par_iter().map(|i| self.element(i)).collect(),
        }
    }

    /// `Σ_{i>n} length(E_i)` when known in closed form.
    pub fn tail_length(&self, n: usize) -> Option<Rational> {
        match &self.source {
            Source::Finite(cover) => Some(cover.iter().skip(n).map(|e| e.length()).sum()),
            Source::Cantor { ratio, grouping } => {
                let len = self.hull.length();
                let keep = Rational::one() - ratio;
                let pow = |k: usize| -> Rational { num_traits::pow(keep.clone(), k) };
                match grouping {
                    Grouping::Generation => Some(len * pow(n)),
                    Grouping::Interval => {
                        // generations before k are complete; the first j of generation k are removed
                        let k = usize::BITS as usize - (n + 1).leading_zeros() as usize;
                        let j = n + 1 - (1usize << (k - 1));
                        let one_removed = &len * ratio * pow(k - 1) / Rational::from_integer(BigInt::from(1u64) << (k - 1));
                        Some(len * pow(k - 1) - one_removed * Rational::from_integer(j.into()))
                    }
                }
            }
            Source::Custom { tail_length, total, .. } => match (tail_length, total) {
                (Some(rule), _) => Some(rule(n)),
                (None, Some(t)) if n >= *t => Some(Rational::zero()),
                _ => None,
            },
        }
    }

    /// Whether `t ∈ T`; `None` when the description cannot decide.
    pub fn contains(&self, t: &Rational) -> Option<bool> {
        if !self.hull.contains(t) {
            return Some(false);
        }
        match &self.source {
            Source::Finite(cover) => Some(!cover.iter().any(|e| e.contains(t))),
            Source::Cantor { ratio, .. } => cantor_contains(&self.hull, ratio, t),
            Source::Custom { membership, .. } => membership.as_ref().and_then(|m| m(t)),
        }
    }

    /// Whether `T` has zero length, when known.
    pub fn is_null(&self) -> Option<bool> {
        match &self.source {
            Source::Finite(_) => self.as_elementary().map(|t| t.length().is_zero()),
            Source::Cantor { .. } => Some(true),
            Source::Custom { null, .. } => null.then_some(true),
        }
    }

    /// `T` itself when the complement description is finite.
    pub fn as_elementary(&self) -> Option<ElementarySet> {
        let hull_set = ElementarySet::from_interval(self.hull.clone());
        match &self.source {
            Source::Finite(cover) => Some(cover.iter().fold(hull_set, |acc, e| acc.difference(e))),
            Source::Custom { total: Some(t), .. } => {
                Some((1..=*t).fold(hull_set, |acc, i| acc.difference(&self.element(i))))
            }
            _ => None,
        }
    }
}

fn check_disjoint(cover: &[ElementarySet], offset: usize) -> Result<()> {
    let mut comps: Vec<(&Interval, usize)> = cover
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.components().iter().map(move |c| (c, i + 1 + offset)))
        .collect();
    comps.sort_by(|a, b| a.0.lo().cmp(b.0.lo()));
    for w in comps.windows(2) {
        if w[0].0.intersects(w[1].0) {
            let (i, j) = (w[0].1.min(w[1].1), w[0].1.max(w[1].1));
            return Err(Error::GeneratorOverlap(i, j));
        }
    }
    Ok(())
}

const SPOT_CHECK: usize = 4096;

/// The first `n` cover elements. Finite and explicit covers are checked
/// pairwise; generated covers on their first elements up to a component
/// budget.
pub fn proper_cover(t: &ClosedSetDescription, n: usize) -> Result<Vec<ElementarySet>> {
    if n == 0 {
        return Err(Error::InsufficientData("a cover needs at least one element".into()));
    }
    let elems = t.elements(n);
    match &t.source {
        Source::Finite(_) => {}
        _ => {
            let mut budget = 0;
            let upto = elems
                .iter()
                .take_while(|e| {
                    budget += e.len();
                    budget <= SPOT_CHECK
                })
                .count();
            check_disjoint(&elems[..upto.max(1).min(elems.len())], 0)?;
        }
    }
    Ok(elems)
}

/// Removed interval number `i` in level order, left to right.
fn cantor_interval(hull: &Interval, ratio: &Rational, i: usize) -> Interval {
    let k = usize::BITS as usize - i.leading_zeros() as usize;
    let j = i - (1usize << (k - 1));
    let two = Rational::from_integer(2.into());
    let s = (Rational::one() - ratio) / &two;
    let mut x = hull.lo().clone();
    let mut len = hull.length();
    for m in (0..k - 1).rev() {
        if (j >> m) & 1 == 1 {
            x += &len * (Rational::one() - &s);
        }
        len *= &s;
    }
    Interval::open_unchecked(&x + &len * &s, &x + &len * (Rational::one() - &s))
}

/// Generations `1..=n`, each a sorted set of `2^{k-1}` open intervals.
fn cantor_generations(hull: &Interval, ratio: &Rational, n: usize) -> Vec<ElementarySet> {
    match cantor_grids(hull, ratio, n) {
        Some(grids) => grids.iter().map(GridSet::to_set).collect(),
        None => cantor_generations_exact(hull, ratio, n),
    }
}

/// Integer numerators over the common denominator `d0·(2q)^k` at level `k`,
/// with `ratio = p/q`.
fn cantor_grids(hull: &Interval, ratio: &Rational, n: usize) -> Option<Vec<GridSet>> {
    let d0 = hull.lo().denom().lcm(hull.hi().denom());
    let a = (hull.lo().numer() * (&d0 / hull.lo().denom())).to_i128()?;
    let b = (hull.hi().numer() * (&d0 / hull.hi().denom())).to_i128()?;
    let (p, q) = (ratio.numer().to_i128()?, ratio.denom().to_i128()?);
    let (u, w, v) = (2 * q, q - p, q + p);
    let len = b - a;
    let mut den = d0.to_i128()?;
    let mut lefts = vec![a];
    let mut wk: i128 = 1;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        den = den.checked_mul(u)?;
        let off_hi = len.checked_mul(wk)?.checked_mul(v)?;
        wk = wk.checked_mul(w)?;
        let off_lo = len.checked_mul(wk)?;
        let mut comps = Vec::with_capacity(lefts.len());
        let mut next = Vec::with_capacity(if k < n { 2 * lefts.len() } else { 0 });
        for x in &lefts {
            let base = x.checked_mul(u)?;
            let hi = base.checked_add(off_hi)?;
            comps.push((base.checked_add(off_lo)?, hi));
            if k < n {
                next.push(base);
                next.push(hi);
            }
        }
        out.push(GridSet { den, comps });
        lefts = next;
    }
    Some(out)
}

fn cantor_generations_exact(hull: &Interval, ratio: &Rational, n: usize) -> Vec<ElementarySet> {
    let s = (Rational::one() - ratio) / Rational::from_integer(2.into());
    let mut lefts = vec![hull.lo().clone()];
    let mut len = hull.length();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let lo_off = &len * &s;
        let hi_off = &len - &lo_off;
        let comps: Vec<Interval> = lefts.iter().map(|x| Interval::open_unchecked(x + &lo_off, x + &hi_off)).collect();
        lefts = lefts.iter().flat_map(|x| [x.clone(), x + &hi_off]).collect();
        len = lo_off;
        out.push(ElementarySet::from_sorted_unchecked(comps));
    }
    out
}

/// Follows `t` through the two similarity maps; a repeated state means `t`
/// never enters a removed interval.
fn cantor_contains(hull: &Interval, ratio: &Rational, t: &Rational) -> Option<bool> {
    let s = (Rational::one() - ratio) / Rational::from_integer(2.into());
    let upper = Rational::one() - &s;
    let mut x = (t - hull.lo()) / hull.length();
    let mut seen = HashSet::new();
    for _ in 0..512 {
        if !seen.insert(x.clone()) {
            return Some(true);
        }
        x = if x <= s {
            &x / &s
        } else if x >= upper {
            (&x - &upper) / &s
        } else {
            return Some(false);
        };
    }
    None
}

/// Outcome of a truncated reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct HarnackReport {
    /// `∫` over the hull.
    pub total: IntegralResult,
    pub on_t: IntegralResult,
    /// `Σ_{i≤N} ∫_{E_i}` in index order.
    pub series_partial: Scalar,
    pub terms: Vec<Scalar>,
    pub terms_used: usize,
    /// Bound on `|Σ_{i>N} ∫_{E_i}|`; `None` when no estimate is available.
    pub tail_bound: Option<Scalar>,
    pub identity_residual: Scalar,
    pub consistent: bool,
}

impl HarnackReport {
    /// The report, or `TailUnbounded` when the truncation error is unknown.
    pub fn checked(&self) -> Result<&Self> {
        match self.tail_bound {
            Some(_) => Ok(self),
            None => Err(Error::TailUnbounded),
        }
    }
}

/// The first cover elements, kept as integer grids for Cantor generations.
enum Head {
    Sets(Vec<ElementarySet>),
    Grids(Vec<GridSet>),
}

impl Head {
    fn new(t: &ClosedSetDescription, n: usize) -> Head {
        if let Source::Cantor { ratio, grouping: Grouping::Generation } = &t.source {
            if let Some(grids) = cantor_grids(&t.hull, ratio, n) {
                return Head::Grids(grids);
            }
        }
        Head::Sets(t.elements(n))
    }

    fn len(&self) -> usize {
        match self {
            Head::Sets(v) => v.len(),
            Head::Grids(v) => v.len(),
        }
    }

    fn contains(&self, tau: &Rational) -> bool {
        match self {
            Head::Sets(v) => v.iter().any(|e| e.contains(tau)),
            Head::Grids(v) => v.iter().any(|e| e.contains(tau)),
        }
    }

    /// `∫_{E_i ∩ within}` for each element, in index order.
    fn integrals(
        &self,
        engine: &Engine,
        f: &PiecewiseFunction,
        g: &PiecewiseFunction,
        within: Option<&ElementarySet>,
    ) -> Result<Vec<IntegralResult>> {
        let one = |e: &ElementarySet| match within {
            Some(w) => engine.elementary(f, g, &e.intersect(w)),
            None => engine.elementary(f, g, e),
        };
        match self {
            Head::Sets(v) => v.par_iter().map(one).collect(),
            Head::Grids(v) => v
                .par_iter()
                .map(|grid| match (within, integrate_grid(f, g, grid)) {
                    (None, Ok(Some(value))) => Ok(IntegralResult::closed(value)),
                    _ => one(&grid.to_set()),
                })
                .collect(),
        }
    }
}

fn hull_domain_check(f: &PiecewiseFunction, g: &PiecewiseFunction, t: &ClosedSetDescription) -> Result<()> {
    if !f.same_domain(g) {
        return Err(Error::DomainMismatch("f and g live on different intervals".into()));
    }
    if t.hull.lo() < f.domain_lo() || t.hull.hi() > f.domain_hi() {
        return Err(Error::SetOutsideDomain {
            set: t.hull.to_string(),
            lo: fmt_rational(f.domain_lo()),
            hi: fmt_rational(f.domain_hi()),
        });
    }
    Ok(())
}

fn sum_results(parts: &[IntegralResult]) -> IntegralResult {
    parts.iter().cloned().fold(IntegralResult::zero(), IntegralResult::plus)
}

/// `∫_T [df] g`: directly for a finite complement; for a null `T` only the
/// jumps of `f` at points of `T` contribute.
fn integral_on_t(engine: &Engine, f: &PiecewiseFunction, g: &PiecewiseFunction, t: &ClosedSetDescription) -> Result<IntegralResult> {
    if let Some(set) = t.as_elementary() {
        return engine.elementary(f, g, &set);
    }
    if t.is_null() != Some(true) {
        return Err(Error::InsufficientData(format!("no route to the integral over {t}")));
    }
    let mut parts = Vec::new();
    for tau in f.breakpoints() {
        match t.contains(tau) {
            Some(true) => parts.push(singleton_integral(f, g, tau)?),
            Some(false) => {}
            None => {
                return Err(Error::InsufficientData(format!("membership of {} in {t} undecided", fmt_rational(tau))))
            }
        }
    }
    Ok(sum_results(&parts))
}

/// `sup|g|·(Lip(f)·tail_length + Σ|one-sided jumps of f off the first N elements|)`.
fn tail_estimate(f: &PiecewiseFunction, g: &PiecewiseFunction, t: &ClosedSetDescription, head: &Head, n: usize) -> Option<Scalar> {
    if t.total_count().is_some_and(|c| n >= c) {
        return Some(Scalar::zero());
    }
    let len = t.tail_length(n)?;
    let lip = f.lipschitz_bound()?;
    let sup = g.sup_abs_bound()?;
    let mut jumps = Scalar::zero();
    for tau in f.breakpoints() {
        if !t.hull.contains(tau) || head.contains(tau) {
            continue;
        }
        jumps = jumps + f.jump_minus(tau).ok()?.abs() + f.jump_plus(tau).ok()?.abs();
    }
    Some(Scalar::from(sup) * (Scalar::from(lip * len) + jumps))
}

/// Reconstruction over the first `n` cover elements.
pub fn harnack_assemble(f: &PiecewiseFunction, g: &PiecewiseFunction, t: &ClosedSetDescription, n: usize, tol: f64) -> Result<HarnackReport> {
    hull_domain_check(f, g, t)?;
    let engine = Engine::Auto(OracleConfig::with_tol(tol));
    let total = engine.elementary(f, g, &ElementarySet::from_interval(t.hull.clone()))?;
    let head = Head::new(t, n);
    let parts = head.integrals(&engine, f, g, None)?;
    let series = sum_results(&parts);
    let on_t = integral_on_t(&engine, f, g, t)?;
    let tail_bound = match t.total_count() {
        // the remainder itself is computable
        Some(c) if c > head.len() => {
            let rest: Vec<IntegralResult> =
                (head.len() + 1..=c).into_par_iter().map(|i| engine.elementary(f, g, &t.element(i))).collect::<Result<_>>()?;
            Some(sum_results(&rest).value.abs())
        }
        _ => tail_estimate(f, g, t, &head, n),
    };
    let residual = (&total.value - &on_t.value - &series.value).abs();
    let consistent = tail_bound.as_ref().is_some_and(|tb| {
        let slack = total.error_bound + on_t.error_bound + series.error_bound;
        if slack == 0.0 && residual.is_exact() && tb.is_exact() {
            residual <= *tb
        } else {
            residual.to_f64() <= tb.to_f64() + slack + 1e-12 * (1.0 + total.value.to_f64().abs())
        }
    });
    Ok(HarnackReport {
        total,
        on_t,
        series_partial: series.value,
        terms: parts.into_iter().map(|p| p.value).collect(),
        terms_used: head.len(),
        tail_bound,
        identity_residual: residual,
        consistent,
    })
}

/// `∫_T = ∫_E − Σ_{i≤N} ∫_{E_i ∩ E}` plus the singletons of `T` on the
/// boundary of `E`. The truncation bound goes into `error_bound`.
pub fn harnack_extract_t(
    f: &PiecewiseFunction,
    g: &PiecewiseFunction,
    e: &ElementarySet,
    t: &ClosedSetDescription,
    n: usize,
    tol: f64,
) -> Result<IntegralResult> {
    hull_domain_check(f, g, t)?;
    let hull_set = ElementarySet::from_interval(t.hull.clone());
    if !e.is_subset_of(&hull_set) {
        return Err(Error::NotContained { set: e.to_string(), hull: t.hull.to_string() });
    }
    if let Some(ts) = t.as_elementary() {
        let closure = e
            .components()
            .iter()
            .fold(ElementarySet::empty(), |acc, c| acc.union(&ElementarySet::from_interval(c.closure())));
        if !ts.is_subset_of(&closure) {
            return Err(Error::NotContained { set: ts.to_string(), hull: closure.to_string() });
        }
    }
    let engine = Engine::Auto(OracleConfig::with_tol(tol));
    let whole = engine.elementary(f, g, e)?;
    let head = Head::new(t, n);
    let within = if hull_set.is_subset_of(e) { None } else { Some(e) };
    let parts = head.integrals(&engine, f, g, within)?;
    let mut value = whole.minus(sum_results(&parts));
    for tau in e.endpoints() {
        if e.contains(&tau) {
            continue;
        }
        match t.contains(&tau) {
            Some(true) => value = value.plus(singleton_integral(f, g, &tau)?),
            Some(false) => {}
            None => return Err(Error::InsufficientData(format!("membership of {} undecided", fmt_rational(&tau)))),
        }
    }
    let tail = match t.total_count() {
        Some(c) if c > head.len() => {
            let rest: Vec<IntegralResult> = (head.len() + 1..=c)
                .into_par_iter()
                .map(|i| engine.elementary(f, g, &t.element(i).intersect(e)))
                .collect::<Result<_>>()?;
            value = value.minus(sum_results(&rest));
            Scalar::zero()
        }
        _ => tail_estimate(f, g, t, &head, n).ok_or(Error::TailUnbounded)?,
    };
    if !tail.is_zero() {
        value.exact = false;
        value.error_bound += tail.to_f64();
    }
    Ok(value)
}

/// Partial sums of `Σ_i sup{|∫_r^s g dt| : r ≤ s in E_i}` for `i ≤ n`,
/// per component of each element. Polynomial pieces use exact critical
/// points; pieces with a known primitive are sampled on a fine grid.
pub fn kh_sup_series(g: &PiecewiseFunction, t: &ClosedSetDescription, n: usize) -> Result<Vec<f64>> {
    let head = t.elements(n);
    let terms: Vec<f64> = head
        .par_iter()
        .map(|e| e.components().iter().map(|c| oscillation(g, c.lo(), c.hi())).sum::<Result<f64>>())
        .collect::<Result<_>>()?;
    Ok(terms
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect())
}

const PRIMITIVE_SAMPLES: usize = 256;

/// `max G − min G` on `[lo, hi]` for `G(s) = ∫_lo^s g dt`.
fn oscillation(g: &PiecewiseFunction, lo: &Rational, hi: &Rational) -> Result<f64> {
    let bps = g.breakpoints();
    let mut nodes = vec![lo.clone()];
    nodes.extend(bps.iter().filter(|x| *x > lo && *x < hi).cloned());
    nodes.push(hi.clone());
    let two = Rational::from_integer(2.into());
    let (mut level, mut max, mut min) = (0.0f64, 0.0f64, 0.0f64);
    for w in nodes.windows(2) {
        let (x0, x1) = (to_f64(&w[0]), to_f64(&w[1]));
        let piece = g.piece_at(&((&w[0] + &w[1]) / &two));
        let prim = |s: f64| -> Result<f64> {
            match piece {
                Piece::Poly(p) => Ok(p.antiderivative().eval_f64(s)),
                Piece::Expr(_) => {
                    let q = piece.primitive().ok_or_else(|| Error::UnsupportedClass("expression piece without primitive".into()))?;
                    let v = q.eval(s);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::InvalidFunction(format!("primitive not finite at {s}")))
                    }
                }
            }
        };
        let base = prim(x0)?;
        let mut probe: Vec<f64> = match piece {
            Piece::Poly(p) => p.sign_change_roots(x0, x1),
            Piece::Expr(_) => (1..PRIMITIVE_SAMPLES).map(|k| x0 + (x1 - x0) * k as f64 / PRIMITIVE_SAMPLES as f64).collect(),
        };
        probe.push(x1);
        for s in probe {
            let v = level + prim(s)? - base;
            max = max.max(v);
            min = min.min(v);
        }
        level += prim(x1)? - base;
    }
    Ok(max - min)
}

/// Reconstruction with `f(t) = t` together with the sup-series.
#[derive(Clone, Debug, PartialEq)]
pub struct KhReport {
    pub report: HarnackReport,
    pub sup_partials: Vec<f64>,
}

pub fn classical_kh_harnack(g: &PiecewiseFunction, t: &ClosedSetDescription, n: usize, tol: f64) -> Result<KhReport> {
    let f = PiecewiseFunction::identity(g.domain_lo().clone(), g.domain_hi().clone())?;
    let report = harnack_assemble(&f, g, t, n, tol)?;
    let sup_partials = kh_sup_series(g, t, n)?;
    Ok(KhReport { report, sup_partials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn open(a: Rational, b: Rational) -> ElementarySet {
        ElementarySet::from_interval(Interval::open(a, b).unwrap())
    }

    fn unit() -> Interval {
        Interval::closed(int(0), int(1)).unwrap()
    }

    #[test]
    fn cover_examples() {
        let cantor = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap().with_grouping(Grouping::Interval);
        let c = proper_cover(&cantor, 3).unwrap();
        assert_eq!(c, vec![open(rat(1, 3), rat(2, 3)), open(rat(1, 9), rat(2, 9)), open(rat(7, 9), rat(8, 9))]);
        let ends = ClosedSetDescription::finite(unit(), vec![open(int(0), int(1))]).unwrap();
        assert_eq!(proper_cover(&ends, 5).unwrap().len(), 1);
        assert!(proper_cover(&ClosedSetDescription::whole(unit()), 4).unwrap().is_empty());
        let bad = ClosedSetDescription::finite(unit(), vec![open(int(0), rat(1, 2)), open(rat(1, 4), int(1))]);
        assert!(matches!(bad, Err(Error::GeneratorOverlap(1, 2))));
    }

    #[test]
    fn cantor_generations_agree_with_level_order() {
        let t = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap();
        let by_interval = t.clone().with_grouping(Grouping::Interval);
        let gens = t.elements(4);
        let mut i = 1;
        for (k, gen) in gens.iter().enumerate() {
            assert_eq!(gen.len(), 1 << k);
            for c in gen.components() {
                assert_eq!(by_interval.element(i).components()[0], *c);
                i += 1;
            }
        }
        assert_eq!(cantor_generations_exact(t.hull(), &rat(1, 3), 4), gens);
        assert_eq!(t.tail_length(3), Some(rat(8, 27)));
        assert_eq!(by_interval.tail_length(3), Some(rat(4, 9)));
        assert_eq!(by_interval.tail_length(2), Some(rat(5, 9)));
    }

    #[test]
    fn cantor_membership() {
        let t = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap();
        for (x, inside) in [(rat(1, 4), true), (rat(1, 2), false), (rat(1, 3), true), (rat(3, 4), true), (rat(5, 27), false)] {
            assert_eq!(t.contains(&x), Some(inside), "{x}");
        }
    }

    #[test]
    fn assemble_examples() {
        let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
        let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
        let cantor = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap();
        let r = harnack_assemble(&id, &one, &cantor, 6, 1e-9).unwrap();
        let tail = num_traits::pow(rat(2, 3), 6);
        assert_eq!(r.total.value, Scalar::one());
        assert_eq!(r.on_t.value, Scalar::zero());
        assert_eq!(r.series_partial, Scalar::from(Rational::one() - &tail));
        assert_eq!(r.tail_bound, Some(Scalar::from(tail.clone())));
        assert_eq!(r.identity_residual, Scalar::from(tail));
        assert!(r.consistent);

        let whole = ClosedSetDescription::whole(unit());
        let r = harnack_assemble(&id, &id, &whole, 3, 1e-9).unwrap();
        assert_eq!(r.total.value, r.on_t.value);
        assert_eq!(r.series_partial, Scalar::zero());
    }

    #[test]
    fn extraction_examples() {
        let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
        let e = ElementarySet::from_interval(unit());
        let thirds = ClosedSetDescription::finite(unit(), vec![open(rat(1, 3), rat(2, 3))]).unwrap();
        let r = harnack_extract_t(&id, &id, &e, &thirds, 1, 1e-9).unwrap();
        assert_eq!(r.value, Scalar::from(rat(1, 3)));
        assert!(r.exact);

        let f = PiecewiseFunction::step(vec![int(0), rat(2, 5), int(1)], vec![int(0), int(3)], vec![int(0), int(1), int(3)]).unwrap();
        let point = ClosedSetDescription::finite(
            unit(),
            vec![
                ElementarySet::from_interval(Interval::closed_open(int(0), rat(2, 5)).unwrap()),
                ElementarySet::from_interval(Interval::open_closed(rat(2, 5), int(1)).unwrap()),
            ],
        )
        .unwrap();
        let r = harnack_extract_t(&f, &id, &e, &point, 2, 1e-9).unwrap();
        assert_eq!(r.value, singleton_integral(&f, &id, &rat(2, 5)).unwrap().value);

        let inner = Interval::open(rat(1, 4), rat(3, 4)).unwrap();
        let closure = ClosedSetDescription::whole(inner.closure());
        let r = harnack_extract_t(&f, &id, &ElementarySet::from_interval(inner.clone()), &closure, 1, 1e-9).unwrap();
        let closed = crate::integrator::integrate_over_set(&f, &id, &ElementarySet::from_interval(inner.closure())).unwrap();
        assert_eq!(r.value, closed.value);
    }

    #[test]
    fn sup_series_of_polynomials() {
        // ∫ (t - 1/2) over (0,1): primitive dips to -1/8 at 1/2 and returns to 0
        let g = PiecewiseFunction::polynomial(int(0), int(1), crate::poly::Poly::new(vec![rat(-1, 2), int(1)])).unwrap();
        let t = ClosedSetDescription::finite(unit(), vec![open(int(0), int(1))]).unwrap();
        let kh = classical_kh_harnack(&g, &t, 1, 1e-9).unwrap();
        assert!((kh.sup_partials[0] - 0.125).abs() < 1e-15);
        assert_eq!(kh.report.identity_residual, Scalar::zero());
    }
}
