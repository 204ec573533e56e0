//! The Kurzweil-Stieltjes integral `∫ [df] g`: a closed-form engine for
//! piecewise polynomial data, a gauge-refinement oracle, set-restricted
//! integrals, interval-type conversions and additivity over elementary sets.
//!
//! The closed form splits the integral into an absolutely continuous part
//! `∫ f'g dt` and point masses `Δf(τ) g(τ)` at the jumps of `f`, with
//! `Δf(a) = Δ⁺f(a)` and `Δf(b) = Δ⁻f(b)` by the constant extension.

mod oracle;

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{merge_sorted, Piece, PiecewiseFunction};
use crate::interval_sets::{ElementarySet, GridSet, Interval};
use crate::poly::Poly;
use crate::scalar::{fmt_rational, Rational, Scalar};

pub use oracle::{integrate_gauge_oracle, oracle_partition, OracleConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    GaugeOracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::GaugeOracle => "gauge_oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralResult {
    pub value: Scalar,
    pub exact: bool,
    /// Zero when `exact`.
    pub error_bound: f64,
    pub method: Method,
    /// Refinement levels used by the oracle (0 for the closed form).
    pub iterations: u32,
}

impl IntegralResult {
    pub fn closed(value: Scalar) -> Self {
        let exact = value.is_exact();
        IntegralResult { value, exact, error_bound: 0.0, method: Method::ClosedForm, iterations: 0 }
    }

    pub fn zero() -> Self {
        Self::closed(Scalar::zero())
    }

    fn combine(self, other: IntegralResult, sign: &Rational) -> IntegralResult {
        let value = self.value + Scalar::from(sign) * other.value;
        let exact = self.exact && other.exact && value.is_exact();
        let method = if self.method == Method::GaugeOracle || other.method == Method::GaugeOracle {
            Method::GaugeOracle
        } else {
            Method::ClosedForm
        };
        IntegralResult {
            value,
            exact,
            error_bound: self.error_bound + other.error_bound,
            method,
            iterations: self.iterations.max(other.iterations),
        }
    }

    pub fn plus(self, other: IntegralResult) -> IntegralResult {
        self.combine(other, &Rational::from_integer(1.into()))
    }

    pub fn minus(self, other: IntegralResult) -> IntegralResult {
        self.combine(other, &Rational::from_integer((-1).into()))
    }

    pub fn neg(self) -> IntegralResult {
        IntegralResult { value: -self.value, ..self }
    }

    /// Adds an exactly known correction term.
    fn shifted(self, by: Scalar) -> IntegralResult {
        let value = self.value + by;
        let exact = self.exact && value.is_exact();
        IntegralResult { value, exact, ..self }
    }
}

impl fmt::Display for IntegralResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            write!(f, "{} (exact, {})", self.value, self.method.name())
        } else {
            write!(f, "{} ± {:e} ({})", self.value, self.error_bound, self.method.name())
        }
    }
}

/// The four ways of attaching the endpoints of `c < d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntervalKind {
    OpenOpen,
    ClosedOpen,
    OpenClosed,
    ClosedClosed,
}

impl IntervalKind {
    pub const ALL: [IntervalKind; 4] =
        [IntervalKind::OpenOpen, IntervalKind::ClosedOpen, IntervalKind::OpenClosed, IntervalKind::ClosedClosed];

    pub fn interval(self, c: Rational, d: Rational) -> Result<Interval> {
        match self {
            IntervalKind::OpenOpen => Interval::open(c, d),
            IntervalKind::ClosedOpen => Interval::closed_open(c, d),
            IntervalKind::OpenClosed => Interval::open_closed(c, d),
            IntervalKind::ClosedClosed => Interval::closed(c, d),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::OpenOpen => "open_open",
            IntervalKind::ClosedOpen => "closed_open",
            IntervalKind::OpenClosed => "open_closed",
            IntervalKind::ClosedClosed => "closed_closed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        IntervalKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Which engine evaluates integrals.
#[derive(Clone, Copy, Debug, Default)]
pub enum Engine {
    #[default]
    ClosedForm,
    Oracle(OracleConfig),
    /// Closed form, falling back to the oracle for transcendental data.
    Auto(OracleConfig),
}

fn check_domain(f: &PiecewiseFunction, g: &PiecewiseFunction) -> Result<()> {
    if f.same_domain(g) {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!("f on {} but g on {}", f.domain(), g.domain())))
    }
}

fn check_point(f: &PiecewiseFunction, t: &Rational) -> Result<()> {
    if t < f.domain_lo() || t > f.domain_hi() {
        Err(Error::OutOfDomain {
            point: fmt_rational(t),
            lo: fmt_rational(f.domain_lo()),
            hi: fmt_rational(f.domain_hi()),
        })
    } else {
        Ok(())
    }
}

fn check_set(f: &PiecewiseFunction, s: &ElementarySet) -> Result<()> {
    match (s.infimum(), s.supremum()) {
        (Some(lo), Some(hi)) if lo < f.domain_lo() || hi > f.domain_hi() => Err(Error::SetOutsideDomain {
            set: s.to_string(),
            lo: fmt_rational(f.domain_lo()),
            hi: fmt_rational(f.domain_hi()),
        }),
        _ => Ok(()),
    }
}

impl Engine {
    /// `∫_c^d [df] g`; reversed bounds change the sign and `c = d` gives 0.
    pub fn integrate(&self, f: &PiecewiseFunction, g: &PiecewiseFunction, c: &Rational, d: &Rational) -> Result<IntegralResult> {
        check_domain(f, g)?;
        check_point(f, c)?;
        check_point(f, d)?;
        if c == d {
            return Ok(IntegralResult::zero());
        }
        if c > d {
            return self.integrate(f, g, d, c).map(IntegralResult::neg);
        }
        match self {
            Engine::ClosedForm => Prepared::new(f, g).integrate(c, d).map(IntegralResult::closed),
            Engine::Oracle(cfg) => integrate_gauge_oracle(f, g, c, d, cfg),
            Engine::Auto(cfg) => match Prepared::new(f, g).integrate(c, d) {
                Ok(v) => Ok(IntegralResult::closed(v)),
                Err(Error::UnsupportedClass(_)) => integrate_gauge_oracle(f, g, c, d, cfg),
                Err(e) => Err(e),
            },
        }
    }

    /// `∫_S [df] g := ∫_a^b [df] (g χ_S)`.
    pub fn over_set(&self, f: &PiecewiseFunction, g: &PiecewiseFunction, s: &ElementarySet) -> Result<IntegralResult> {
        check_domain(f, g)?;
        let gs = g.restrict(s)?;
        self.integrate(f, &gs, f.domain_lo(), f.domain_hi())
    }

    /// Integral over an elementary set as the sum over its minimal
    /// decomposition. The closed form evaluates all components in one pass.
    pub fn elementary(&self, f: &PiecewiseFunction, g: &PiecewiseFunction, e: &ElementarySet) -> Result<IntegralResult> {
        check_domain(f, g)?;
        check_set(f, e)?;
        if e.is_empty() {
            return Ok(IntegralResult::zero());
        }
        match self {
            Engine::ClosedForm => Prepared::new(f, g).elementary(e).map(IntegralResult::closed),
            Engine::Auto(_) => match Prepared::new(f, g).elementary(e) {
                Ok(v) => Ok(IntegralResult::closed(v)),
                Err(Error::UnsupportedClass(_)) => self.elementary_by_components(f, g, e),
                Err(err) => Err(err),
            },
            Engine::Oracle(_) => self.elementary_by_components(f, g, e),
        }
    }

    fn elementary_by_components(
        &self,
        f: &PiecewiseFunction,
        g: &PiecewiseFunction,
        e: &ElementarySet,
    ) -> Result<IntegralResult> {
        let parts: Vec<IntegralResult> = e
            .components()
            .par_iter()
            .map(|j| self.over_set(f, g, &ElementarySet::from_interval(j.clone())))
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().fold(IntegralResult::zero(), IntegralResult::plus))
    }

    /// Integral over `c < d` with the chosen endpoint attachment, from
    /// `∫_c^d` and the one-sided values of `f` at `c` and `d`.
    pub fn convert(
        &self,
        f: &PiecewiseFunction,
        g: &PiecewiseFunction,
        c: &Rational,
        d: &Rational,
        kind: IntervalKind,
    ) -> Result<IntegralResult> {
        if c >= d {
            return Err(Error::InvalidInterval(format!("need c < d, got {} and {}", fmt_rational(c), fmt_rational(d))));
        }
        let base = self.integrate(f, g, c, d)?;
        let (gc, gd) = (g.eval(c), g.eval(d));
        let fc_side = match kind {
            IntervalKind::ClosedOpen | IntervalKind::ClosedClosed => f.limit_left(c)?,
            IntervalKind::OpenOpen | IntervalKind::OpenClosed => f.limit_right(c)?,
        };
        let fd_side = match kind {
            IntervalKind::OpenClosed | IntervalKind::ClosedClosed => f.limit_right(d)?,
            IntervalKind::OpenOpen | IntervalKind::ClosedOpen => f.limit_left(d)?,
        };
        let at_c = (f.eval(c) - fc_side) * gc;
        let at_d = (fd_side - f.eval(d)) * gd;
        Ok(base.shifted(at_c + at_d))
    }

    /// Integrals over `S1`, `S2`, `S1 ∪ S2`, `S1 ∩ S2`; one missing value is
    /// recovered from `∫_{S1} + ∫_{S2} = ∫_{S1∪S2} + ∫_{S1∩S2}`.
    pub fn pair(
        &self,
        f: &PiecewiseFunction,
        g: &PiecewiseFunction,
        s1: &ElementarySet,
        s2: &ElementarySet,
    ) -> Result<PairIntegrals> {
        let union = s1.union(s2);
        let inter = s1.intersect(s2);
        let sets = [s1, s2, &union, &inter];
        let mut vals: Vec<Option<IntegralResult>> = sets.iter().map(|s| self.over_set(f, g, s).ok()).collect();
        let missing: Vec<usize> = (0..4).filter(|k| vals[*k].is_none()).collect();
        let derived = match missing.as_slice() {
            [] => None,
            [k] => {
                let get = |i: usize| vals[i].clone().unwrap();
                vals[*k] = Some(match k {
                    0 => get(2).plus(get(3)).minus(get(1)),
                    1 => get(2).plus(get(3)).minus(get(0)),
                    2 => get(0).plus(get(1)).minus(get(3)),
                    _ => get(0).plus(get(1)).minus(get(2)),
                });
                Some(*k)
            }
            _ => {
                return Err(Error::InsufficientData(format!(
                    "{} of the four integrals could not be computed",
                    missing.len()
                )))
            }
        };
        let mut it = vals.into_iter().map(Option::unwrap);
        Ok(PairIntegrals {
            s1: it.next().unwrap(),
            s2: it.next().unwrap(),
            union: it.next().unwrap(),
            intersection: it.next().unwrap(),
            derived,
        })
    }

    /// `∫_{∪S_j} = Σ ∫_{S_i} − Σ_{i≥2} ∫_{T_i}` with `T_i = (∪_{j<i} S_j) ∩ S_i`.
    pub fn chain(&self, f: &PiecewiseFunction, g: &PiecewiseFunction, sets: &[ElementarySet]) -> Result<IntegralResult> {
        if sets.len() < 2 {
            return Err(Error::InsufficientData("the chain formula needs at least two sets".into()));
        }
        let mut prefix = sets[0].clone();
        let mut overlaps = Vec::with_capacity(sets.len() - 1);
        for s in &sets[1..] {
            overlaps.push(prefix.intersect(s));
            prefix = prefix.union(s);
        }
        let plus: Vec<IntegralResult> = sets.par_iter().map(|s| self.over_set(f, g, s)).collect::<Result<_>>()?;
        let minus: Vec<IntegralResult> = overlaps.par_iter().map(|t| self.over_set(f, g, t)).collect::<Result<_>>()?;
        let total = plus.into_iter().fold(IntegralResult::zero(), IntegralResult::plus);
        Ok(minus.into_iter().fold(total, IntegralResult::minus))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairIntegrals {
    pub s1: IntegralResult,
    pub s2: IntegralResult,
    pub union: IntegralResult,
    pub intersection: IntegralResult,
    /// Index (s1, s2, union, intersection) of the value obtained from the identity.
    pub derived: Option<usize>,
}

pub fn integrate(f: &PiecewiseFunction, g: &PiecewiseFunction, c: &Rational, d: &Rational) -> Result<IntegralResult> {
    Engine::ClosedForm.integrate(f, g, c, d)
}

/// Closed form when available, otherwise the oracle at tolerance `tol`.
pub fn integrate_auto(
    f: &PiecewiseFunction,
    g: &PiecewiseFunction,
    c: &Rational,
    d: &Rational,
    tol: f64,
) -> Result<IntegralResult> {
    Engine::Auto(OracleConfig::with_tol(tol)).integrate(f, g, c, d)
}

pub fn integrate_over_set(f: &PiecewiseFunction, g: &PiecewiseFunction, s: &ElementarySet) -> Result<IntegralResult> {
    Engine::ClosedForm.over_set(f, g, s)
}

pub fn integrate_elementary(f: &PiecewiseFunction, g: &PiecewiseFunction, e: &ElementarySet) -> Result<IntegralResult> {
    Engine::ClosedForm.elementary(f, g, e)
}

pub fn convert_interval_type(
    f: &PiecewiseFunction,
    g: &PiecewiseFunction,
    c: &Rational,
    d: &Rational,
    kind: IntervalKind,
) -> Result<IntegralResult> {
    Engine::ClosedForm.convert(f, g, c, d, kind)
}

pub fn inclusion_exclusion_pair(
    f: &PiecewiseFunction,
    g: &PiecewiseFunction,
    s1: &ElementarySet,
    s2: &ElementarySet,
) -> Result<PairIntegrals> {
    Engine::ClosedForm.pair(f, g, s1, s2)
}

pub fn inclusion_exclusion_chain(
    f: &PiecewiseFunction,
    g: &PiecewiseFunction,
    sets: &[ElementarySet],
) -> Result<IntegralResult> {
    Engine::ClosedForm.chain(f, g, sets)
}

/// `∫_{{τ}} [df] g = Δf(τ) g(τ)` with `Δ⁻f(a) = Δ⁺f(b) = 0`.
pub fn singleton_integral(f: &PiecewiseFunction, g: &PiecewiseFunction, tau: &Rational) -> Result<IntegralResult> {
    check_domain(f, g)?;
    check_point(f, tau)?;
    let jump = f.jump(tau)?;
    let value = if jump.is_zero() { Scalar::zero() } else { jump * g.eval(tau) };
    Ok(IntegralResult::closed(value))
}

/// Closed form over a grid set; `Ok(None)` when the integer sums overflow.
pub(crate) fn integrate_grid(f: &PiecewiseFunction, g: &PiecewiseFunction, grid: &GridSet) -> Result<Option<Scalar>> {
    check_domain(f, g)?;
    Prepared::new(f, g).grid(grid)
}

/// Per-gap antiderivatives of `f'g` and the jump masses of `f`.
struct Prepared<'a> {
    f: &'a PiecewiseFunction,
    g: &'a PiecewiseFunction,
    xs: Vec<Rational>,
    prims: Vec<Option<Poly>>,
    /// Breakpoints of `f` with nonzero `Δf` (`None`: a one-sided limit is missing).
    atoms: Vec<(Rational, Option<Scalar>)>,
}

impl<'a> Prepared<'a> {
    fn new(f: &'a PiecewiseFunction, g: &'a PiecewiseFunction) -> Self {
        let xs = merge_sorted(f.breakpoints(), g.breakpoints());
        let two = Rational::from_integer(2.into());
        let prims = xs
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / &two;
                match (f.piece_at(&mid), g.piece_at(&mid)) {
                    (Piece::Poly(p), gp) => {
                        let dp = p.derivative();
                        if dp.is_zero() {
                            Some(Poly::zero())
                        } else {
                            gp.as_poly().map(|q| (&dp * q).antiderivative())
                        }
                    }
                    (Piece::Expr(_), _) => None,
                }
            })
            .collect();
        let atoms = f
            .breakpoints()
            .iter()
            .filter_map(|t| match f.jump(t) {
                Ok(j) if j.is_zero() => None,
                Ok(j) => Some((t.clone(), Some(j))),
                Err(_) => Some((t.clone(), None)),
            })
            .collect();
        Prepared { f, g, xs, prims, atoms }
    }

    fn prim(&self, i: usize) -> Result<&Poly> {
        self.prims[i].as_ref().ok_or_else(|| {
            Error::UnsupportedClass(format!(
                "transcendental data on ({},{}) needs the gauge oracle",
                fmt_rational(&self.xs[i]),
                fmt_rational(&self.xs[i + 1])
            ))
        })
    }

    fn mass(&self, t: &Rational, jump: &Option<Scalar>) -> Result<Scalar> {
        match jump {
            Some(j) => Ok(j.clone() * self.g.eval(t)),
            None => {
                let side = if self.f.limit_left(t).is_err() { "left" } else { "right" };
                Err(Error::NoOneSidedLimit { point: fmt_rational(t), side })
            }
        }
    }

    /// `∫_c^d f'g dt` for `c < d`.
    fn ac(&self, c: &Rational, d: &Rational) -> Result<Rational> {
        let first = self.xs.partition_point(|x| x <= c).saturating_sub(1);
        let mut total = Rational::zero();
        for i in first..self.xs.len() - 1 {
            if &self.xs[i] >= d {
                break;
            }
            let p = self.prim(i)?;
            if p.is_zero() {
                continue;
            }
            let lo = c.max(&self.xs[i]);
            let hi = d.min(&self.xs[i + 1]);
            total += p.eval(hi) - p.eval(lo);
        }
        Ok(total)
    }

    fn integrate(&self, c: &Rational, d: &Rational) -> Result<Scalar> {
        let mut total = Scalar::from(self.ac(c, d)?);
        for (t, jump) in &self.atoms {
            if t > c && t < d {
                total = total + self.mass(t, jump)?;
            }
        }
        let jc = self.f.jump_plus(c)?;
        if !jc.is_zero() {
            total = total + jc * self.g.eval(c);
        }
        let jd = self.f.jump_minus(d)?;
        if !jd.is_zero() {
            total = total + jd * self.g.eval(d);
        }
        Ok(total)
    }

    fn elementary(&self, e: &ElementarySet) -> Result<Scalar> {
        let comps = e.components();
        let mut total = Rational::zero();
        for i in 0..self.xs.len() - 1 {
            let (x0, x1) = (&self.xs[i], &self.xs[i + 1]);
            let first = comps.partition_point(|j| j.hi() <= x0);
            let last = comps.partition_point(|j| j.lo() < x1);
            if first >= last {
                continue;
            }
            let p = self.prim(i)?;
            if p.is_zero() {
                continue;
            }
            let mut pts: Vec<(&Rational, i64)> = Vec::with_capacity(2 * (last - first));
            for j in &comps[first..last] {
                pts.push((j.hi().min(x1), 1));
                pts.push((j.lo().max(x0), -1));
            }
            total += signed_poly_sum(p, &pts);
        }
        let mut total = Scalar::from(total);
        for (t, jump) in &self.atoms {
            if e.contains(t) {
                total = total + self.mass(t, jump)?;
            }
        }
        Ok(total)
    }
}

impl Prepared<'_> {
    fn grid(&self, grid: &GridSet) -> Result<Option<Scalar>> {
        let comps = &grid.comps;
        let mut total = Rational::zero();
        for i in 0..self.xs.len() - 1 {
            let (x0, x1) = (&self.xs[i], &self.xs[i + 1]);
            let first = comps.partition_point(|c| grid.at(c.1) <= *x0);
            let last = comps.partition_point(|c| grid.at(c.0) < *x1);
            if first >= last {
                continue;
            }
            let p = self.prim(i)?;
            if p.is_zero() {
                continue;
            }
            let clipped = |k: usize| {
                let (lo, hi) = (grid.at(comps[k].0), grid.at(comps[k].1));
                p.eval(&hi.min(x1.clone())) - p.eval(&lo.max(x0.clone()))
            };
            let (mut start, mut end) = (first, last);
            if grid.at(comps[first].0) < *x0 || grid.at(comps[first].1) > *x1 {
                total += clipped(first);
                start += 1;
            }
            if start < end && grid.at(comps[end - 1].1) > *x1 {
                total += clipped(end - 1);
                end -= 1;
            }
            match grid_poly_sum(p, grid.den, &comps[start..end]) {
                Some(v) => total += v,
                None => return Ok(None),
            }
        }
        let mut total = Scalar::from(total);
        for (t, jump) in &self.atoms {
            if grid.contains(t) {
                total = total + self.mass(t, jump)?;
            }
        }
        Ok(Some(total))
    }
}

/// `Σ (p(hi/den) − p(lo/den))` through integer power sums.
fn grid_poly_sum(p: &Poly, den: i128, comps: &[(i128, i128)]) -> Option<Rational> {
    let deg = p.degree().unwrap_or(0);
    let mut sums = vec![0i128; deg + 1];
    for (lo, hi) in comps {
        let (mut a, mut b) = (1i128, 1i128);
        for acc in sums.iter_mut().skip(1) {
            a = a.checked_mul(*lo)?;
            b = b.checked_mul(*hi)?;
            *acc = acc.checked_add(b.checked_sub(a)?)?;
        }
    }
    let mut scale = BigInt::from(1);
    let mut total = Rational::zero();
    for (c, s) in p.coeffs().iter().zip(sums) {
        total += c * Rational::new(BigInt::from(s), scale.clone());
        scale *= den;
    }
    Some(total)
}

/// `Σ s·p(x)` over signed points. Points sharing a small common denominator
/// are summed as integer power sums; otherwise term by term.
fn signed_poly_sum(p: &Poly, pts: &[(&Rational, i64)]) -> Rational {
    let deg = p.degree().unwrap_or(0);
    match power_sums(pts, deg) {
        Some(sums) => p.coeffs().iter().zip(&sums).map(|(c, s)| c * s).sum(),
        None => pts.iter().map(|(x, s)| p.eval(x) * Rational::from_integer((*s).into())).sum(),
    }
}

fn power_sums(pts: &[(&Rational, i64)], deg: usize) -> Option<Vec<Rational>> {
    const LIMIT: i128 = 1 << 62;
    let mut l: i128 = 1;
    for (x, _) in pts {
        let d = x.denom().to_i128()?;
        if l % d != 0 {
            l = (l / l.gcd(&d)).checked_mul(d)?;
            if l > LIMIT {
                return None;
            }
        }
    }
    let mut sums = vec![0i128; deg + 1];
    for (x, s) in pts {
        let n = x.numer().to_i128()?.checked_mul(l / x.denom().to_i128()?)?;
        if n.abs() > LIMIT {
            return None;
        }
        let mut pw: i128 = *s as i128;
        for (k, acc) in sums.iter_mut().enumerate() {
            *acc = acc.checked_add(pw)?;
            if k < deg {
                pw = pw.checked_mul(n)?;
            }
        }
    }
    let lb = BigInt::from(l);
    let mut den = BigInt::from(1);
    let mut out = Vec::with_capacity(deg + 1);
    for s in sums {
        out.push(Rational::new(BigInt::from(s), den.clone()));
        den *= &lb;
    }
    Some(out)
}
