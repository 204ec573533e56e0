//! Regulated real functions on a compact interval `[a, b]`, carried as
//! breakpoints, one closed-form piece per open gap, point values at the
//! breakpoints, and cached one-sided limits.
//!
//! Outside `[a, b]` a function is extended by constants: `f(t) = f(a)` for
//! `t < a` and `f(t) = f(b)` for `t > b`. In particular `f(a-) = f(a)` and
//! `f(b+) = f(b)`, so `Δ⁻f(a) = Δ⁺f(b) = 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interval_sets::{ElementarySet, Interval};
use crate::poly::Poly;
use crate::scalar::{fmt_rational, to_f64, Rational, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Transcendental piece on the open interval `support`. One-sided limits at
/// the two support ends are stored explicitly (`None`: no limit there);
/// inside the support the expression is continuous.
#[derive(Clone, Debug)]
pub struct ExprPiece {
    expr: Expr,
    support: (Rational, Rational),
    lo_limit: Option<f64>,
    hi_limit: Option<f64>,
    primitive: Option<Expr>,
}

const LIMIT_TOL: f64 = 1e-9;

impl ExprPiece {
    /// Piece with caller-certified end limits (no numerical validation).
    pub fn with_limits(
        expr: Expr,
        support: (Rational, Rational),
        lo_limit: Option<f64>,
        hi_limit: Option<f64>,
    ) -> Self {
        ExprPiece { expr, support, lo_limit, hi_limit, primitive: None }
    }

    /// Piece whose end limits are found or checked numerically: approach each
    /// end from inside along a geometric sequence and require the last samples
    /// to agree with the limit within `1e-9` (relative to `1 + |limit|`).
    /// `declared` pins (`Some(Some(v))`) or denies (`Some(None)`) a limit.
    pub fn validated(
        expr: Expr,
        support: (Rational, Rational),
        declared_lo: Option<Option<f64>>,
        declared_hi: Option<Option<f64>>,
    ) -> Result<Self> {
        let (lo, hi) = (to_f64(&support.0), to_f64(&support.1));
        let width = hi - lo;
        let lo_limit = resolve_limit(&expr, lo, width, declared_lo, "right")?;
        let hi_limit = resolve_limit(&expr, hi, -width, declared_hi, "left")?;
        Ok(ExprPiece { expr, support, lo_limit, hi_limit, primitive: None })
    }

    pub fn with_primitive(mut self, primitive: Expr) -> Self {
        self.primitive = Some(primitive);
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn primitive(&self) -> Option<&Expr> {
        self.primitive.as_ref()
    }

    pub fn support(&self) -> &(Rational, Rational) {
        &self.support
    }

    fn limit_at(&self, x: &Rational, side: Side) -> Option<f64> {
        if side == Side::Right && *x == self.support.0 {
            self.lo_limit
        } else if side == Side::Left && *x == self.support.1 {
            self.hi_limit
        } else {
            Some(self.expr.eval(to_f64(x)))
        }
    }
}

fn probe(expr: &Expr, end: f64, inward: f64) -> Vec<f64> {
    (10..=50).map(|k| expr.eval(end + inward * (-(k as f64)).exp2())).collect()
}

fn resolve_limit(
    expr: &Expr,
    end: f64,
    inward: f64,
    declared: Option<Option<f64>>,
    side: &str,
) -> Result<Option<f64>> {
    let samples = probe(expr, end, inward);
    let tail = &samples[samples.len() - 11..];
    let close = |l: f64| tail.iter().all(|v| v.is_finite() && (v - l).abs() <= LIMIT_TOL * (1.0 + l.abs()));
    match declared {
        Some(None) => Ok(None),
        Some(Some(l)) => {
            if close(l) {
                Ok(Some(l))
            } else {
                Err(Error::InvalidFunction(format!(
                    "declared {side} limit {l} at {end} not confirmed numerically"
                )))
            }
        }
        None => {
            let at = expr.eval(end);
            let candidate = if at.is_finite() { at } else { *tail.last().unwrap() };
            Ok(candidate.is_finite().then_some(candidate).filter(|l| close(*l)))
        }
    }
}

#[derive(Clone, Debug)]
pub enum Piece {
    Poly(Poly),
    Expr(Arc<ExprPiece>),
}

impl Piece {
    pub fn zero() -> Self {
        Piece::Poly(Poly::zero())
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        match self {
            Piece::Poly(p) => Some(p),
            Piece::Expr(_) => None,
        }
    }

    fn eval(&self, t: &Rational) -> Scalar {
        match self {
            Piece::Poly(p) => Scalar::Exact(p.eval(t)),
            Piece::Expr(e) => Scalar::Approx(e.expr.eval(to_f64(t))),
        }
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        match self {
            Piece::Poly(p) => p.eval_f64(t),
            Piece::Expr(e) => e.expr.eval(t),
        }
    }

    fn limit_at(&self, x: &Rational, side: Side) -> Option<Scalar> {
        match self {
            Piece::Poly(p) => Some(Scalar::Exact(p.eval(x))),
            Piece::Expr(e) => e.limit_at(x, side).map(Scalar::Approx),
        }
    }

    fn as_expr(&self) -> Expr {
        match self {
            Piece::Poly(p) => Expr::from_poly(p),
            Piece::Expr(e) => e.expr.clone(),
        }
    }

    pub fn primitive(&self) -> Option<Expr> {
        match self {
            Piece::Poly(p) => Some(Expr::from_poly(&p.antiderivative())),
            Piece::Expr(e) => e.primitive.clone(),
        }
    }
}

/// Total variation, or a flag when some piece has no one-sided limit.
#[derive(Clone, Debug, PartialEq)]
pub enum Variation {
    Finite(Scalar),
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct PiecewiseFunction {
    breakpoints: Vec<Rational>,
    pieces: Vec<Piece>,
    values: Vec<Scalar>,
    left: Vec<Option<Scalar>>,
    right: Vec<Option<Scalar>>,
}

impl PiecewiseFunction {
    /// `breakpoints` strictly increasing with at least two entries, one piece
    /// per gap and one value per breakpoint.
    pub fn new(breakpoints: Vec<Rational>, pieces: Vec<Piece>, values: Vec<Scalar>) -> Result<Self> {
        let m = breakpoints.len();
        if m < 2 {
            return Err(Error::InvalidFunction("need at least two breakpoints".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction("breakpoints must be strictly increasing".into()));
        }
        if pieces.len() != m - 1 || values.len() != m {
            return Err(Error::InvalidFunction(format!(
                "{} breakpoints need {} pieces and {} values (got {} and {})",
                m,
                m - 1,
                m,
                pieces.len(),
                values.len()
            )));
        }
        let mut left = Vec::with_capacity(m);
        let mut right = Vec::with_capacity(m);
        for i in 0..m {
            left.push(if i == 0 { Some(values[0].clone()) } else { pieces[i - 1].limit_at(&breakpoints[i], Side::Left) });
            right.push(if i == m - 1 {
                Some(values[m - 1].clone())
            } else {
                pieces[i].limit_at(&breakpoints[i], Side::Right)
            });
        }
        Ok(PiecewiseFunction { breakpoints, pieces, values, left, right })
    }

    pub fn constant(a: Rational, b: Rational, c: Rational) -> Result<Self> {
        Self::polynomial(a, b, Poly::constant(c))
    }

    pub fn identity(a: Rational, b: Rational) -> Result<Self> {
        Self::polynomial(a, b, Poly::identity())
    }

    pub fn polynomial(a: Rational, b: Rational, p: Poly) -> Result<Self> {
        let values = vec![Scalar::Exact(p.eval(&a)), Scalar::Exact(p.eval(&b))];
        Self::new(vec![a, b], vec![Piece::Poly(p)], values)
    }

    /// Indicator of `s` on `[a, b]`.
    pub fn indicator(a: Rational, b: Rational, s: &ElementarySet) -> Result<Self> {
        let one = Self::constant(a, b, Rational::from_integer(1.into()))?;
        one.restrict(s)
    }

    /// Step function from gap values (`gap_values[i]` on `(bp[i], bp[i+1])`)
    /// and point values.
    pub fn step(breakpoints: Vec<Rational>, gap_values: Vec<Rational>, point_values: Vec<Rational>) -> Result<Self> {
        Self::new(
            breakpoints,
            gap_values.into_iter().map(|v| Piece::Poly(Poly::constant(v))).collect(),
            point_values.into_iter().map(Scalar::Exact).collect(),
        )
    }

    pub fn domain_lo(&self) -> &Rational {
        &self.breakpoints[0]
    }

    pub fn domain_hi(&self) -> &Rational {
        self.breakpoints.last().unwrap()
    }

    pub fn domain(&self) -> Interval {
        Interval::closed(self.domain_lo().clone(), self.domain_hi().clone()).expect("domain is ordered")
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn point_values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn is_step(&self) -> bool {
        self.pieces.iter().all(|p| p.as_poly().is_some_and(Poly::is_constant))
    }

    /// True when every piece is a polynomial (the exact class).
    pub fn is_polynomial_class(&self) -> bool {
        self.pieces.iter().all(|p| p.as_poly().is_some())
    }

    pub fn same_domain(&self, other: &PiecewiseFunction) -> bool {
        self.domain_lo() == other.domain_lo() && self.domain_hi() == other.domain_hi()
    }

    fn locate(&self, t: &Rational) -> std::result::Result<usize, usize> {
        self.breakpoints.binary_search(t)
    }

    /// Piece governing the open gap around a point strictly inside the domain
    /// that is not a breakpoint, or the gap starting at breakpoint `t`.
    pub fn piece_index_at(&self, t: &Rational) -> usize {
        match self.locate(t) {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.pieces.len() - 1),
        }
    }

    pub fn piece_at(&self, t: &Rational) -> &Piece {
        &self.pieces[self.piece_index_at(t)]
    }

    pub fn eval(&self, t: &Rational) -> Scalar {
        if t <= self.domain_lo() {
            return self.values[0].clone();
        }
        if t >= self.domain_hi() {
            return self.values.last().unwrap().clone();
        }
        match self.locate(t) {
            Ok(i) => self.values[i].clone(),
            Err(i) => self.pieces[i - 1].eval(t),
        }
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let lo = to_f64(self.domain_lo());
        let hi = to_f64(self.domain_hi());
        if t <= lo {
            return self.values[0].to_f64();
        }
        if t >= hi {
            return self.values.last().unwrap().to_f64();
        }
        let i = self.breakpoints.partition_point(|b| to_f64(b) < t);
        if to_f64(&self.breakpoints[i]) == t {
            return self.values[i].to_f64();
        }
        self.pieces[i - 1].eval_f64(t)
    }

    pub fn limit_left(&self, t: &Rational) -> Result<Scalar> {
        if t <= self.domain_lo() {
            return Ok(self.values[0].clone());
        }
        if t > self.domain_hi() {
            return Ok(self.values.last().unwrap().clone());
        }
        match self.locate(t) {
            Ok(i) => self.left[i]
                .clone()
                .ok_or_else(|| Error::NoOneSidedLimit { point: fmt_rational(t), side: "left" }),
            Err(i) => Ok(self.pieces[i - 1].eval(t)),
        }
    }

    pub fn limit_right(&self, t: &Rational) -> Result<Scalar> {
        if t < self.domain_lo() {
            return Ok(self.values[0].clone());
        }
        if t >= self.domain_hi() {
            return Ok(self.values.last().unwrap().clone());
        }
        match self.locate(t) {
            Ok(i) => self.right[i]
                .clone()
                .ok_or_else(|| Error::NoOneSidedLimit { point: fmt_rational(t), side: "right" }),
            Err(i) => Ok(self.pieces[i - 1].eval(t)),
        }
    }

    pub fn limit(&self, t: &Rational, side: Side) -> Result<Scalar> {
        match side {
            Side::Left => self.limit_left(t),
            Side::Right => self.limit_right(t),
        }
    }

    /// `Δ⁻f(t) = f(t) - f(t-)`.
    pub fn jump_minus(&self, t: &Rational) -> Result<Scalar> {
        Ok(self.eval(t) - self.limit_left(t)?)
    }

    /// `Δ⁺f(t) = f(t+) - f(t)`.
    pub fn jump_plus(&self, t: &Rational) -> Result<Scalar> {
        Ok(self.limit_right(t)? - self.eval(t))
    }

    /// `Δf(t) = f(t+) - f(t-)`.
    pub fn jump(&self, t: &Rational) -> Result<Scalar> {
        Ok(self.limit_right(t)? - self.limit_left(t)?)
    }

    /// Breakpoints at which `f` is discontinuous or lacks a one-sided limit.
    pub fn discontinuities(&self) -> Vec<Rational> {
        self.breakpoints
            .iter()
            .filter(|t| match (self.jump_minus(t), self.jump_plus(t)) {
                (Ok(m), Ok(p)) => !m.is_zero() || !p.is_zero(),
                _ => true,
            })
            .cloned()
            .collect()
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuities().is_empty()
    }

    /// The product `g·χ_S`; `S` must lie in the domain.
    pub fn restrict(&self, s: &ElementarySet) -> Result<Self> {
        let dom = ElementarySet::from_interval(self.domain());
        if !s.is_subset_of(&dom) {
            return Err(Error::SetOutsideDomain {
                set: s.to_string(),
                lo: fmt_rational(self.domain_lo()),
                hi: fmt_rational(self.domain_hi()),
            });
        }
        let bps = merge_sorted(&self.breakpoints, &s.endpoints());
        let two = Rational::from_integer(2.into());
        let pieces = bps
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / &two;
                if s.contains(&mid) {
                    self.piece_at(&mid).clone()
                } else {
                    Piece::zero()
                }
            })
            .collect();
        let values = bps.iter().map(|t| if s.contains(t) { self.eval(t) } else { Scalar::zero() }).collect();
        Self::new(bps, pieces, values)
    }

    /// `c1·g1 + c2·g2` on the common domain.
    pub fn linear_combination(c1: &Rational, g1: &Self, c2: &Rational, g2: &Self) -> Result<Self> {
        if !g1.same_domain(g2) {
            return Err(Error::DomainMismatch(format!("{} vs {}", g1.domain(), g2.domain())));
        }
        let bps = merge_sorted(&g1.breakpoints, &g2.breakpoints);
        let two = Rational::from_integer(2.into());
        let k1 = Scalar::from(c1);
        let k2 = Scalar::from(c2);
        let mut pieces = Vec::with_capacity(bps.len() - 1);
        for w in bps.windows(2) {
            let mid = (&w[0] + &w[1]) / &two;
            let (p1, p2) = (g1.piece_at(&mid), g2.piece_at(&mid));
            let piece = match (p1, p2) {
                (Piece::Poly(a), Piece::Poly(b)) => Piece::Poly(&a.scale(c1) + &b.scale(c2)),
                _ => {
                    let mut terms: Vec<(&Rational, &Piece)> = Vec::new();
                    if !c1.is_zero() {
                        terms.push((c1, p1));
                    }
                    if !c2.is_zero() {
                        terms.push((c2, p2));
                    }
                    combine_expr_pieces(&terms, (&w[0], &w[1]))
                }
            };
            pieces.push(piece);
        }
        let values = bps.iter().map(|t| &k1 * g1.eval(t) + &k2 * g2.eval(t)).collect();
        Self::new(bps, pieces, values)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::linear_combination(c, self, &Rational::zero(), self).expect("same domain")
    }

    /// Total variation over the domain: piece variations plus one-sided jumps.
    pub fn variation(&self) -> Variation {
        let mut total = Scalar::zero();
        let m = self.breakpoints.len();
        for i in 0..m {
            let t = &self.breakpoints[i];
            if i > 0 {
                match self.jump_minus(t) {
                    Ok(j) => total = total + j.abs(),
                    Err(_) => return Variation::Unbounded,
                }
            }
            if i + 1 < m {
                match self.jump_plus(t) {
                    Ok(j) => total = total + j.abs(),
                    Err(_) => return Variation::Unbounded,
                }
            }
        }
        for (w, piece) in self.breakpoints.windows(2).zip(&self.pieces) {
            match piece {
                Piece::Poly(p) => total = total + p.variation(&w[0], &w[1]),
                Piece::Expr(e) => {
                    let (lo, hi) = (to_f64(&w[0]), to_f64(&w[1]));
                    let (Some(l0), Some(l1)) = (e.limit_at(&w[0], Side::Right), e.limit_at(&w[1], Side::Left)) else {
                        return Variation::Unbounded;
                    };
                    // sampled lower estimate of the piece variation
                    const N: usize = 1 << 14;
                    let mut prev = l0;
                    let mut v = 0.0;
                    for k in 1..N {
                        let x = lo + (hi - lo) * k as f64 / N as f64;
                        let y = e.expr.eval(x);
                        v += (y - prev).abs();
                        prev = y;
                    }
                    v += (l1 - prev).abs();
                    total = total + Scalar::Approx(v);
                }
            }
        }
        Variation::Finite(total)
    }

    /// Upper bound on `sup |f|` over the domain for the polynomial class.
    pub fn sup_abs_bound(&self) -> Option<Rational> {
        let mut bound = Rational::zero();
        for v in &self.values {
            bound = bound.max(v.as_rational()?.abs());
        }
        for (w, piece) in self.breakpoints.windows(2).zip(&self.pieces) {
            let p = piece.as_poly()?;
            bound = bound.max(shifted_bound(p, &w[0], &w[1]));
        }
        Some(bound)
    }

    /// Upper bound on `|f'|` over the open gaps for the polynomial class.
    pub fn lipschitz_bound(&self) -> Option<Rational> {
        let mut bound = Rational::zero();
        for (w, piece) in self.breakpoints.windows(2).zip(&self.pieces) {
            let d = piece.as_poly()?.derivative();
            bound = bound.max(shifted_bound(&d, &w[0], &w[1]));
        }
        Some(bound)
    }

    /// Primitive (antiderivative) expression of the piece around `t`, when known.
    pub fn primitive_at(&self, t: &Rational) -> Option<Expr> {
        self.piece_at(t).primitive()
    }
}

/// `sup |p|` bound on `[lo, hi]`, exact for constants and monotone-free
/// linear pieces, otherwise a coefficient bound about the midpoint.
fn shifted_bound(p: &Poly, lo: &Rational, hi: &Rational) -> Rational {
    match p.degree() {
        None => Rational::zero(),
        Some(0) | Some(1) => p.eval(lo).abs().max(p.eval(hi).abs()),
        Some(_) => {
            let two = Rational::from_integer(2.into());
            let c = (lo + hi) / &two;
            let r = (hi - lo) / &two;
            // expand p(c + s) and bound over |s| <= r
            let shift = Poly::new(vec![c, Rational::from_integer(1.into())]);
            let mut acc = Poly::zero();
            for coeff in p.coeffs().iter().rev() {
                acc = &(&acc * &shift) + &Poly::constant(coeff.clone());
            }
            acc.abs_bound(&r)
        }
    }
}

fn combine_expr_pieces(terms: &[(&Rational, &Piece)], gap: (&Rational, &Rational)) -> Piece {
    if terms.is_empty() {
        return Piece::zero();
    }
    let mut expr: Option<Expr> = None;
    let mut primitive: Option<Option<Expr>> = None;
    let mut lo_limit = Some(0.0);
    let mut hi_limit = Some(0.0);
    for (c, piece) in terms {
        let scaled = piece.as_expr().scaled(c);
        expr = Some(match expr {
            None => scaled,
            Some(e) => Expr::Add(Box::new(e), Box::new(scaled)),
        });
        let cf = to_f64(c);
        lo_limit = lo_limit.zip(piece.limit_at(gap.0, Side::Right)).map(|(acc, l)| acc + cf * l.to_f64());
        hi_limit = hi_limit.zip(piece.limit_at(gap.1, Side::Left)).map(|(acc, l)| acc + cf * l.to_f64());
        let prim = piece.primitive().map(|p| p.scaled(c));
        primitive = Some(match primitive {
            None => prim,
            Some(acc) => acc.zip(prim).map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
        });
    }
    let mut piece =
        ExprPiece::with_limits(expr.unwrap(), (gap.0.clone(), gap.1.clone()), lo_limit, hi_limit);
    piece.primitive = primitive.flatten();
    Piece::Expr(Arc::new(piece))
}

pub(crate) fn merge_sorted(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out: Vec<Rational> = a.iter().chain(b.iter()).cloned().collect();
    out.sort();
    out.dedup();
    out
}

/// Piece description for [`FunctionBuilder`].
#[derive(Clone, Debug)]
pub enum PieceSpec {
    Poly(Poly),
    Expr { expr: Expr, primitive: Option<Expr> },
}

/// Assembles a function from pieces on intervals that tile the domain,
/// plus explicit point values and declared one-sided limits.
#[derive(Clone, Debug, Default)]
pub struct FunctionBuilder {
    entries: Vec<(Interval, PieceSpec)>,
    point_values: BTreeMap<Rational, Scalar>,
    limits: BTreeMap<(Rational, bool), Option<f64>>,
}

impl FunctionBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn piece(&mut self, on: Interval, spec: PieceSpec) -> &mut Self {
        self.entries.push((on, spec));
        self
    }

    pub fn value(&mut self, at: Rational, v: Scalar) -> &mut Self {
        self.point_values.insert(at, v);
        self
    }

    /// Declares the one-sided limit at `at` from `side` (`None`: no limit).
    pub fn limit(&mut self, at: Rational, side: Side, v: Option<f64>) -> &mut Self {
        self.limits.insert((at, side == Side::Right), v);
        self
    }

    pub fn build(&self) -> Result<PiecewiseFunction> {
        if self.entries.is_empty() {
            return Err(Error::InvalidFunction("no pieces".into()));
        }
        for (i, (a, _)) in self.entries.iter().enumerate() {
            for (b, _) in &self.entries[i + 1..] {
                if a.intersects(b) {
                    return Err(Error::OverlappingComponents(a.to_string(), b.to_string()));
                }
            }
        }
        let mut pts: Vec<Rational> =
            self.entries.iter().flat_map(|(i, _)| [i.lo().clone(), i.hi().clone()]).collect();
        pts.extend(self.point_values.keys().cloned());
        pts.sort();
        pts.dedup();
        if pts.len() < 2 {
            return Err(Error::InvalidFunction("domain must have positive length".into()));
        }
        let specs: Vec<Piece> = self
            .entries
            .iter()
            .map(|(iv, spec)| match spec {
                PieceSpec::Poly(p) => Ok(Piece::Poly(p.clone())),
                PieceSpec::Expr { expr, primitive } => {
                    let lo = self.limits.get(&(iv.lo().clone(), true)).cloned();
                    let hi = self.limits.get(&(iv.hi().clone(), false)).cloned();
                    let mut piece = ExprPiece::validated(expr.clone(), (iv.lo().clone(), iv.hi().clone()), lo, hi)?;
                    piece.primitive = primitive.clone();
                    Ok(Piece::Expr(Arc::new(piece)))
                }
            })
            .collect::<Result<_>>()?;
        let two = Rational::from_integer(2.into());
        let covering = |t: &Rational| -> Result<usize> {
            let hits: Vec<usize> =
                self.entries.iter().enumerate().filter(|(_, (iv, _))| iv.contains(t)).map(|(k, _)| k).collect();
            match hits.as_slice() {
                [k] => Ok(*k),
                [] => Err(Error::InvalidFunction(format!("no piece covers {}", fmt_rational(t)))),
                _ => Err(Error::InvalidFunction(format!("several pieces cover {}", fmt_rational(t)))),
            }
        };
        let mut pieces = Vec::with_capacity(pts.len() - 1);
        for w in pts.windows(2) {
            let mid = (&w[0] + &w[1]) / &two;
            pieces.push(specs[covering(&mid)?].clone());
        }
        let mut values = Vec::with_capacity(pts.len());
        for t in &pts {
            let v = match self.point_values.get(t) {
                Some(v) => v.clone(),
                None => {
                    let k = covering(t)?;
                    match &specs[k] {
                        Piece::Poly(p) => Scalar::Exact(p.eval(t)),
                        Piece::Expr(e) => {
                            let y = e.expr.eval(to_f64(t));
                            if !y.is_finite() {
                                return Err(Error::InvalidFunction(format!(
                                    "expression is not finite at {}",
                                    fmt_rational(t)
                                )));
                            }
                            Scalar::Approx(y)
                        }
                    }
                }
            };
            values.push(v);
        }
        PiecewiseFunction::new(pts, pieces, values)
    }
}

impl fmt::Display for PiecewiseFunction {
    /// Literal form accepted by the function parser.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.is_step() {
            "step"
        } else if self.is_polynomial_class() {
            "poly"
        } else {
            "expr"
        };
        write!(f, "{kind}{{ ")?;
        let m = self.breakpoints.len();
        let mut items = Vec::new();
        for i in 0..m {
            let t = fmt_rational(&self.breakpoints[i]);
            if kind == "expr" {
                items.push(format!("value({t})={}", self.values[i]));
            } else {
                items.push(format!("{{{t}}}:{}", self.values[i]));
            }
            if i + 1 < m {
                let gap = format!("({},{})", t, fmt_rational(&self.breakpoints[i + 1]));
                let body = match &self.pieces[i] {
                    Piece::Poly(p) => p.to_string(),
                    Piece::Expr(e) => e.expr.to_string(),
                };
                items.push(format!("{gap}:{body}"));
                if let Piece::Expr(e) = &self.pieces[i] {
                    let (lo, hi) = (&self.breakpoints[i], &self.breakpoints[i + 1]);
                    match e.limit_at(lo, Side::Right) {
                        Some(l) => items.push(format!("limit({}+)={l:?}", fmt_rational(lo))),
                        None => items.push(format!("nolimit({}+)", fmt_rational(lo))),
                    }
                    match e.limit_at(hi, Side::Left) {
                        Some(l) => items.push(format!("limit({}-)={l:?}", fmt_rational(hi))),
                        None => items.push(format!("nolimit({}-)", fmt_rational(hi))),
                    }
                    if let Some(p) = &e.primitive {
                        items.push(format!("primitive({},{})={p}", fmt_rational(lo), fmt_rational(hi)));
                    }
                }
            }
        }
        write!(f, "{} }}", items.join(", "))
    }
}
