//! Sequences of regulated functions: equiregulatedness checks, falsifiers
//! for equi-integrability and its Cauchy form, limits of integrals, and the
//! Saks-Henstock defect. Universally quantified conditions are searched for
//! counterexamples in a bounded scope; a pass means no violation was found.

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{PiecewiseFunction, Side};
use crate::integrator::{Engine, IntegralResult, OracleConfig};
use crate::partitions::{random_fine_partition, rs_sum_df_g, screened_sum, DeltaFineSystem, FloatView, Gauge, TaggedPartition};
use crate::scalar::{fmt_rational, from_f64, to_f64, Rational, Scalar};

pub type Generator = Arc<dyn Fn(u64) -> Result<PiecewiseFunction> + Send + Sync>;

/// `n ↦ f_n` for `n ≥ 1`, optionally with a declared pointwise limit.
#[derive(Clone)]
pub struct FunctionSequence {
    generator: Generator,
    declared_limit: Option<PiecewiseFunction>,
    pointwise_bound: Option<Rational>,
}

impl fmt::Debug for FunctionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSequence")
            .field("declared_limit", &self.declared_limit.as_ref().map(|l| l.to_string()))
            .field("pointwise_bound", &self.pointwise_bound)
            .finish_non_exhaustive()
    }
}

impl FunctionSequence {
    pub fn new(generator: impl Fn(u64) -> Result<PiecewiseFunction> + Send + Sync + 'static) -> Self {
        FunctionSequence { generator: Arc::new(generator), declared_limit: None, pointwise_bound: None }
    }

    pub fn constant(f: PiecewiseFunction) -> Self {
        let limit = f.clone();
        let mut s = Self::new(move |_| Ok(f.clone()));
        s.declared_limit = Some(limit);
        s
    }

    /// Declares the pointwise limit after spot checks at `t = k/16` of the
    /// domain: at `n = 1024` the deviation must be below `1e-3 (1 + |f(t)|)`
    /// and either negligible or at most a quarter of the one at `n = 64`.
    pub fn with_limit(self, limit: PiecewiseFunction) -> Result<Self> {
        let far = self.get(1024)?;
        let near = self.get(64)?;
        if !far.same_domain(&limit) {
            return Err(Error::DomainMismatch("declared limit lives on another interval".into()));
        }
        let (a, b) = (limit.domain_lo().clone(), limit.domain_hi().clone());
        for k in 0..=16 {
            let t = &a + (&b - &a) * Rational::new(k.into(), 16.into());
            let target = limit.eval(&t).to_f64();
            let d_far = (far.eval(&t).to_f64() - target).abs();
            let d_near = (near.eval(&t).to_f64() - target).abs();
            let scale = 1.0 + target.abs();
            if d_far > 1e-3 * scale || (d_far > 1e-9 * scale && d_far > d_near / 4.0) {
                return Err(Error::InvalidFunction(format!(
                    "declared limit not confirmed at t = {} (deviation {d_far:e} at n = 1024)",
                    fmt_rational(&t)
                )));
            }
        }
        Ok(self.with_trusted_limit(limit))
    }

    /// Declares the pointwise limit without spot checks.
    pub fn with_trusted_limit(mut self, limit: PiecewiseFunction) -> Self {
        self.declared_limit = Some(limit);
        self
    }

    pub fn with_pointwise_bound(mut self, bound: Rational) -> Self {
        self.pointwise_bound = Some(bound);
        self
    }

    pub fn get(&self, n: u64) -> Result<PiecewiseFunction> {
        if n == 0 {
            return Err(Error::InvalidFunction("sequences are indexed from 1".into()));
        }
        (self.generator)(n)
    }

    pub fn declared_limit(&self) -> Option<&PiecewiseFunction> {
        self.declared_limit.as_ref()
    }

    pub fn pointwise_bound(&self) -> Option<&Rational> {
        self.pointwise_bound.as_ref()
    }
}

/// Indices examined for a scope `n ≤ n_max`: every `n ≤ 64`, then the powers
/// of two and `n_max` itself.
pub fn sample_indices(n_max: u64) -> Vec<u64> {
    let mut ns: Vec<u64> = (1..=n_max.min(64)).collect();
    let mut p = 128u64;
    while p <= n_max {
        ns.push(p);
        p = match p.checked_mul(2) {
            Some(q) => q,
            None => break,
        };
    }
    if n_max > 64 && ns.last() != Some(&n_max) {
        ns.push(n_max);
    }
    ns
}

/// Independent RNG stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub enum EquiregVerdict {
    /// Every sampled point and side admitted a common window.
    PassUpToScope { indices_checked: usize },
    Counterexample { tau: Rational, side: Side, n: u64, t: Rational, deviation: f64 },
}

const WINDOW_FLOOR_EXP: i32 = 40;

/// Searches, for each `τ` and side, a window width valid for all sampled
/// `n ≤ n_max`, halving from the distance to the domain end down to
/// `2^{-40}`. Points `t` at fractions `j/16` of the window are probed.
pub fn check_equiregulated(f: &FunctionSequence, n_max: u64, taus: &[Rational], eps: f64) -> Result<EquiregVerdict> {
    let ns = sample_indices(n_max);
    let members: Vec<PiecewiseFunction> = ns.par_iter().map(|n| f.get(*n)).collect::<Result<_>>()?;
    let (a, b) = (members[0].domain_lo().clone(), members[0].domain_hi().clone());
    let floor = from_f64((-(WINDOW_FLOOR_EXP as f64)).exp2()).unwrap();
    for tau in taus {
        for side in [Side::Left, Side::Right] {
            let room = match side {
                Side::Left => tau - &a,
                Side::Right => &b - tau,
            };
            if room <= Rational::zero() {
                continue;
            }
            let limits: Vec<Result<f64>> = members.iter().map(|m| m.limit(tau, side).map(|s| s.to_f64())).collect();
            let mut w = room;
            loop {
                let mut worst: Option<(u64, Rational, f64)> = None;
                'scan: for (k, m) in members.iter().enumerate() {
                    for j in 1..=15 {
                        let off = &w * Rational::new(j.into(), 16.into());
                        let t = match side {
                            Side::Left => tau - &off,
                            Side::Right => tau + &off,
                        };
                        let dev = match &limits[k] {
                            Ok(l) => (l - m.eval(&t).to_f64()).abs(),
                            Err(_) => f64::INFINITY,
                        };
                        if !(dev < eps) {
                            worst = Some((ns[k], t, dev));
                            break 'scan;
                        }
                    }
                }
                match worst {
                    None => break,
                    Some((n, t, deviation)) => {
                        if w <= floor {
                            return Ok(EquiregVerdict::Counterexample { tau: tau.clone(), side, n, t, deviation });
                        }
                        w /= Rational::from_integer(2.into());
                    }
                }
            }
        }
    }
    Ok(EquiregVerdict::PassUpToScope { indices_checked: ns.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub enum EquiVerdict {
    NoViolationFound { trials: u64, indices_checked: usize },
    Violation { n: u64, trial: u64, partition: TaggedPartition, other: Option<TaggedPartition>, gap: f64 },
}

impl EquiVerdict {
    pub fn is_violation(&self) -> bool {
        matches!(self, EquiVerdict::Violation { .. })
    }
}

fn members(seq: &FunctionSequence, ns: &[u64]) -> Result<Vec<PiecewiseFunction>> {
    ns.par_iter().map(|n| seq.get(*n)).collect()
}

fn float_views<'a>(fs: &'a [PiecewiseFunction], gs: &'a [PiecewiseFunction]) -> Vec<(FloatView<'a>, FloatView<'a>)> {
    fs.iter().zip(gs).map(|(f, g)| (FloatView::new(f), FloatView::new(g))).collect()
}

fn float_points(p: &TaggedPartition) -> (Vec<f64>, Vec<f64>) {
    (p.nodes().iter().map(to_f64).collect(), p.tags().iter().map(to_f64).collect())
}

fn scope(n_max: u64) -> Vec<u64> {
    if n_max <= 256 {
        (1..=n_max).collect()
    } else {
        sample_indices(n_max)
    }
}

/// Sampling options shared by the falsifiers.
#[derive(Clone, Debug, Default)]
pub struct Sampling {
    pub forced_nodes: Vec<Rational>,
    pub forced_tags: Vec<Rational>,
}

/// Looks for `n ≤ n_max` and a random δ-fine partition with
/// `|S(df_n, g_n, P) − ∫[df_n] g_n| ≥ η`. Trial `k` draws its partition from
/// the stream `(seed, k)`; the reported violation is the one with the
/// smallest trial index.
#[allow(clippy::too_many_arguments)]
pub fn check_equi_integrability(
    f: &FunctionSequence,
    g: &FunctionSequence,
    gauge: &Gauge,
    eta: f64,
    n_max: u64,
    trials: u64,
    seed: u64,
    sampling: &Sampling,
) -> Result<EquiVerdict> {
    let ns = scope(n_max);
    let fs = members(f, &ns)?;
    let gs = members(g, &ns)?;
    let engine = Engine::Auto(OracleConfig::default());
    let refs: Vec<f64> = fs
        .par_iter()
        .zip(&gs)
        .map(|(fi, gi)| engine.integrate(fi, gi, fi.domain_lo(), fi.domain_hi()).map(|r| r.value.to_f64()))
        .collect::<Result<_>>()?;
    let views = float_views(&fs, &gs);
    let (lo, hi) = (fs[0].domain_lo().clone(), fs[0].domain_hi().clone());
    let found = (0..trials).into_par_iter().find_map_first(|trial| {
        let mut rng = trial_rng(seed, trial);
        let p = match random_fine_partition(gauge, &lo, &hi, &mut rng, &sampling.forced_nodes, &sampling.forced_tags) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        let (nodes, tags) = float_points(&p);
        for (k, n) in ns.iter().enumerate() {
            let (approx, err) = screened_sum(&views[k].0, &views[k].1, &p, &nodes, &tags);
            if (approx - refs[k]).abs() + err < eta {
                continue;
            }
            let gap = (rs_sum_df_g(&fs[k], &gs[k], &p).to_f64() - refs[k]).abs();
            if !(gap < eta) {
                return Some(Ok(EquiVerdict::Violation { n: *n, trial, partition: p, other: None, gap }));
            }
        }
        None
    });
    match found {
        Some(r) => r,
        None => Ok(EquiVerdict::NoViolationFound { trials, indices_checked: ns.len() }),
    }
}

/// Looks for `n ≤ n_max` and two random δ-fine partitions `P`, `Q` with
/// `|S(df_n, g_n, P) − S(df_n, g_n, Q)| ≥ ε`; no reference integrals needed.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_equi_criterion(
    f: &FunctionSequence,
    g: &FunctionSequence,
    gauge: &Gauge,
    eps: f64,
    n_max: u64,
    trials: u64,
    seed: u64,
    sampling: &Sampling,
) -> Result<EquiVerdict> {
    let ns = scope(n_max);
    let fs = members(f, &ns)?;
    let gs = members(g, &ns)?;
    let views = float_views(&fs, &gs);
    let (lo, hi) = (fs[0].domain_lo().clone(), fs[0].domain_hi().clone());
    let found = (0..trials).into_par_iter().find_map_first(|trial| {
        let mut rng = trial_rng(seed, trial);
        let mut draw = || random_fine_partition(gauge, &lo, &hi, &mut rng, &sampling.forced_nodes, &sampling.forced_tags);
        let (p, q) = match (draw(), draw()) {
            (Ok(p), Ok(q)) => (p, q),
            (Err(e), _) | (_, Err(e)) => return Some(Err(e)),
        };
        let ((pn, pt), (qn, qt)) = (float_points(&p), float_points(&q));
        for (k, n) in ns.iter().enumerate() {
            let (sp, ep) = screened_sum(&views[k].0, &views[k].1, &p, &pn, &pt);
            let (sq, eq) = screened_sum(&views[k].0, &views[k].1, &q, &qn, &qt);
            if (sp - sq).abs() + ep + eq < eps {
                continue;
            }
            let gap = (rs_sum_df_g(&fs[k], &gs[k], &p) - rs_sum_df_g(&fs[k], &gs[k], &q)).abs().to_f64();
            if !(gap < eps) {
                return Some(Ok(EquiVerdict::Violation {
                    n: *n,
                    trial,
                    partition: p,
                    other: Some(q),
                    gap,
                }));
            }
        }
        None
    });
    match found {
        Some(r) => r,
        None => Ok(EquiVerdict::NoViolationFound { trials, indices_checked: ns.len() }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// The last computed `∫[df_n] g_n`.
    pub limit: IntegralResult,
    pub n: u64,
    /// `∫[df] g` for the declared limits, when both are present.
    pub reference: Option<IntegralResult>,
    /// Whether the limit estimate lies within `tol` of the reference.
    pub agrees: Option<bool>,
}

/// Computes `∫[df_n] g_n` for `n = 1, 2, …` until two successive values
/// differ by less than `tol/2`.
pub fn convergence_limit(f: &FunctionSequence, g: &FunctionSequence, tol: f64, max_n: u64) -> Result<ConvergenceReport> {
    let engine = Engine::Auto(OracleConfig::with_tol(tol / 4.0));
    let value = |n: u64| -> Result<IntegralResult> {
        let (fi, gi) = (f.get(n)?, g.get(n)?);
        engine.integrate(&fi, &gi, fi.domain_lo(), fi.domain_hi())
    };
    let mut prev = value(1)?;
    let mut last_change = f64::INFINITY;
    for n in 2..=max_n {
        let cur = value(n)?;
        last_change = (cur.value.to_f64() - prev.value.to_f64()).abs();
        if last_change < tol / 2.0 {
            let reference = match (f.declared_limit(), g.declared_limit()) {
                (Some(fl), Some(gl)) => Some(engine.integrate(fl, gl, fl.domain_lo(), fl.domain_hi())?),
                _ => None,
            };
            let agrees = reference.as_ref().map(|r| (r.value.to_f64() - cur.value.to_f64()).abs() <= tol);
            return Ok(ConvergenceReport { limit: cur, n, reference, agrees });
        }
        prev = cur;
    }
    Err(Error::NoConvergence { iterations: max_n as usize, last_change })
}

/// `|Σ_j ([f_n(γ_j) − f_n(β_j)] g_n(ξ_j) − ∫_{β_j}^{γ_j} [df_n] g_n)|` over a
/// δ-fine system.
pub fn saks_henstock_defect(
    f: &FunctionSequence,
    g: &FunctionSequence,
    gauge: &Gauge,
    system: &DeltaFineSystem,
    n: u64,
) -> Result<Scalar> {
    if !system.is_delta_fine(gauge) {
        return Err(Error::InvalidPartition("system is not fine for the gauge".into()));
    }
    let (fi, gi) = (f.get(n)?, g.get(n)?);
    let engine = Engine::Auto(OracleConfig::default());
    let mut total = Scalar::zero();
    for (b, c, x) in system.items() {
        let sum = (fi.eval(c) - fi.eval(b)) * gi.eval(x);
        let integral = engine.integrate(&fi, &gi, b, c)?;
        total = total + sum - integral.value;
    }
    Ok(total.abs())
}
