//! Seeded property suites. Trial `k` of a suite draws its data from its own
//! ChaCha8 stream, so records do not depend on scheduling.

use gaugeks_core::harnack::{harnack_assemble, ClosedSetDescription};
use gaugeks_core::integrator::{
    convert_interval_type, inclusion_exclusion_chain, inclusion_exclusion_pair, integrate, integrate_elementary,
    integrate_gauge_oracle, integrate_over_set, IntervalKind, OracleConfig,
};
use gaugeks_core::partitions::{cousin_with_depth, rs_sum_df_g};
use gaugeks_core::random;
use gaugeks_core::scalar::to_f64;
use gaugeks_core::sequences::{check_equi_integrability, EquiVerdict, FunctionSequence, Sampling};
use gaugeks_core::{ElementarySet, Gauge, Interval, PiecewiseFunction, Rational, Scalar, TaggedPartition};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::ledger::{self, digest, Record, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    PropIntInterval,
    Additivity,
    InclusionExclusion,
    Cousin,
    OracleAgreement,
    Equi,
    HarnackIdentity,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::PropIntInterval,
        Suite::Additivity,
        Suite::InclusionExclusion,
        Suite::Cousin,
        Suite::OracleAgreement,
        Suite::Equi,
        Suite::HarnackIdentity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::PropIntInterval => "prop_int_interval",
            Suite::Additivity => "additivity",
            Suite::InclusionExclusion => "inclusion_exclusion",
            Suite::Cousin => "cousin",
            Suite::OracleAgreement => "oracle_agreement",
            Suite::Equi => "equi",
            Suite::HarnackIdentity => "harnack_identity",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    /// `all` expands to every suite.
    pub fn select(s: &str) -> Option<Vec<Suite>> {
        if s == "all" {
            return Some(Suite::ALL.to_vec());
        }
        Suite::parse(s).map(|x| vec![x])
    }

    fn index(self) -> u64 {
        Suite::ALL.iter().position(|x| *x == self).unwrap() as u64
    }

    fn trial(self, rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
        match self {
            Suite::PropIntInterval => prop_int_interval(rng),
            Suite::Additivity => additivity(rng),
            Suite::InclusionExclusion => inclusion_exclusion(rng),
            Suite::Cousin => cousin(rng),
            Suite::OracleAgreement => oracle_agreement(rng),
            Suite::Equi => equi(rng),
            Suite::HarnackIdentity => harnack_identity(rng),
        }
    }
}

/// What a trial checked: the inputs (for the digest), a residual and details.
pub struct Trial {
    inputs: Vec<String>,
    residual: Option<Scalar>,
    pass: bool,
    details: Map<String, Value>,
}

impl Trial {
    fn new(inputs: Vec<String>) -> Self {
        Trial { inputs, residual: None, pass: true, details: Map::new() }
    }

    /// Passes iff the residual is exactly zero.
    fn exact(mut self, residual: Scalar) -> Self {
        self.pass = residual.is_zero();
        self.residual = Some(residual);
        self
    }

    fn within(mut self, residual: f64, tol: f64) -> Self {
        self.pass = residual <= tol;
        self.residual = Some(Scalar::Approx(residual));
        self
    }

    fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.into(), value.into());
        self
    }
}

pub fn trial_stream(suite: Suite, seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((suite.index() + 1) << 40) | trial);
    rng
}

/// One record per trial, in trial order.
pub fn run_suite(suite: Suite, trials: u64, seed: u64, parallel: bool) -> Vec<Record> {
    let one = |k: u64| trial_record(suite, seed, k);
    if parallel {
        (0..trials).into_par_iter().map(one).collect()
    } else {
        (0..trials).map(one).collect()
    }
}

fn trial_record(suite: Suite, seed: u64, k: u64) -> Record {
    let mut rng = trial_stream(suite, seed, k);
    let mut rec = Record::new(suite.name(), "verify", String::new());
    rec.trial = Some(k);
    rec.seed = Some(seed);
    match suite.trial(&mut rng) {
        Ok(t) => {
            rec.inputs_digest = digest(std::iter::once(suite.name().to_string()).chain(t.inputs));
            rec.residual = t.residual.as_ref().map_or(Value::Null, ledger::scalar);
            rec.status = if t.pass { Status::Pass } else { Status::Fail };
            rec.details = t.details;
        }
        Err(e) => {
            rec.inputs_digest = digest([suite.name().to_string(), seed.to_string(), k.to_string()]);
            rec = rec.failed(Status::Error, e.to_string());
        }
    }
    rec
}

/// Aggregate of a suite's trial records: pass iff every trial passed.
pub fn summarize(suite: &str, seed: u64, records: &[Record]) -> Record {
    let failures: Vec<u64> = records.iter().filter(|r| r.status != Status::Pass).filter_map(|r| r.trial).collect();
    let worst = records
        .iter()
        .filter(|r| !r.residual.is_null())
        .max_by(|x, y| residual_size(&x.residual).total_cmp(&residual_size(&y.residual)));
    let mut rec = Record::new(suite, "verify-summary", digest(records.iter().map(|r| r.inputs_digest.as_str())));
    rec.seed = Some(seed);
    rec.residual = worst.map_or(Value::Null, |r| r.residual.clone());
    rec.status = if failures.is_empty() { Status::Pass } else { Status::Fail };
    rec.detail("trials", records.len() as u64).detail("failures", failures.len() as u64).detail(
        "failed_trials",
        failures.into_iter().take(20).map(Value::from).collect::<Vec<_>>(),
    )
}

fn residual_size(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap_or(f64::INFINITY).abs(),
        Value::String(s) => s
            .split_once('/')
            .and_then(|(p, q)| Some(p.parse::<f64>().ok()? / q.parse::<f64>().ok()?))
            .map_or(f64::INFINITY, f64::abs),
        _ => 0.0,
    }
}

fn hull() -> (Rational, Rational) {
    let two = Rational::from_integer(2.into());
    (Rational::from_integer(0.into()), two)
}

fn ordered(rng: &mut ChaCha8Rng, a: &Rational, b: &Rational) -> (Rational, Rational) {
    let mut pts = random::grid_points(rng, a, b, 2);
    let hi = pts.pop().unwrap();
    (pts.pop().unwrap(), hi)
}

fn abs_sum(parts: impl IntoIterator<Item = Scalar>) -> Scalar {
    parts.into_iter().map(|s| s.abs()).fold(Scalar::zero(), |a, b| a + b)
}

/// Tagged partition of `[c, d]` whose only cells meeting a breakpoint `p` of
/// the step function `f` are `[p−ε, p]` and `[p, p+ε]`, tagged at `p`.
/// Its sum `S(df, g, P)` is the integral for every `g`.
fn jump_tagged(f: &PiecewiseFunction, c: &Rational, d: &Rational) -> gaugeks_core::Result<TaggedPartition> {
    let mut pts = vec![c.clone()];
    pts.extend(f.breakpoints().iter().filter(|x| *x > c && *x < d).cloned());
    pts.push(d.clone());
    let eps = pts.windows(2).map(|w| &w[1] - &w[0]).min().unwrap() / Rational::from_integer(4.into());
    let (mut nodes, mut tags) = (vec![c.clone()], Vec::new());
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            let before = p - &eps;
            if before > *nodes.last().unwrap() {
                let last = nodes.last().unwrap().clone();
                tags.push((&last + &before) / Rational::from_integer(2.into()));
                nodes.push(before);
            }
            tags.push(p.clone());
            nodes.push(p.clone());
        }
        if i + 1 < pts.len() {
            tags.push(p.clone());
            nodes.push(p + &eps);
        }
    }
    TaggedPartition::new(nodes, tags)
}

fn prop_int_interval(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = hull();
    let f = random::step_function(rng, &a, &b, 8)?;
    let g = random::step_function(rng, &a, &b, 8)?;
    let (c, d) = ordered(rng, &a, &b);
    let mut diffs = Vec::new();
    for kind in IntervalKind::ALL {
        let set = ElementarySet::from_interval(kind.interval(c.clone(), d.clone())?);
        diffs.push(convert_interval_type(&f, &g, &c, &d, kind)?.value - integrate_over_set(&f, &g, &set)?.value);
    }
    diffs.push(integrate(&f, &g, &c, &d)?.value - rs_sum_df_g(&f, &g, &jump_tagged(&f, &c, &d)?));
    let inputs = vec![f.to_string(), g.to_string(), c.to_string(), d.to_string()];
    Ok(Trial::new(inputs).exact(abs_sum(diffs)))
}

fn additivity(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = hull();
    let f = random::step_function(rng, &a, &b, 8)?;
    let g = random::piecewise_polynomial(rng, &a, &b, 4, 3)?;
    let e = random::elementary_set(rng, &a, &b, 6);
    let whole = integrate_elementary(&f, &g, &e)?.value;
    let mut by_parts = Scalar::zero();
    for comp in e.components() {
        by_parts = by_parts + integrate_over_set(&f, &g, &ElementarySet::from_interval(comp.clone()))?.value;
    }
    let cut = random::grid_points(rng, &a, &b, 3);
    let (c, m, d) = (&cut[0], &cut[1], &cut[2]);
    let split = integrate(&f, &g, c, m)?.value + integrate(&f, &g, m, d)?.value - integrate(&f, &g, c, d)?.value;
    let diffs = [whole.clone() - integrate_over_set(&f, &g, &e)?.value, whole - by_parts, split];
    let inputs = vec![f.to_string(), g.to_string(), e.to_string(), format!("{c} {m} {d}")];
    Ok(Trial::new(inputs).exact(abs_sum(diffs)).detail("components", e.components().len() as u64))
}

fn inclusion_exclusion(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = hull();
    let f = random::step_function(rng, &a, &b, 8)?;
    let g = random::piecewise_polynomial(rng, &a, &b, 3, 2)?;
    let p = rng.gen_range(2..=6);
    let sets: Vec<ElementarySet> = (0..p).map(|_| random::elementary_set(rng, &a, &b, 3)).collect();
    let union = sets.iter().fold(ElementarySet::empty(), |u, s| u.union(s));
    let chain = inclusion_exclusion_chain(&f, &g, &sets)?.value - integrate_over_set(&f, &g, &union)?.value;
    let pair = inclusion_exclusion_pair(&f, &g, &sets[0], &sets[1])?;
    let two = pair.s1.value + pair.s2.value - pair.union.value - pair.intersection.value;
    let mut inputs = vec![f.to_string(), g.to_string()];
    inputs.extend(sets.iter().map(ToString::to_string));
    Ok(Trial::new(inputs).exact(abs_sum([chain, two])).detail("sets", p as u64))
}

fn cousin(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = (Rational::from_integer((-1).into()), Rational::from_integer(3.into()));
    let gauge = random::gauge(rng, &a, &b, 6, 4)?;
    let out = cousin_with_depth(&gauge, &a, &b)?;
    let bound = to_f64(&((&b - &a) / gauge.min_plateau())).log2() + 2.0 * gauge.overrides().len() as f64;
    let fine = out.partition.is_delta_fine(&gauge);
    let mut t = Trial::new(vec![gauge.to_string()])
        .detail("depth", out.max_depth)
        .detail("depth_bound", ledger::float(bound))
        .detail("intervals", out.partition.len() as u64)
        .detail("fine", fine);
    t.pass = fine && out.max_depth as f64 <= bound;
    Ok(t)
}

fn oracle_agreement(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = hull();
    let f = random::step_function(rng, &a, &b, 6)?;
    let g = PiecewiseFunction::polynomial(a.clone(), b.clone(), random::polynomial(rng, 3))?;
    let (c, d) = ordered(rng, &a, &b);
    let exact = integrate(&f, &g, &c, &d)?.value.to_f64();
    let oracle = integrate_gauge_oracle(&f, &g, &c, &d, &OracleConfig::with_tol(1e-9))?;
    let inputs = vec![f.to_string(), g.to_string(), c.to_string(), d.to_string()];
    Ok(Trial::new(inputs).within((exact - oracle.value.to_f64()).abs(), 1e-9).detail("levels", oracle.iterations))
}

/// `δ = (b−a)/64` and a tolerance twice the error bound of any δ-fine sum
/// for `g + h/n` against the identity.
fn sized_gauge(a: &Rational, b: &Rational, g: &PiecewiseFunction, h: &PiecewiseFunction) -> gaugeks_core::Result<(Gauge, f64)> {
    let delta = (b - a) / Rational::from_integer(64.into());
    let jump = |f: &PiecewiseFunction, p: &Rational| {
        let side = |j: gaugeks_core::Result<Scalar>| j.map_or(0.0, |v| v.abs().to_f64());
        side(f.jump_minus(p)) + side(f.jump_plus(p))
    };
    let mut bps: Vec<Rational> = g.breakpoints().iter().chain(h.breakpoints()).cloned().collect();
    bps.sort();
    bps.dedup();
    let total: f64 = bps.iter().map(|p| jump(g, p) + jump(h, p)).sum();
    let eta = 8.0 * to_f64(&delta) * total + 1e-9;
    Ok((Gauge::constant(a.clone(), b.clone(), delta)?, eta))
}

/// A random gauge catches `n χ_(0,1/n)`; a sized gauge passes `g + h/n`.
fn equi(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = (Rational::from_integer(0.into()), Rational::from_integer(1.into()));
    let id = FunctionSequence::constant(PiecewiseFunction::identity(a.clone(), b.clone())?);
    let spikes = FunctionSequence::new(|n| {
        let (zero, one) = (Rational::from_integer(0.into()), Rational::from_integer(1.into()));
        let s = ElementarySet::from_interval(Interval::open(zero.clone(), Rational::new(1.into(), n.into()))?);
        Ok(PiecewiseFunction::indicator(zero, one, &s)?.scale(&Rational::from_integer(n.into())))
    });
    let gauge = random::gauge(rng, &a, &b, 4, 3)?;
    let sub_seed = rng.gen::<u64>();
    let caught = check_equi_integrability(&id, &spikes, &gauge, 0.5, 1 << 40, 1000, sub_seed, &Sampling::default())?;
    let (g, h) = (random::step_function(rng, &a, &b, 6)?, random::step_function(rng, &a, &b, 6)?);
    let (sized, eta) = sized_gauge(&a, &b, &g, &h)?;
    let family = {
        let (g, h) = (g.clone(), h.clone());
        FunctionSequence::new(move |n| {
            PiecewiseFunction::linear_combination(&Rational::from_integer(1.into()), &g, &Rational::new(1.into(), n.into()), &h)
        })
    };
    let held = check_equi_integrability(&id, &family, &sized, eta, 8, 20, sub_seed, &Sampling::default())?;
    let witness = match &caught {
        EquiVerdict::Violation { n, trial, gap, .. } => {
            Value::from(vec![Value::from(*n), Value::from(*trial), ledger::float(*gap)])
        }
        EquiVerdict::NoViolationFound { .. } => Value::Null,
    };
    let inputs = vec![gauge.to_string(), g.to_string(), h.to_string(), sub_seed.to_string()];
    let mut t = Trial::new(inputs)
        .detail("spike_witness", witness)
        .detail("family_eta", ledger::float(eta))
        .detail("family_violation", held.is_violation());
    t.pass = caught.is_violation() && !held.is_violation();
    Ok(t)
}

/// Relatively open subset of `[a, b]` as a shuffled grouping of its components.
fn random_cover(rng: &mut ChaCha8Rng, a: &Rational, b: &Rational) -> gaugeks_core::Result<Vec<ElementarySet>> {
    let k = rng.gen_range(1..=5);
    let pts = random::grid_points(rng, a, b, 2 * k);
    let mut comps: Vec<Interval> = pts.chunks(2).map(|w| Interval::open(w[0].clone(), w[1].clone())).collect::<Result<_, _>>()?;
    if rng.gen_bool(0.3) {
        comps.push(Interval::closed_open(a.clone(), (a + comps[0].lo()) / Rational::from_integer(2.into()))?);
    }
    comps.shuffle(rng);
    let groups = rng.gen_range(1..=comps.len());
    let mut cover = vec![ElementarySet::empty(); groups];
    for (i, c) in comps.into_iter().enumerate() {
        let slot = if i < groups { i } else { rng.gen_range(0..groups) };
        cover[slot] = cover[slot].union(&ElementarySet::from_interval(c));
    }
    Ok(cover)
}

fn harnack_identity(rng: &mut ChaCha8Rng) -> gaugeks_core::Result<Trial> {
    let (a, b) = hull();
    let cover = random_cover(rng, &a, &b)?;
    let t = ClosedSetDescription::finite(Interval::closed(a.clone(), b.clone())?, cover.clone())?;
    let f = random::step_function(rng, &a, &b, 8)?;
    let g = random::piecewise_polynomial(rng, &a, &b, 3, 2)?;
    let n = rng.gen_range(0..=cover.len());
    let part = harnack_assemble(&f, &g, &t, n, 1e-9)?;
    let rest = integrate_elementary(&f, &g, &cover[n..].iter().fold(ElementarySet::empty(), |u, s| u.union(s)))?.value;
    let truncated = part.total.value.clone() - part.on_t.value.clone() - part.series_partial.clone() - rest;
    let full = harnack_assemble(&f, &g, &t, cover.len(), 1e-9)?;
    let inputs = vec![t.to_string(), f.to_string(), g.to_string(), n.to_string()];
    Ok(Trial::new(inputs)
        .exact(abs_sum([truncated, full.identity_residual.clone()]))
        .detail("cover", cover.len() as u64)
        .detail("terms", n as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_a_few_trials() {
        for suite in Suite::ALL {
            let recs = run_suite(suite, 5, 3, false);
            assert!(recs.iter().all(|r| r.status == Status::Pass), "{}: {:?}", suite.name(), recs);
            assert_eq!(summarize(suite.name(), 3, &recs).status, Status::Pass);
        }
    }

    #[test]
    fn parallel_and_sequential_records_agree() {
        assert_eq!(run_suite(Suite::Additivity, 8, 9, true), run_suite(Suite::Additivity, 8, 9, false));
    }

    #[test]
    fn jump_tagged_partition_is_valid() {
        let (a, b) = hull();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
            let (c, d) = ordered(&mut rng, &a, &b);
            let p = jump_tagged(&f, &c, &d).unwrap();
            assert_eq!(p.nodes().first(), Some(&c));
            assert_eq!(p.nodes().last(), Some(&d));
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::select("all").unwrap().len(), 7);
        assert!(Suite::select("nope").is_none());
    }
}
