//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Stdio};
use std::time::Instant;

use common::{step_sum, step_sum_over};
use gaugeks_core::expr::Expr;
use gaugeks_core::functions::{FunctionBuilder, PieceSpec};
use gaugeks_core::harnack::{harnack_assemble, harnack_extract_t, kh_sup_series, ClosedSetDescription};
use gaugeks_core::integrator::{
    convert_interval_type, inclusion_exclusion_chain, inclusion_exclusion_pair, integrate, integrate_elementary,
    integrate_gauge_oracle, integrate_over_set, IntervalKind, OracleConfig,
};
use gaugeks_core::partitions::{cousin_with_depth, random_fine_partition, rs_sum_df_g};
use gaugeks_core::random;
use gaugeks_core::scalar::{best_rational, int, rat, to_f64};
use gaugeks_core::sequences::{check_equi_integrability, trial_rng, EquiVerdict, FunctionSequence, Sampling};
use gaugeks_core::{ElementarySet, Gauge, Interval, PiecewiseFunction, Rational, Scalar};
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ordered(rng: &mut ChaCha8Rng, a: &Rational, b: &Rational) -> (Rational, Rational) {
    let mut pts = random::grid_points(rng, a, b, 2);
    let hi = pts.pop().unwrap();
    (pts.pop().unwrap(), hi)
}

fn union(sets: &[ElementarySet]) -> ElementarySet {
    sets.iter().fold(ElementarySet::empty(), |u, s| u.union(s))
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (a, b) = (int(0), int(2));
    let start = Instant::now();
    let cases = 500;
    for k in 0..cases {
        let f = random::step_function(&mut rng, &a, &b, 8).map_err(|e| e.to_string())?;
        let g = random::step_function(&mut rng, &a, &b, 8).map_err(|e| e.to_string())?;
        let (c, d) = if rng.gen_bool(0.1) { (a.clone(), b.clone()) } else { ordered(&mut rng, &a, &b) };
        for kind in IntervalKind::ALL {
            let s = ElementarySet::from_interval(kind.interval(c.clone(), d.clone()).unwrap());
            let got = convert_interval_type(&f, &g, &c, &d, kind).map_err(|e| e.to_string())?.value;
            let direct = integrate_over_set(&f, &g, &s).map_err(|e| e.to_string())?.value;
            ensure!(got == direct, "case {k}, {}: {got} vs {direct}", kind.name());
            ensure!(got == step_sum_over(&f, &g, &s), "case {k}, {}: oracle disagrees", kind.name());
        }
        let plain = integrate(&f, &g, &c, &d).map_err(|e| e.to_string())?.value;
        ensure!(plain == step_sum(&f, |t| g.eval(t), &c, &d), "case {k}: plain integral vs oracle");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("{cases} pairs, zero residual, {secs:.2} s"))
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (a, b) = (int(0), int(2));
    let cfg = OracleConfig::with_tol(1e-9);
    let mut worst = 0f64;
    for k in 0..500 {
        let f = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let g = PiecewiseFunction::polynomial(a.clone(), b.clone(), random::polynomial(&mut rng, 3)).unwrap();
        let (c, d) = ordered(&mut rng, &a, &b);
        let exact = integrate(&f, &g, &c, &d).map_err(|e| e.to_string())?.value.to_f64();
        let approx = integrate_gauge_oracle(&f, &g, &c, &d, &cfg).map_err(|e| e.to_string())?.value.to_f64();
        worst = worst.max((exact - approx).abs());
        ensure!((exact - approx).abs() <= 1e-9, "case {k}: {exact} vs {approx}");
    }
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let half = integrate(&id, &id, &int(0), &int(1)).map_err(|e| e.to_string())?;
    ensure!(half.exact && half.value == Scalar::from(rat(1, 2)), "∫ t dt = {half}");
    for k in 0..50 {
        // τ in (0, 1]; at τ = 0 the indicator is constant
        let tau = int(1) - random::grid_point_closed(&mut rng, &int(0), &int(1)) * rat(359, 360);
        let chi = PiecewiseFunction::indicator(int(0), int(1), &ElementarySet::from_interval(Interval::closed(tau.clone(), int(1)).unwrap()))
            .unwrap();
        let g = random::piecewise_polynomial(&mut rng, &int(0), &int(1), 4, 3).unwrap();
        let v = integrate(&chi, &g, &int(0), &int(1)).map_err(|e| e.to_string())?;
        ensure!(v.exact && v.value == g.eval(&tau), "case {k}, τ = {tau}: {} vs {}", v.value, g.eval(&tau));
    }
    Ok(format!("500 step×polynomial cases, max |Δ| = {worst:.1e}; ∫t dt = 1/2; 50 indicator cases exact"))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (a, b) = (int(0), int(2));
    for k in 0..500 {
        let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 3, 2).unwrap();
        let e = random::elementary_set(&mut rng, &a, &b, 6);
        let err = |e: gaugeks_core::Error| e.to_string();
        let whole = integrate_elementary(&f, &g, &e).map_err(err)?.value;
        let mut parts = Scalar::zero();
        for c in e.components() {
            parts = parts + integrate_over_set(&f, &g, &ElementarySet::from_interval(c.clone())).map_err(err)?.value;
        }
        ensure!(whole == parts, "case {k}: componentwise sum differs on {e}");
        ensure!(whole == step_sum_over(&f, &g, &e), "case {k}: oracle differs on {e}");
        let p = rng.gen_range(2..=6);
        let sets: Vec<ElementarySet> = (0..p).map(|_| random::elementary_set(&mut rng, &a, &b, 3)).collect();
        let u = union(&sets);
        let direct = step_sum_over(&f, &g, &u);
        let chain = inclusion_exclusion_chain(&f, &g, &sets).map_err(err)?.value;
        ensure!(chain == direct, "case {k}: chain over {p} sets gives {chain}, oracle {direct}");
        let pair = inclusion_exclusion_pair(&f, &g, &sets[0], &sets[1]).map_err(err)?;
        let lhs = pair.s1.value + pair.s2.value;
        let rhs = pair.union.value + pair.intersection.value;
        ensure!(lhs == rhs, "case {k}: pair identity {lhs} vs {rhs}");
    }
    Ok("500 instances (p ≤ 6), zero residual".into())
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (a, b) = (int(-1), int(3));
    let mut deepest = 0;
    for k in 0..1000 {
        let gauge = random::gauge(&mut rng, &a, &b, 6, 4).unwrap();
        let out = cousin_with_depth(&gauge, &a, &b).map_err(|e| e.to_string())?;
        ensure!(out.partition.is_delta_fine(&gauge), "gauge {k} ({gauge}): not fine");
        let bound = to_f64(&((&b - &a) / gauge.min_plateau())).log2() + 2.0 * gauge.overrides().len() as f64;
        ensure!(out.max_depth as f64 <= bound, "gauge {k}: depth {} > {bound}", out.max_depth);
        deepest = deepest.max(out.max_depth);
    }
    Ok(format!("1000 gauges fine within the depth bound (deepest {deepest})"))
}

fn random_cover(rng: &mut ChaCha8Rng, a: &Rational, b: &Rational) -> Vec<ElementarySet> {
    let k = rng.gen_range(1..=5);
    let pts = random::grid_points(rng, a, b, 2 * k);
    let mut comps: Vec<Interval> = pts.chunks(2).map(|w| Interval::open(w[0].clone(), w[1].clone()).unwrap()).collect();
    if rng.gen_bool(0.3) {
        comps.push(Interval::closed_open(a.clone(), (a + comps[0].lo()) / int(2)).unwrap());
    }
    comps.shuffle(rng);
    let groups = rng.gen_range(1..=comps.len());
    let mut cover = vec![ElementarySet::empty(); groups];
    for (i, c) in comps.into_iter().enumerate() {
        let slot = if i < groups { i } else { rng.gen_range(0..groups) };
        cover[slot] = cover[slot].union(&ElementarySet::from_interval(c));
    }
    cover
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (a, b) = (int(0), int(2));
    let hull = Interval::closed(a.clone(), b.clone()).unwrap();
    for k in 0..200 {
        let cover = random_cover(&mut rng, &a, &b);
        let t = ClosedSetDescription::finite(hull.clone(), cover.clone()).unwrap();
        let t_set = ElementarySet::from_interval(hull.clone()).difference(&union(&cover));
        let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 3, 2).unwrap();
        let r = harnack_assemble(&f, &g, &t, cover.len(), 1e-9).map_err(|e| e.to_string())?;
        ensure!(r.identity_residual.is_zero(), "case {k}: residual {}", r.identity_residual);
        let on_t = step_sum_over(&f, &g, &t_set);
        ensure!(r.on_t.value == on_t, "case {k}: ∫_T = {} vs oracle {on_t}", r.on_t.value);
        let series: Scalar = cover.iter().map(|e| step_sum_over(&f, &g, e)).fold(Scalar::zero(), |x, y| x + y);
        let total = step_sum_over(&f, &g, &ElementarySet::from_interval(hull.clone()));
        ensure!(total.clone() - on_t.clone() - series == Scalar::zero(), "case {k}: oracle identity fails");
        let n = rng.gen_range(0..=cover.len());
        let whole = ElementarySet::from_interval(hull.clone());
        let extracted = harnack_extract_t(&f, &g, &whole, &t, n, 1e-9).map_err(|e| e.to_string())?;
        ensure!(extracted.value == on_t, "case {k}: extraction {} vs {on_t}", extracted.value);
    }
    Ok("200 finite complements, assembly and extraction residuals exactly 0".into())
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let cantor = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap();
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
    for n in [5usize, 10, 20] {
        let r = harnack_assemble(&id, &one, &cantor, n, 1e-9).map_err(|e| e.to_string())?;
        let tail = Scalar::from(rat(2, 3).pow(n as i32));
        ensure!(r.total.value == Scalar::from(int(1)) && r.on_t.value.is_zero(), "N = {n}: total {} on_T {}", r.total.value, r.on_t.value);
        ensure!(r.series_partial == Scalar::from(Rational::one()) - tail.clone(), "N = {n}: series {}", r.series_partial);
        ensure!(r.identity_residual == tail && r.tail_bound == Some(tail.clone()), "N = {n}: residual {} tail {:?}", r.identity_residual, r.tail_bound);
    }
    let chi = PiecewiseFunction::indicator(int(0), int(1), &ElementarySet::from_interval(Interval::closed(rat(1, 2), int(1)).unwrap())).unwrap();
    for n in [1usize, 2, 5, 10, 20] {
        let r = harnack_assemble(&chi, &one, &cantor, n, 1e-9).map_err(|e| e.to_string())?;
        ensure!(r.identity_residual.is_zero(), "χ, N = {n}: residual {}", r.identity_residual);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3} s");
    Ok(format!("tail (2/3)^N reproduced for N = 5, 10, 20; χ residual 0; {secs:.3} s"))
}

fn oscillating() -> PiecewiseFunction {
    let mut b = FunctionBuilder::new();
    b.piece(
        Interval::open_closed(int(0), int(1)).unwrap(),
        PieceSpec::Expr {
            expr: Expr::parse("2*t*cos(pi/t^2) + (2*pi/t)*sin(pi/t^2)").unwrap(),
            primitive: Some(Expr::parse("t^2*cos(pi/t^2)").unwrap()),
        },
    )
    .value(int(0), Scalar::zero());
    b.build().unwrap()
}

fn big_f(t: f64) -> f64 {
    t * t * (std::f64::consts::PI / (t * t)).cos()
}

fn turning_point(k: usize) -> Rational {
    if k == 1 {
        return int(1);
    }
    best_rational(1.0 / (k as f64).sqrt(), 1 << 40).unwrap()
}

fn ac7() -> Outcome {
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let g = oscillating();
    let mut notes = Vec::new();
    for (num, den) in [(1i64, 2i64), (1, 10)] {
        let r = integrate_gauge_oracle(&id, &g, &rat(num, den), &int(1), &OracleConfig::default()).map_err(|e| e.to_string())?;
        let expect = big_f(1.0) - big_f(num as f64 / den as f64);
        let err = (r.value.to_f64() - expect).abs();
        ensure!(err < 1e-6, "ε = {num}/{den}: {} vs {expect}", r.value);
        notes.push(format!("ε={num}/{den} err {err:.1e}"));
    }
    let t = ClosedSetDescription::custom(Interval::closed(int(0), int(1)).unwrap(), |k| {
        ElementarySet::from_interval(Interval::open(turning_point(k + 1), turning_point(k)).unwrap())
    })
    .with_tail_length(|n| turning_point(n + 1));
    let partials = kh_sup_series(&g, &t, 400).map_err(|e| e.to_string())?;
    ensure!(partials.windows(2).all(|w| w[1] >= w[0]), "partial sums not monotone");
    let depth = partials.iter().position(|s| *s > 10.0).map(|i| i + 1);
    let Some(depth) = depth else { return Err(format!("sup-series stays at {} after 400 terms", partials.last().unwrap())) };
    Ok(format!("{}; sup-series exceeds 10 at N = {depth}", notes.join(", ")))
}

/// `g_n = n χ_(0,1/n)` on `[0, 1]`.
fn spikes() -> FunctionSequence {
    FunctionSequence::new(|n| {
        let s = ElementarySet::from_interval(Interval::open(int(0), rat(1, n as i64))?);
        Ok(PiecewiseFunction::indicator(int(0), int(1), &s)?.scale(&int(n as i64)))
    })
}

fn identity_seq(lo: Rational, hi: Rational) -> FunctionSequence {
    FunctionSequence::constant(PiecewiseFunction::identity(lo, hi).unwrap())
}

/// Step function on `[lo, hi]` agreeing with `f` there.
fn slice(f: &PiecewiseFunction, lo: &Rational, hi: &Rational) -> PiecewiseFunction {
    let mut bps = vec![lo.clone()];
    bps.extend(f.breakpoints().iter().filter(|t| *t > lo && *t < hi).cloned());
    bps.push(hi.clone());
    let exact = |s: Scalar| s.as_rational().unwrap().clone();
    let gaps = bps.windows(2).map(|w| exact(f.eval(&((&w[0] + &w[1]) / int(2))))).collect();
    let points = bps.iter().map(|t| exact(f.eval(t))).collect();
    PiecewiseFunction::step(bps, gaps, points).unwrap()
}

/// `δ = (hi − lo)/64`; any δ-fine sum of `g + h/n` against the identity errs
/// by at most `2δ` per side of each breakpoint times its jumps.
fn sized_gauge(lo: &Rational, hi: &Rational, g: &PiecewiseFunction, h: &PiecewiseFunction) -> (Gauge, f64) {
    let delta = (hi - lo) / int(64);
    let osc = |f: &PiecewiseFunction, p: &Rational| {
        let side = |j: gaugeks_core::Result<Scalar>| j.map_or(0.0, |v| v.abs().to_f64());
        side(f.jump_minus(p)) + side(f.jump_plus(p))
    };
    let mut bps: Vec<Rational> = g.breakpoints().iter().chain(h.breakpoints()).cloned().collect();
    bps.sort();
    bps.dedup();
    let total: f64 = bps.iter().map(|p| osc(g, p) + osc(h, p)).sum();
    let eta = 8.0 * to_f64(&delta) * total + 1e-9;
    (Gauge::constant(lo.clone(), hi.clone(), delta).unwrap(), eta)
}

fn family(g: &PiecewiseFunction, h: &PiecewiseFunction) -> FunctionSequence {
    let (g, h) = (g.clone(), h.clone());
    FunctionSequence::new(move |n| PiecewiseFunction::linear_combination(&int(1), &g, &rat(1, n as i64), &h))
}

fn ac8() -> Outcome {
    let (a, b) = (int(0), int(1));
    let f = identity_seq(a.clone(), b.clone());
    let err = |e: gaugeks_core::Error| e.to_string();
    // spikes: random step-plus-override gauges and constant gauges down to 2^-10
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut gauges: Vec<Gauge> = (0..20).map(|_| random::gauge(&mut rng, &a, &b, 4, 3).unwrap()).collect();
    gauges.extend([1, 4, 7, 10].map(|k| Gauge::constant(a.clone(), b.clone(), Rational::new(1.into(), (1u64 << k).into())).unwrap()));
    for (k, gauge) in gauges.iter().enumerate() {
        let v = check_equi_integrability(&f, &spikes(), gauge, 0.5, 1 << 40, 10_000, 7 + k as u64, &Sampling::default()).map_err(err)?;
        let EquiVerdict::Violation { n, partition, gap, .. } = v else { return Err(format!("no witness for {gauge}")) };
        ensure!(partition.is_delta_fine(gauge), "witness for {gauge} is not fine");
        let exact = (rs_sum_df_g(&f.get(n).unwrap(), &spikes().get(n).unwrap(), &partition) - Scalar::one()).abs().to_f64();
        ensure!(exact >= 0.5 && (exact - gap).abs() < 1e-12, "witness gap {gap} vs recomputed {exact}");
    }
    // the constant family g = χ_[1/2,1] + t
    let jump = ElementarySet::from_interval(Interval::closed(rat(1, 2), int(1)).unwrap());
    let g = PiecewiseFunction::linear_combination(&int(1), &PiecewiseFunction::indicator(a.clone(), b.clone(), &jump).unwrap(), &int(1), &PiecewiseFunction::identity(a.clone(), b.clone()).unwrap()).unwrap();
    let v = check_equi_integrability(&f, &FunctionSequence::constant(g), &Gauge::constant(a.clone(), b.clone(), rat(1, 64)).unwrap(), 0.1, 4, 10_000, 7, &Sampling::default()).map_err(err)?;
    ensure!(!v.is_violation(), "constant family violated: {v:?}");
    // glued gauges on 100 random step families
    let mut rng = ChaCha8Rng::seed_from_u64(118);
    for k in 0..100 {
        let g = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let h = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let c = random::grid_points(&mut rng, &a, &b, 1).remove(0);
        let (left, eta_l) = sized_gauge(&a, &c, &slice(&g, &a, &c), &slice(&h, &a, &c));
        let (right, eta_r) = sized_gauge(&c, &b, &slice(&g, &c, &b), &slice(&h, &c, &b));
        let eta = eta_l.max(eta_r);
        for (lo, hi, gauge) in [(&a, &c, &left), (&c, &b, &right)] {
            let half = family(&slice(&g, lo, hi), &slice(&h, lo, hi));
            let v = check_equi_integrability(&identity_seq(lo.clone(), hi.clone()), &half, gauge, eta, 8, 20, k, &Sampling::default()).map_err(err)?;
            ensure!(!v.is_violation(), "family {k}: half [{lo},{hi}] fails");
        }
        let glued = left.glue(&right).map_err(err)?;
        let sampling = Sampling { forced_nodes: vec![], forced_tags: vec![c.clone()] };
        let whole = family(&g, &h);
        let v = check_equi_integrability(&f, &whole, &glued, 2.0 * eta, 8, 20, k, &sampling).map_err(err)?;
        ensure!(!v.is_violation(), "family {k}: glued gauge fails at 2η");
        let id = PiecewiseFunction::identity(a.clone(), b.clone()).unwrap();
        for trial in 0..5 {
            let p = random_fine_partition(&glued, &a, &b, &mut trial_rng(k, trial), &[], &sampling.forced_tags).map_err(err)?;
            let (l, r) = p.split_at(&c).map_err(err)?;
            ensure!(l.is_delta_fine(&left) && r.is_delta_fine(&right), "family {k}: halves not fine");
            let gn = whole.get(trial + 1).unwrap();
            ensure!(rs_sum_df_g(&id, &gn, &p) == rs_sum_df_g(&id, &gn, &l) + rs_sum_df_g(&id, &gn, &r), "family {k}: sums do not add");
        }
    }
    Ok(format!("spikes caught for {} gauges; constant family clean in 10000 trials; 100 glued families pass", gauges.len()))
}

fn ac9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ledgers = Vec::new();
    for run in ["first", "second"] {
        let out_dir = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_gaugeks"))
            .args(["verify", "--suite", "all", "--seed", "7"])
            .env("GAUGEKS_LEDGER_DIR", &out_dir)
            .stderr(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        ensure!(status.success(), "{run} run exited with {status}");
        ledgers.push(std::fs::read(out_dir.join("verify-all-seed7.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure!(!ledgers[0].is_empty(), "empty ledger");
    ensure!(ledgers[0] == ledgers[1], "ledgers differ");
    let lines = ledgers[0].iter().filter(|c| **c == b'\n').count();
    Ok(format!("two runs, {lines} identical lines"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] =
        [("AC1", ac1), ("AC2", ac2), ("AC3", ac3), ("AC4", ac4), ("AC5", ac5), ("AC6", ac6), ("AC7", ac7), ("AC8", ac8), ("AC9", ac9)];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(note) => println!("[PASS] {name} {note} ({secs:.2} s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} {why} ({secs:.2} s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
