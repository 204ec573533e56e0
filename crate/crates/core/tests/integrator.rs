mod common;

use common::{step_sum, step_sum_over, telescoped};
use gaugeks_core::integrator::{
    convert_interval_type, integrate, integrate_elementary, integrate_gauge_oracle, integrate_over_set,
    inclusion_exclusion_chain, inclusion_exclusion_pair, IntervalKind, OracleConfig,
};
use gaugeks_core::random;
use gaugeks_core::scalar::{int, rat};
use gaugeks_core::{ElementarySet, Interval, PiecewiseFunction, Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hull() -> (Rational, Rational) {
    (int(0), int(2))
}

fn ordered_pair(rng: &mut ChaCha8Rng, a: &Rational, b: &Rational) -> (Rational, Rational) {
    loop {
        let (x, y) = (random::grid_point_closed(rng, a, b), random::grid_point_closed(rng, a, b));
        if x != y {
            return if x < y { (x, y) } else { (y, x) };
        }
    }
}

fn set_of(i: Interval) -> ElementarySet {
    ElementarySet::from_interval(i)
}

#[test]
fn interval_kinds_agree_with_set_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (a, b) = hull();
    for _ in 0..300 {
        let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let g = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let (c, d) = ordered_pair(&mut rng, &a, &b);
        for kind in IntervalKind::ALL {
            let via_kind = convert_interval_type(&f, &g, &c, &d, kind).unwrap().value;
            let s = set_of(kind.interval(c.clone(), d.clone()).unwrap());
            assert_eq!(via_kind, integrate_over_set(&f, &g, &s).unwrap().value, "{kind:?} on [{c}, {d}]");
            assert_eq!(via_kind, step_sum_over(&f, &g, &s));
        }
    }
}

#[test]
fn plain_integral_matches_the_brute_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (a, b) = hull();
    for _ in 0..300 {
        let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 4, 3).unwrap();
        let (c, d) = ordered_pair(&mut rng, &a, &b);
        assert_eq!(integrate(&f, &g, &c, &d).unwrap().value, step_sum(&f, |t| g.eval(t), &c, &d));
    }
}

#[test]
fn continuous_integrator_telescopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (a, b) = hull();
    for _ in 0..300 {
        let f = PiecewiseFunction::polynomial(a.clone(), b.clone(), random::polynomial(&mut rng, 4)).unwrap();
        let g = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let s = random::elementary_set(&mut rng, &a, &b, 4);
        let mut cuts = g.breakpoints().to_vec();
        cuts.extend(s.endpoints());
        let h = |t: &Rational| if s.contains(t) { g.eval(t) } else { Scalar::zero() };
        assert_eq!(integrate_over_set(&f, &g, &s).unwrap().value, telescoped(&f, h, &cuts, &a, &b));
        // no jumps: every endpoint attachment gives the same value
        let (c, d) = ordered_pair(&mut rng, &a, &b);
        let base = integrate(&f, &g, &c, &d).unwrap().value;
        for kind in IntervalKind::ALL {
            assert_eq!(convert_interval_type(&f, &g, &c, &d, kind).unwrap().value, base);
        }
    }
}

#[test]
fn elementary_sets_are_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (a, b) = hull();
    for _ in 0..300 {
        let f = random::piecewise_polynomial(&mut rng, &a, &b, 5, 2).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 5, 2).unwrap();
        let e = random::elementary_set(&mut rng, &a, &b, 6);
        let by_parts = integrate_elementary(&f, &g, &e).unwrap().value;
        assert_eq!(by_parts, integrate_over_set(&f, &g, &e).unwrap().value, "{e}");
    }
}

#[test]
fn inclusion_exclusion_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (a, b) = hull();
    for _ in 0..150 {
        let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 3, 2).unwrap();
        let p = rng.gen_range(2..=6);
        let sets: Vec<ElementarySet> = (0..p).map(|_| random::elementary_set(&mut rng, &a, &b, 3)).collect();
        let pair = inclusion_exclusion_pair(&f, &g, &sets[0], &sets[1]).unwrap();
        assert_eq!(pair.s1.value + pair.s2.value, pair.union.value + pair.intersection.value);
        let union = sets.iter().fold(ElementarySet::empty(), |u, s| u.union(s));
        assert_eq!(inclusion_exclusion_chain(&f, &g, &sets).unwrap().value, integrate_over_set(&f, &g, &union).unwrap().value);
    }
}

#[test]
fn linear_in_the_integrand() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (a, b) = hull();
    for _ in 0..200 {
        let f = random::piecewise_polynomial(&mut rng, &a, &b, 4, 2).unwrap();
        let g1 = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let g2 = random::piecewise_polynomial(&mut rng, &a, &b, 4, 2).unwrap();
        let (c1, c2) = (rat(rng.gen_range(-9..=9), 4), rat(rng.gen_range(-9..=9), 3));
        let s = random::elementary_set(&mut rng, &a, &b, 4);
        let combo = PiecewiseFunction::linear_combination(&c1, &g1, &c2, &g2).unwrap();
        let lhs = integrate_over_set(&f, &combo, &s).unwrap().value;
        let rhs = Scalar::from(&c1) * integrate_over_set(&f, &g1, &s).unwrap().value
            + Scalar::from(&c2) * integrate_over_set(&f, &g2, &s).unwrap().value;
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn reversal_and_empty_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let (a, b) = hull();
    for _ in 0..200 {
        let f = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &a, &b, 3, 2).unwrap();
        let (c, d) = ordered_pair(&mut rng, &a, &b);
        assert_eq!(integrate(&f, &g, &d, &c).unwrap().value, -integrate(&f, &g, &c, &d).unwrap().value);
        assert!(integrate(&f, &g, &c, &c).unwrap().value.is_zero());
    }
}

#[test]
fn oracle_agrees_with_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let (a, b) = hull();
    let cfg = OracleConfig::with_tol(1e-9);
    for _ in 0..100 {
        let f = random::step_function(&mut rng, &a, &b, 6).unwrap();
        let g = PiecewiseFunction::polynomial(a.clone(), b.clone(), random::polynomial(&mut rng, 3)).unwrap();
        let (c, d) = ordered_pair(&mut rng, &a, &b);
        let exact = integrate(&f, &g, &c, &d).unwrap().value.to_f64();
        let approx = integrate_gauge_oracle(&f, &g, &c, &d, &cfg).unwrap().value.to_f64();
        assert!((exact - approx).abs() <= 1e-9, "{exact} vs {approx}");
    }
}

#[test]
fn reference_values() {
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    assert_eq!(integrate(&id, &id, &int(0), &int(1)).unwrap().value, Scalar::from(rat(1, 2)));
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..50 {
        let tau = random::grid_point_closed(&mut rng, &int(0), &int(1));
        let chi = PiecewiseFunction::indicator(int(0), int(1), &set_of(Interval::closed(tau.clone(), int(1)).unwrap())).unwrap();
        let g = random::piecewise_polynomial(&mut rng, &int(0), &int(1), 4, 3).unwrap();
        let v = integrate(&chi, &g, &int(0), &int(1)).unwrap().value;
        let expect = if tau == int(0) { Scalar::zero() } else { g.eval(&tau) };
        assert_eq!(v, expect, "tau = {tau}");
    }
}
