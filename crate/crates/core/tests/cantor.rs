use std::time::Instant;

use gaugeks_core::harnack::{harnack_assemble, ClosedSetDescription};
use gaugeks_core::scalar::{int, rat};
use gaugeks_core::{ElementarySet, Interval, PiecewiseFunction, Rational, Scalar};
use num_traits::One;

fn cantor() -> ClosedSetDescription {
    ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap()
}

#[test]
fn identity_tail_matches_remaining_length() {
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
    for n in [5usize, 10, 20] {
        let start = Instant::now();
        let r = harnack_assemble(&id, &one, &cantor(), n, 1e-9).unwrap();
        eprintln!("N = {n}: {:?}", start.elapsed());
        // lengths removed by generation k: 2^{k-1} / 3^k
        let mut series = Rational::from_integer(0.into());
        for k in 1..=n as u32 {
            series += Rational::new((1u64 << (k - 1)).into(), 3u64.pow(k).into());
        }
        let tail = Rational::one() - &series;
        assert_eq!(r.series_partial, Scalar::from(series));
        assert_eq!(r.total.value, Scalar::one());
        assert_eq!(r.on_t.value, Scalar::zero());
        assert_eq!(r.identity_residual, Scalar::from(tail.clone()));
        assert_eq!(r.tail_bound, Some(Scalar::from(tail)));
        assert!(r.consistent);
    }
}

#[test]
fn jump_inside_first_gap_closes_exactly() {
    let chi = PiecewiseFunction::indicator(
        int(0),
        int(1),
        &ElementarySet::from_interval(Interval::closed(rat(1, 2), int(1)).unwrap()),
    )
    .unwrap();
    let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
    for n in [1usize, 2, 7, 20] {
        let r = harnack_assemble(&chi, &one, &cantor(), n, 1e-9).unwrap();
        assert_eq!(r.identity_residual, Scalar::from(int(0)));
        assert_eq!(r.tail_bound, Some(Scalar::from(int(0))));
    }
}

#[test]
fn exhausting_the_complement_converges_to_one() {
    use gaugeks_core::sequences::convergence_limit;
    use gaugeks_core::FunctionSequence;
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
    let g = FunctionSequence::new(move |n| {
        let s = cantor().elements(n as usize).iter().fold(ElementarySet::empty(), |acc, e| acc.union(e));
        one.restrict(&s)
    });
    let r = convergence_limit(&FunctionSequence::constant(id), &g, 1e-2, 64).unwrap();
    let expect = Rational::one() - rat(2, 3).pow(r.n as i32);
    assert_eq!(r.limit.value, Scalar::from(expect));
    assert!((r.limit.value.to_f64() - 1.0).abs() <= 1e-2, "n = {}", r.n);
}
