use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gaugeks_core::harnack::{harnack_assemble, ClosedSetDescription};
use gaugeks_core::integrator::{integrate, integrate_elementary, integrate_gauge_oracle, OracleConfig};
use gaugeks_core::partitions::{cousin_partition, random_fine_partition};
use gaugeks_core::random;
use gaugeks_core::scalar::{int, rat};
use gaugeks_core::PiecewiseFunction;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn closed_form(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = (int(0), int(2));
    let f = random::step_function(&mut rng, &a, &b, 8).unwrap();
    let g = random::piecewise_polynomial(&mut rng, &a, &b, 4, 3).unwrap();
    let e = random::elementary_set(&mut rng, &a, &b, 6);
    c.bench_function("integrate/step_x_poly", |bch| bch.iter(|| integrate(black_box(&f), black_box(&g), &a, &b).unwrap()));
    c.bench_function("integrate/elementary_set", |bch| bch.iter(|| integrate_elementary(black_box(&f), black_box(&g), &e).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (int(0), int(2));
    let f = random::step_function(&mut rng, &a, &b, 6).unwrap();
    let g = PiecewiseFunction::polynomial(a.clone(), b.clone(), random::polynomial(&mut rng, 3)).unwrap();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(20);
    for tol in [1e-6, 1e-9] {
        group.bench_with_input(BenchmarkId::from_parameter(tol), &tol, |bch, tol| {
            bch.iter(|| integrate_gauge_oracle(&f, &g, &a, &b, &OracleConfig::with_tol(*tol)).unwrap())
        });
    }
    group.finish();
}

fn partitions(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (int(-1), int(3));
    let gauge = random::gauge(&mut rng, &a, &b, 6, 4).unwrap();
    c.bench_function("partitions/cousin", |bch| bch.iter(|| cousin_partition(black_box(&gauge), &a, &b).unwrap()));
    c.bench_function("partitions/random_fine", |bch| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        bch.iter(|| random_fine_partition(&gauge, &a, &b, &mut rng, &[], &[]).unwrap())
    });
}

fn cantor(c: &mut Criterion) {
    let t = ClosedSetDescription::cantor(int(0), int(1), rat(1, 3)).unwrap();
    let id = PiecewiseFunction::identity(int(0), int(1)).unwrap();
    let one = PiecewiseFunction::constant(int(0), int(1), int(1)).unwrap();
    let mut group = c.benchmark_group("harnack_cantor");
    for n in [5usize, 10, 20] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, n| {
            bch.iter(|| harnack_assemble(&id, &one, &t, *n, 1e-9).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, closed_form, oracle, partitions, cantor);
criterion_main!(benches);
