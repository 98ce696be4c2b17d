use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lojax_core::descent::RgdOptions;
use lojax_core::linalg::DEFAULT_EIG_TOL;
use lojax_core::loja::default_radii;
use lojax_core::stationary::DEFAULT_TOL;
use lojax_core::{enumerate_stationary, estimate_exponent, make_example1, make_random, solve_rgd, sym_eigh, SpherePoint};

fn eigh(c: &mut Criterion) {
    let mut g = c.benchmark_group("sym_eigh");
    g.sample_size(10);
    for n in [10, 50, 200] {
        let a = make_random(n, 1, (-1.0, 1.0), 0.0).unwrap().a().clone();
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| sym_eigh(black_box(a), DEFAULT_EIG_TOL).unwrap())
        });
    }
    g.finish();
}

fn enumerate(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate_stationary");
    for n in [3, 10, 30] {
        let p = make_random(n, 2, (-1.0, 1.0), 1.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| enumerate_stationary(black_box(p), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn estimate(c: &mut Criterion) {
    let p = make_example1();
    let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
    let top = set.points[0].clone();
    let radii = default_radii();
    let mut g = c.benchmark_group("estimate_exponent");
    g.sample_size(10);
    g.bench_function("example1_2000x7", |b| {
        b.iter(|| estimate_exponent(&p, black_box(&top), &radii, 2000, 1).unwrap())
    });
    let p10 = make_random(10, 3, (-1.0, 1.0), 1.0).unwrap();
    let sp = enumerate_stationary(&p10, DEFAULT_TOL).unwrap().points[0].clone();
    g.bench_function("random10_2000x7", |b| {
        b.iter(|| estimate_exponent(&p10, black_box(&sp), &radii, 2000, 1).unwrap())
    });
    g.finish();
}

fn descent(c: &mut Criterion) {
    let p = make_example1();
    let x0 = SpherePoint::normalize(vec![1f64.sin(), 1f64.cos()]).unwrap();
    let mut g = c.benchmark_group("solve_rgd");
    g.sample_size(10);
    for iters in [1_000, 100_000] {
        let opts = RgdOptions {
            max_iters: iters,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new("example1", iters), &opts, |b, opts| {
            b.iter(|| solve_rgd(&p, black_box(&x0), *opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, eigh, enumerate, estimate, descent);
criterion_main!(benches);
