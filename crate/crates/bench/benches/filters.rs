use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::SeedableRng;
use skf_core::filters::{discrete_kf, error_trace, refine_to_depth};
use skf_core::systems::{random_system, SystemOptions};
use skf_core::{expm, simulate, DyadicGrid, LtiSystem};

fn system(state: usize, input: usize) -> LtiSystem {
    let mut rng = StdRng::seed_from_u64(17);
    random_system(&mut rng, &SystemOptions { state, input, output: 1, ..Default::default() })
}

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for p in [2usize, 8, 32] {
        let a = DMatrix::from_fn(p, p, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(p), &a, |b, a| b.iter(|| expm(black_box(a), 0.1).unwrap()));
    }
    group.finish();
}

fn bench_discrete_kf(c: &mut Criterion) {
    let sys = system(4, 2);
    let grid = DyadicGrid::new(1.0, 8, 6).unwrap();
    let path = simulate(&sys, &grid, 3).unwrap();
    let mut group = c.benchmark_group("discrete_kf");
    for n in [8usize, 64, 512] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| discrete_kf(&sys, &path, n).unwrap())
        });
    }
    group.finish();
}

fn bench_refine(c: &mut Criterion) {
    let sys = system(3, 0);
    let grid = DyadicGrid::new(1.0, 4, 4).unwrap();
    let path = simulate(&sys, &grid, 5).unwrap();
    c.bench_function("refine_to_depth/n4_k4", |b| b.iter(|| refine_to_depth(&sys, &path, 4, 4).unwrap()));
}

fn bench_error_trace(c: &mut Criterion) {
    let sys = system(4, 2);
    let coarse: Vec<f64> = (1..=16).map(|i| i as f64 / 16.0).collect();
    let fine: Vec<f64> = (1..=256).map(|i| i as f64 / 256.0).collect();
    c.bench_function("error_trace/16_vs_256", |b| b.iter(|| error_trace(&sys, &coarse, &fine, 1.0).unwrap()));
}

criterion_group!(benches, bench_expm, bench_discrete_kf, bench_refine, bench_error_trace);
criterion_main!(benches);
