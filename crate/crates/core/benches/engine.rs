//! Throughput of the interaction step and the empirical transform,
//! data-parallel path against the sequential one.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kinetic_core::fourier::{empirical_cf, XiGrid};
use kinetic_core::kinetics::{InteractionLaw, ScalingRegime};
use kinetic_core::montecarlo::Ensemble;
use kinetic_core::sampling::{InitialCondition, RandomCoefficient};

fn scaled_law() -> InteractionLaw {
    ScalingRegime::AdvectionDiffusion {
        lambda: 3.5,
        sigma_sq: 6.0,
        eta: RandomCoefficient::uniform_symmetric_unit(),
    }
    .materialize(1e-3)
    .unwrap()
    .0
}

fn bench_step(c: &mut Criterion) {
    let law = scaled_law();
    let f0 = InitialCondition::UniformInterval(-1.0, 3.0);
    let mut group = c.benchmark_group("step");
    for &n in &[10_000usize, 100_000] {
        group.throughput(Throughput::Elements(n as u64));
        let base = Ensemble::from_initial_condition(&f0, n, 1e-3, 7, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", n), &base, |b, base| {
            let mut e = base.clone();
            b.iter(|| e.step(&law));
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &base, |b, base| {
            let mut e = base.clone();
            b.iter(|| e.step_sequential(&law));
        });
    }
    group.finish();
}

fn bench_empirical_cf(c: &mut Criterion) {
    let f0 = InitialCondition::UniformInterval(-1.0, 3.0);
    let e = Ensemble::from_initial_condition(&f0, 50_000, 1e-3, 7, 1.0).unwrap();
    let grid = Arc::new(XiGrid::log_symmetric(1e-2, 1e2, 64).unwrap());
    let mut group = c.benchmark_group("empirical_cf");
    group.throughput(Throughput::Elements((e.len() * grid.len()) as u64));
    group.bench_function("grid_64_per_side", |b| {
        b.iter(|| empirical_cf(e.states(), &grid).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_step, bench_empirical_cf);
criterion_main!(benches);
