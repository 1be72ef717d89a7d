use std::hint::black_box;

use cmpplab_core::harness::{all_pairs, compensate_ensemble, FamilyOptions};
use cmpplab_core::{
    martingale_test, mixed_poisson_pmf, ClaimLaw, Domain, MixingLaw, ProcessModel, Series,
    TestPlan, TimeGrid, DEFAULT_MAX_EVENTS,
};
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};

fn gamma_model() -> ProcessModel {
    ProcessModel::Cmpp {
        mixing: MixingLaw::gamma(2.0, 1.0).unwrap(),
        claims: ClaimLaw::exponential(1.0).unwrap(),
    }
}

fn pmf(c: &mut Criterion) {
    let law = MixingLaw::gamma(3.7, 2.5).unwrap();
    let mut group = c.benchmark_group("mixed_poisson_pmf");
    for n in [0u64, 50, 5_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| mixed_poisson_pmf(&law, black_box(4.0), black_box(n)).unwrap())
        });
    }
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let model = gamma_model();
    let mut group = c.benchmark_group("simulate_ensemble");
    group.sample_size(20);
    for paths in [1_000usize, 10_000] {
        group.throughput(Throughput::Elements(paths as u64));
        group.bench_with_input(BenchmarkId::from_parameter(paths), &paths, |b, &paths| {
            b.iter(|| {
                model
                    .simulate_ensemble(2.0, paths, 7, Domain::Test, DEFAULT_MAX_EVENTS)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn martingale(c: &mut Criterion) {
    let model = gamma_model();
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0, 2.0]).unwrap();
    let calibration = model
        .simulate_ensemble(2.0, 5_000, 7, Domain::Calibration, DEFAULT_MAX_EVENTS)
        .unwrap();
    let calibration = compensate_ensemble(&calibration, &grid, 1.0).unwrap();
    let plan = TestPlan::calibrated(
        &calibration,
        &all_pairs(grid.len()),
        &FamilyOptions::default(),
    )
    .unwrap();
    let paths = model
        .simulate_ensemble(2.0, 20_000, 7, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let mut group = c.benchmark_group("martingale_test");
    group.sample_size(20);
    group.throughput(Throughput::Elements(paths.len() as u64));
    group.bench_function("compensate", |b| {
        b.iter(|| compensate_ensemble(&paths, &grid, 1.0).unwrap())
    });
    group.bench_function("test_m", |b| {
        b.iter_batched(
            || compensate_ensemble(&paths, &grid, 1.0).unwrap(),
            |series| martingale_test(&series, Series::M, &plan, 0.01).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, pmf, simulate, martingale);
criterion_main!(benches);
