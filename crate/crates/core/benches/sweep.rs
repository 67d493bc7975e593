//! Sequential against parallel frequency sweeps, plus the per-frame cost of
//! each filter update.

use std::sync::Arc;

use anc_core::algorithms::{ControlFilter, CostParams, Nlms, PenaltyNlms, RiemannianNlms};
use anc_core::cxla::ComplexMatrix;
use anc_core::exec::Execution;
use anc_core::harness::{build_default_scenario, frequency_sweep, Plant, Scenario, SignalSource};
use anc_core::manifold::GeneralizedStiefel;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const FREQUENCIES: [f64; 4] = [300.0, 500.0, 700.0, 900.0];

fn short_scenario() -> Scenario {
    Scenario { n_iterations: 2_000, ..build_default_scenario(500.0).unwrap() }
}

fn sweep(c: &mut Criterion) {
    let base = short_scenario();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let mut modes = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        modes.push(("parallel", Execution::Parallel));
    }
    for (name, exec) in modes {
        group.bench_with_input(BenchmarkId::new(name, FREQUENCIES.len()), &exec, |b, &exec| {
            b.iter(|| frequency_sweep(black_box(&FREQUENCIES), &base, 0.5, exec).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let scenario = short_scenario();
    let plant = Plant::build(&scenario).unwrap();
    let source = SignalSource::new(&scenario, plant.p.clone()).unwrap();
    let frame = source.frame(0);
    let (l, r) = (plant.g.cols(), plant.p.cols());
    let e = frame.error(&plant.g, &vec![Default::default(); l]).unwrap();
    let params = CostParams { gamma: plant.gamma, lambda: 10.0, mu0: 0.5 };

    let mut group = c.benchmark_group("step");
    let mut nlms = Nlms::new(plant.g.clone(), params, ComplexMatrix::zeros(l, r)).unwrap();
    group.bench_function("nlms", |b| b.iter(|| nlms.step(black_box(&frame.x), black_box(&e)).unwrap()));

    let a = Arc::new(plant.radiation.a().clone());
    let mut penalty = PenaltyNlms::new(plant.g.clone(), a, params, ComplexMatrix::zeros(l, r)).unwrap();
    group.bench_function("penalty", |b| b.iter(|| penalty.step(black_box(&frame.x), black_box(&e)).unwrap()));

    let manifold = GeneralizedStiefel::new(plant.radiation.clone(), r).unwrap();
    let start = manifold.feasible_point(1).unwrap();
    let mut riemannian = RiemannianNlms::new(plant.g.clone(), manifold, params, start).unwrap();
    group.bench_function("riemannian", |b| b.iter(|| riemannian.step(black_box(&frame.x), black_box(&e)).unwrap()));
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().configure_from_args();
    targets = sweep, steps
}
criterion_main!(benches);
