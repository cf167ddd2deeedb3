//! Compares the data-parallel driver paths against their sequential twins.
//!
//! Build with `--no-default-features` to measure the pure sequential crate;
//! with the default `parallel` feature the *_serial entry points still run
//! single-threaded, so one invocation shows both sides.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use relloc::focksim::{
    exact_record_distribution, exact_record_distribution_serial, sample_record_batch,
    sample_record_batch_serial, MixedEnsemble, TauPolicy,
};

fn bench_trajectories(c: &mut Criterion) {
    let ensemble = MixedEnsemble::thermal(6.0, None).unwrap();
    let mut group = c.benchmark_group("trajectory_batch_512");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter_batched(
            || ensemble.clone(),
            |e| sample_record_batch(&e, 0.2, 24, TauPolicy::RandomPerEvent, 7, 512).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("serial", |b| {
        b.iter_batched(
            || ensemble.clone(),
            |e| {
                sample_record_batch_serial(&e, 0.2, 24, TauPolicy::RandomPerEvent, 7, 512)
                    .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_enumeration(c: &mut Criterion) {
    let ensemble = MixedEnsemble::poissonian(20.0, None).unwrap();
    let mut group = c.benchmark_group("record_distribution_n20");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| exact_record_distribution(&ensemble, 0.2, 30).unwrap())
    });
    group.bench_function("serial", |b| {
        b.iter(|| exact_record_distribution_serial(&ensemble, 0.2, 30).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_trajectories, bench_enumeration);
criterion_main!(benches);
