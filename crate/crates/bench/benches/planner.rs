//! Microbenchmarks for the planner inner loop: the greedy optimistic
//! transfer on one row, and a full planning solve at a few instance sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use ucrlb_core::verify::random_counts_table;
use ucrlb_core::{
    episode_confidence_levels, modified_extended_vi, optimistic_transition, Stream,
};

fn bench_optimistic_transition(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimistic_transition");
    for &ns in &[6usize, 20, 51, 101] {
        let mut rng = Stream::seed_from_u64(7);
        let table = random_counts_table(&mut rng, ns, 2, 500);
        let levels = episode_confidence_levels(100_000, 0.05, ns, 2);
        let u: Vec<f64> = (0..ns).map(|_| rng.gen()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(ns), &ns, |b, _| {
            b.iter(|| optimistic_transition(&u, &table, 0, 0, &levels))
        });
    }
    group.finish();
}

fn bench_modified_extended_vi(c: &mut Criterion) {
    let mut group = c.benchmark_group("modified_extended_vi");
    group.sample_size(20);
    for &ns in &[6usize, 20, 51] {
        let mut rng = Stream::seed_from_u64(11);
        let table = random_counts_table(&mut rng, ns, 2, 500);
        let levels = episode_confidence_levels(100_000, 0.05, ns, 2);
        group.bench_with_input(BenchmarkId::from_parameter(ns), &ns, |b, _| {
            b.iter(|| modified_extended_vi(&table, &levels, 1e-3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_optimistic_transition, bench_modified_extended_vi);
criterion_main!(benches);
