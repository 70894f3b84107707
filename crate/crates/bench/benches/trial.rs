//! End-to-end cost of one benchmark trial at a small horizon, per algorithm.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ucrlb_core::harness::RunConfig;
use ucrlb_core::{run_trial, AlgoKind, AlgoSpec, EnvSpec, ExperimentConfig};

fn config(kind: AlgoKind) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::riverswim(),
        algo: AlgoSpec::new(kind),
        run: RunConfig {
            horizon: 1 << 14,
            trials: 1,
            delta: 0.05,
            base_seed: 0,
            masking: true,
            checkpoint_ratio: 2,
            threads: None,
        },
    }
}

fn bench_trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trial/riverswim_16k");
    group.sample_size(10);
    for kind in [AlgoKind::Ucrlv, AlgoKind::Ucrl2, AlgoKind::Tsde] {
        let cfg = config(kind);
        group.bench_with_input(BenchmarkId::from_parameter(kind.label()), &cfg, |b, cfg| {
            b.iter(|| run_trial(cfg, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_trial);
criterion_main!(benches);
