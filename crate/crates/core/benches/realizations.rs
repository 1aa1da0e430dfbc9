//! Sequential vs rayon execution of a small turbulent sweep.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oam_turb::entanglement::EncodingSubspace;
use oam_turb::harness::{simulate, ExperimentConfig};
use oam_turb::parallel::Executor;

fn config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n = 256;
    c.realizations = 8;
    c.optics.strengths = vec![2.0];
    c.subspaces = vec![EncodingSubspace::qubit(1).expect("valid preset")];
    c
}

fn realizations(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("simulate_8_realizations");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    let mut executors = vec![("sequential", Executor::Sequential)];
    if cfg!(feature = "parallel") {
        executors.push(("parallel", Executor::Parallel { workers: None }));
    }
    for (name, ex) in executors {
        group.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, ex| {
            b.iter(|| simulate(&cfg, *ex).expect("valid sweep"))
        });
    }
    group.finish();
}

criterion_group!(benches, realizations);
criterion_main!(benches);
