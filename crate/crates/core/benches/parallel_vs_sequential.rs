use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bnmix::fit_kl::{em_fit_exact, EmConfig};
use bnmix::fit_meanfield::{meanfield_ensemble, MeanFieldConfig};
use bnmix::fit_quadratic::{fit_quadratic, Objective, QuadraticFitConfig};
use bnmix::fixtures::chest_clinic;
use bnmix::parallel::Execution;
use bnmix::random::random_network;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn em_restarts(c: &mut Criterion) {
    let net = chest_clinic();
    let mut group = c.benchmark_group("em_restarts");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = EmConfig::new(4).restarts(32).execution(mode);
        group.bench_function(BenchmarkId::new(name, 32), |b| {
            b.iter(|| black_box(em_fit_exact(&net, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn ese_restarts(c: &mut Criterion) {
    let net = chest_clinic();
    let mut group = c.benchmark_group("ese_restarts");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = QuadraticFitConfig::new(Objective::Ese, 4)
            .restarts(16)
            .warm_start(false)
            .execution(mode);
        group.bench_function(BenchmarkId::new(name, 16), |b| {
            b.iter(|| black_box(fit_quadratic(&net, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn meanfield_runs(c: &mut Criterion) {
    // a wider random network so each run has some work in it
    let net = random_network(&mut ChaCha8Rng::seed_from_u64(1), 40, 3, 0.05, 0.95);
    let mut group = c.benchmark_group("meanfield_runs");
    group.measurement_time(Duration::from_secs(5));
    for (name, mode) in MODES {
        let cfg = MeanFieldConfig::new(200).execution(mode);
        group.bench_function(BenchmarkId::new(name, 200), |b| {
            b.iter(|| black_box(meanfield_ensemble(&net, &cfg)))
        });
    }
    group.finish();
}

criterion_group!(benches, em_restarts, ese_restarts, meanfield_runs);
criterion_main!(benches);
