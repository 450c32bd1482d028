use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neuroarm::config::{RunConfig, SweepConfig};
use neuroarm::exec::Execution;
use neuroarm::neuro::{solve_decoders, Ensemble, EnsembleParams, NeuronMode, DEFAULT_REG};
use neuroarm::stats::bootstrap_mean_ci;
use neuroarm::sweep::run_sweep;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bootstrap(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..2000.0)).collect();
    let mut group = c.benchmark_group("bootstrap_mean_ci");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "n1000_r10000"), |b| {
            b.iter(|| bootstrap_mean_ci(black_box(&samples), 10_000, 0.95, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn decoders(c: &mut Criterion) {
    let mut params = EnsembleParams::new(1000, 4, 2);
    params.mode = NeuronMode::Rate;
    let ens = Ensemble::generate(&params, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<Vec<f64>> = points.iter().map(|p| vec![p[0] * p[1], p[2] - p[3]]).collect();
    let mut group = c.benchmark_group("solve_decoders");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "n1000_p2000"), |b| {
            b.iter(|| solve_decoders(&ens, black_box(&points), &targets, DEFAULT_REG, exec).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut run = RunConfig::default();
    let s = &mut run.scenario;
    s.n_targets = 3;
    s.training_cycles = 2;
    s.eval_trials = 6;
    s.step_limit = 500;
    s.ensemble.n_neurons = 100;
    run.stats.resamples = 1000;
    run.sweep = Some(SweepConfig {
        n_neurons: Some(vec![50, 100]),
        learning_rate: Some(vec![1e-3, 1e-2]),
        n_targets: None,
        shared_seed: false,
    });
    let dir = tempfile::TempDir::new().unwrap();
    let mut group = c.benchmark_group("sweep_4_cells");
    // One worker serializes the cells; zero uses every core.
    for (name, workers) in [("sequential", 1), ("parallel", 0)] {
        group.bench_function(name, |b| b.iter(|| run_sweep(&run, dir.path(), workers).unwrap()));
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10).measurement_time(Duration::from_secs(5));
    targets = bootstrap, decoders, sweep
}
criterion_main!(benches);
