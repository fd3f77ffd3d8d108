use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use trialmech::mechanism::{check_ic_with, DirectMechanism, IcGrid};
use trialmech::oracle::{discrete_relaxed_oracle_with, ThresholdMode};
use trialmech::simulate::{simulate_game_with, SimConfig};
use trialmech::tiered::welfare_compare_with;
use trialmech::trial_solver::solve_trial;
use trialmech::{Exec, ModelParams, ValueDistribution};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn setup() -> (ModelParams, ValueDistribution, DirectMechanism) {
    let params = ModelParams::new(1.0, 5.0, 0.5).unwrap();
    let dist = ValueDistribution::uniform(0.9, 1.1).unwrap();
    let trial = solve_trial(&params, &dist, 0.0).unwrap();
    let mech = DirectMechanism::from_trial(&trial.mechanism, &params);
    (params, dist, mech)
}

fn bench_simulate(c: &mut Criterion) {
    let (params, dist, mech) = setup();
    let cfg = SimConfig::truthful(100_000, 7);
    let mut g = c.benchmark_group("simulate_game_100k");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(simulate_game_with(&mech, &params, &dist, &cfg, exec).unwrap()))
        });
    }
    g.finish();
}

fn bench_check_ic(c: &mut Criterion) {
    let (params, dist, mech) = setup();
    let mut g = c.benchmark_group("check_ic_default_grid");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(check_ic_with(&mech, &dist, &params, IcGrid::default(), exec).unwrap()))
        });
    }
    g.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let (params, dist, _) = setup();
    let mut g = c.benchmark_group("relaxed_oracle_k8_m5");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(discrete_relaxed_oracle_with(&params, &dist, 0.0, 8, 5, ThresholdMode::Common, exec).unwrap()))
        });
    }
    g.finish();
}

fn bench_welfare(c: &mut Criterion) {
    let (params, dist, _) = setup();
    let grid: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
    let mut g = c.benchmark_group("welfare_compare_19");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(welfare_compare_with(&params, &dist, &grid, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_simulate, bench_check_ic, bench_oracle, bench_welfare);
criterion_main!(benches);
