//! Benchmarks for the hot paths: the precision MAP solver, the full
//! backward learner, scenario generation and the theory quantities.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use baybn::bagus::{fit_map, BagusConfig};
use baybn::datagen::{generate_dag, sample, ScenarioSpec};
use baybn::eval::theory_report;
use baybn::learner::{learn_structure, LearnInput, LearnOptions};
use baybn::model::LinearSemModel;
use baybn_bench::bench_scenario;

fn bench_fit_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_map");
    group.sample_size(20);
    for &(p, n) in &[(10usize, 400usize), (25, 400), (50, 200)] {
        let (_, cov) = bench_scenario(p, 3, n, 7);
        let cfg = BagusConfig::defaults_for_n(n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("p{p}_n{n}")), &cov, |b, cov| {
            b.iter(|| fit_map(black_box(cov), n, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_learn(c: &mut Criterion) {
    let mut group = c.benchmark_group("learn_structure");
    group.sample_size(10);
    for &p in &[10usize, 25] {
        let (scenario, _) = bench_scenario(p, 3, 400, 11);
        let cfg = BagusConfig::defaults_for_n(400);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("p{p}")),
            &scenario,
            |b, sc| {
                b.iter(|| {
                    learn_structure(
                        LearnInput::Data(black_box(&sc.dataset)),
                        &cfg,
                        LearnOptions::default(),
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_datagen(c: &mut Criterion) {
    let mut group = c.benchmark_group("datagen");
    group.bench_function("generate_dag_p50_dm3", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            generate_dag(50, 3, black_box(seed)).unwrap()
        })
    });
    group.bench_function("sample_p25_n400", |b| {
        let spec = ScenarioSpec::new(25, 3, 400, baybn::datagen::ErrorSpec::GaussianEqualVar, 3);
        let sc = baybn::datagen::generate_scenario(&spec).unwrap();
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            sample(black_box(&sc.model), 400, seed).unwrap()
        })
    });
    group.finish();
}

fn bench_theory(c: &mut Criterion) {
    let mut group = c.benchmark_group("theory_report");
    group.sample_size(20);
    for &p in &[8usize, 20] {
        let model = LinearSemModel::chain(p, 0.5, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(format!("chain_p{p}")), &model, |b, m| {
            b.iter(|| theory_report(black_box(m)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit_map, bench_learn, bench_datagen, bench_theory);
criterion_main!(benches);
