use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use nalgebra::DVector;

use sns_bench::{least_squares, logistic};
use sns_core::neighborhood::{enumerate, NeighborhoodSpec};
use sns_core::stationarity::{check_n_stationary, default_tol_f};
use sns_core::{
    brute_force_oracle, gss_solve, initial_pattern, pd_solve, pgls, sns_from_origin, GssConfig, InnerSolverConfig, Iterate, Pattern,
    PdConfig, PglsConfig, SnsConfig,
};

fn neighborhood(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate");
    let p = logistic(16, 8, 1);
    let x = DVector::from_fn(16, |i, _| if i < 8 { 1.0 + i as f64 } else { 0.0 });
    let y = Pattern::with_free(16, &(0..8).collect::<Vec<_>>());
    for rho in 1..=4 {
        group.bench_with_input(BenchmarkId::from_parameter(rho), &rho, |b, &rho| {
            b.iter(|| enumerate(&x, &y, &NeighborhoodSpec::new(rho), &p).unwrap().count())
        });
    }
    group.finish();
}

fn line_search(c: &mut Criterion) {
    let p = logistic(32, 8, 2);
    let x = DVector::zeros(32);
    let y = initial_pattern(&p, &x).unwrap();
    c.bench_function("pgls/logistic n=32", |b| b.iter(|| pgls(&x, &y, &p, &PglsConfig::default()).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve logistic n=16 s=5");
    group.sample_size(10);
    let p = logistic(16, 5, 3);
    let zero = Iterate::new(DVector::zeros(16), Pattern::all_free(16));
    for rho in [1, 2, 3] {
        group.bench_with_input(BenchmarkId::new("sns", rho), &rho, |b, &rho| {
            b.iter(|| sns_from_origin(&p, &SnsConfig::default().with_rho(rho)).unwrap())
        });
    }
    group.bench_function("pd", |b| b.iter(|| pd_solve(&p, &zero, &PdConfig::default()).unwrap()));
    group.bench_function("gss", |b| b.iter(|| gss_solve(&p, &zero, &GssConfig::default()).unwrap()));
    group.finish();
}

fn certificates(c: &mut Criterion) {
    let p = logistic(16, 5, 4);
    let r = sns_from_origin(&p, &SnsConfig { stop_step_tol: 1e-8, ..SnsConfig::default().with_rho(2) }).unwrap();
    let x = r.x_final();
    let y = r.pattern_final.clone().unwrap();
    c.bench_function("n-stationarity rho=3", |b| {
        b.iter(|| check_n_stationary(&x, &y, &p, &NeighborhoodSpec::new(3), default_tol_f(r.f_final), 1e-5).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("least squares n=10 s=3", |b| {
        b.iter_batched(|| least_squares(10, 3, 5), |p| brute_force_oracle(&p, &InnerSolverConfig::default()).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, neighborhood, line_search, solvers, certificates, oracle);
criterion_main!(benches);
