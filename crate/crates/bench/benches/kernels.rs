use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskcalc_bench::{composite, problem, variable};
use riskcalc_core::{
    avar_upper, certify, composite_subgradient, lorenz, lorenz_conjugate, solve, CertifyOptions,
    SolverOptions,
};

fn quantile_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("lorenz");
    for n in [100, 1_000, 10_000] {
        let z = variable(n, 1);
        group.bench_with_input(BenchmarkId::new("value", n), &z, |b, z| b.iter(|| lorenz(z, black_box(0.37))));
        group.bench_with_input(BenchmarkId::new("conjugate", n), &z, |b, z| {
            b.iter(|| lorenz_conjugate(z, black_box(0.37)))
        });
        group.bench_with_input(BenchmarkId::new("avar_upper", n), &z, |b, z| b.iter(|| avar_upper(z, black_box(0.05))));
    }
    group.finish();
}

fn chain_rule(c: &mut Criterion) {
    let mut group = c.benchmark_group("composite_subgradient");
    for n in [10, 100, 1_000] {
        let inst = composite(n, 3, 4, 2);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| composite_subgradient(&inst.risk, &inst.integrand, &inst.point, &inst.info))
        });
    }
    group.finish();
}

fn optimization(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimization");
    group.sample_size(10);
    let spec = problem(20, 2, 3);
    let opts = SolverOptions { max_iter: 2_000, ..SolverOptions::default() };
    group.bench_function("solve_2000_iterations", |b| b.iter(|| solve(&spec, &opts)));
    let x = solve(&spec, &opts).expect("solvable").x;
    group.bench_function("certify", |b| b.iter(|| certify(&spec, &x, &CertifyOptions::default())));
    group.finish();
}

criterion_group!(benches, quantile_kernels, chain_rule, optimization);
criterion_main!(benches);
