use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geomforce_core::lab::{build_laplace_beltrami, test_states};
use geomforce_core::*;

fn bind(pairs: &[(&str, f64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn bench_jets(c: &mut Criterion) {
    let expr = parse_expression("sqrt((sqrt(x^2 + y^2) - R)^2 + z^2) - r").unwrap();
    let params = bind(&[("R", 2.0), ("r", 1.0)]);
    let x = [2.6, 0.3, 0.7];
    let mut group = c.benchmark_group("jet");
    for degree in [1, 2, 3, 4] {
        group.bench_with_input(BenchmarkId::new("torus_sdf", degree), &degree, |b, &d| {
            b.iter(|| evaluate_jet(black_box(&expr), black_box(&x), d, &params).unwrap())
        });
    }
    group.finish();
}

fn bench_curvature(c: &mut Criterion) {
    let torus = builtin_surface("torus", &bind(&[("R", 2.0), ("r", 1.0)])).unwrap();
    let spheroid = builtin_surface("spheroid", &bind(&[("a", 1.0), ("b", 2.0)])).unwrap();
    let xt = torus.parametric_point(0.2, 0.1).unwrap();
    let xs = spheroid.parametric_point(0.2, 0.1).unwrap();
    let mut group = c.benchmark_group("curvature_sample");
    group.bench_function("torus_signed_distance", |b| {
        b.iter(|| curvature_sample(&torus, black_box(&xt), ExtensionPolicy::SignedDistance).unwrap())
    });
    group.bench_function("spheroid_gradient", |b| {
        b.iter(|| curvature_sample(&spheroid, black_box(&xs), ExtensionPolicy::GradientNormalized).unwrap())
    });
    group.sample_size(20);
    group.bench_function("spheroid_signed_distance", |b| {
        b.iter(|| curvature_sample(&spheroid, black_box(&xs), ExtensionPolicy::SignedDistance).unwrap())
    });
    group.finish();
}

fn bench_classical(c: &mut Criterion) {
    let torus = builtin_surface("torus", &bind(&[("R", 2.0), ("r", 1.0)])).unwrap();
    let x = torus.parametric_point(0.1, 0.0).unwrap();
    let init = TrajectoryState {
        x,
        p: vec![0.0, 1.0, 0.0],
        t: 0.0,
    };
    let cfg = IntegratorConfig::new(1e-3, 1000, 1.0);
    c.bench_function("rattle_torus_1000_steps", |b| b.iter(|| integrate(&torus, black_box(&init), &cfg).unwrap()));
}

fn bench_operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_apply");
    for n in [64usize, 128] {
        let grid = build_grid(LabSurface::Torus { major: 2.0, minor: 1.0 }, &[n, n]).unwrap();
        let psi = test_states(&grid, &TestConfig::default()).remove(0);
        let lb = build_laplace_beltrami(&grid);
        let h = build_hamiltonian(&grid, 1.0, 1.0, HamiltonianForm::Momentum);
        group.bench_with_input(BenchmarkId::new("laplace_beltrami", n), &psi, |b, psi| b.iter(|| lb.apply(psi)));
        group.bench_with_input(BenchmarkId::new("hamiltonian_momentum_form", n), &psi, |b, psi| {
            b.iter(|| h.apply(psi))
        });
    }
    group.finish();
}

criterion_group!(kernels, bench_jets, bench_curvature, bench_classical, bench_operators);
criterion_main!(kernels);
