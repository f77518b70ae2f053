use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use rmtedge_bench::{heavy_spectrum, quantile_spectrum};
use rmtedge_core::free_conv::{find_left_edge, solve_subordination};
use rmtedge_core::heavy_tail::{build_theta, sample_matrix};
use rmtedge_core::spectral::covariance_spectrum;
use rmtedge_core::theory::{kernel_core, p_transform, TheoryInputs};

fn edge(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_left_edge");
    for &m in &[250usize, 1000] {
        let spec = quantile_spectrum(m, 0.25, 0.1).unwrap();
        g.bench_with_input(BenchmarkId::new("mp_quantiles", m), &spec, |b, s| {
            b.iter(|| find_left_edge(black_box(s), 0.1).unwrap())
        });
    }
    let spec = heavy_spectrum(3.2, 1000, 7).unwrap();
    g.bench_function("heavy_alpha3.2_n1000", |b| {
        b.iter(|| find_left_edge(black_box(&spec), 0.3).unwrap())
    });
    g.finish();
}

fn subordination(c: &mut Criterion) {
    let spec = quantile_spectrum(1000, 0.25, 0.1).unwrap();
    let z = Complex64::new(0.3, 0.01);
    c.bench_function("solve_subordination_m1000", |b| {
        b.iter(|| solve_subordination(black_box(&spec), 0.1, black_box(z)).unwrap())
    });
}

fn spectrum(c: &mut Criterion) {
    let theta = build_theta(3.0, 1.0).unwrap();
    let mut g = c.benchmark_group("covariance_spectrum");
    g.sample_size(10);
    for &n in &[400usize, 1000] {
        let y = sample_matrix(&theta, n / 4, n, 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &y, |b, y| {
            b.iter(|| covariance_spectrum(black_box(y)).unwrap())
        });
    }
    g.finish();
}

fn theory(c: &mut Criterion) {
    let u = Complex64::new(1.3, 0.2);
    let up = Complex64::new(1.1, 0.1);
    c.bench_function("kernel_core", |b| {
        b.iter(|| kernel_core(3.0, 0.25, black_box(u), black_box(up)).unwrap())
    });
    let inp = TheoryInputs::new(3.0, 0.25, build_theta(3.0, 1.0).unwrap().c_const, 1e4, 0.1).unwrap();
    let m = Complex64::new(1.0, 0.5);
    c.bench_function("p_transform", |b| {
        b.iter(|| p_transform(black_box(&inp), black_box(m)).unwrap())
    });
}

criterion_group!(benches, edge, subordination, spectrum, theory);
criterion_main!(benches);
