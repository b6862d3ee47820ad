use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use specconv::basis::{propagate_bernstein, propagate_chebyshev, propagate_jacobi, propagate_monomial};
use specconv::{spmm, GraphMatrixKind};
use specconv_bench::fixture;
use std::hint::black_box;

fn spmm_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmm");
    for n in [1000, 4000] {
        let (s, x) = fixture(n, 4.0, 32, GraphMatrixKind::AdjNorm);
        group
            .bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| spmm(black_box(&s), black_box(&x))));
    }
    group.finish();
}

fn basis_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate_k10");
    let (s, x) = fixture(2708, 3.9, 32, GraphMatrixKind::AdjNorm);
    let (s_half, _) = fixture(2708, 3.9, 32, GraphMatrixKind::LapHalf);
    group.bench_function("monomial", |b| b.iter(|| propagate_monomial(&s, black_box(&x), 10)));
    group.bench_function("chebyshev", |b| b.iter(|| propagate_chebyshev(&s, black_box(&x), 10)));
    group.bench_function("jacobi", |b| b.iter(|| propagate_jacobi(&s, black_box(&x), 10, 1.0, 1.0)));
    group.bench_function("bernstein", |b| b.iter(|| propagate_bernstein(&s_half, black_box(&x), 10)));
    group.finish();
}

criterion_group!(benches, spmm_bench, basis_bench);
criterion_main!(benches);
