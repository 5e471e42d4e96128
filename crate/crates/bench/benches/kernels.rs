//! Timings for robust loss, robust ERM, cover construction and VC search.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tolrerm_bench::{sample, task, union_region, wide_task, BENCH_SEED};
use tolrerm_core::cover::{build_v_balls, build_v_grid};
use tolrerm_core::robust_vc::{overhead_instance, robust_vc_search, DEFAULT_SUBSET_BUDGET};
use tolrerm_core::{rerm_solve, tolrerm, Hypothesis, Label, RermOracle, Vector};

fn robust_loss(c: &mut Criterion) {
    let region = union_region().expand(0.3).unwrap();
    let linear = Hypothesis::linear(Vector::from([0.6, 0.8]), -0.5).unwrap();
    let sphere = Hypothesis::sphere(Vector::from([3.0, 0.0]), 1.5, Label::Neg).unwrap();
    let mut g = c.benchmark_group("robust_violation");
    g.bench_function("linear_on_expanded_union", |b| {
        b.iter(|| linear.robust_violation(black_box(&region), Label::Pos).unwrap())
    });
    g.bench_function("sphere_on_expanded_union", |b| {
        b.iter(|| sphere.robust_violation(black_box(&region), Label::Pos).unwrap())
    });
    g.finish();
}

fn rerm(c: &mut Criterion) {
    let mut g = c.benchmark_group("rerm");
    for (name, t) in [("default", task()), ("wide", wide_task())] {
        let oracle = RermOracle::ExhaustiveFinite(t.class.clone());
        for n in [30, 300] {
            let s = sample(&t, n);
            g.bench_with_input(BenchmarkId::new(format!("exhaustive_{name}"), n), &s, |b, s| {
                b.iter(|| rerm_solve(&oracle, &t.family, s, 0.25).unwrap())
            });
        }
    }
    let t = task();
    let oracle = RermOracle::ExhaustiveFinite(t.class.clone());
    g.bench_function("tolrerm_default_n300", |b| {
        b.iter(|| tolrerm(&oracle, &t.family, &t.dist, 0.1, 0.1, 0.5, 300, BENCH_SEED).unwrap())
    });
    g.finish();
}

fn cover(c: &mut Criterion) {
    let base = union_region();
    let mut g = c.benchmark_group("sandwich_cover");
    for alpha in [0.2, 0.1] {
        g.bench_with_input(BenchmarkId::new("grid", alpha), &alpha, |b, &a| {
            b.iter(|| build_v_grid(&base, 0.5, a).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("balls", alpha), &alpha, |b, &a| {
            b.iter(|| build_v_balls(&base, 0.5, a).unwrap())
        });
    }
    g.finish();
}

fn vc_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("robust_vc_search");
    g.sample_size(10);
    for (d, k) in [(1, 2), (2, 2), (3, 1)] {
        let (class, family, universe) = overhead_instance(d, k, BENCH_SEED).unwrap();
        g.bench_function(format!("overhead_d{d}_k{k}"), |b| {
            b.iter(|| robust_vc_search(&class, &family, &universe, 8, DEFAULT_SUBSET_BUDGET).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, robust_loss, rerm, cover, vc_search);
criterion_main!(benches);
