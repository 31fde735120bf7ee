//! Cost of the dimension-estimation pipeline pieces on a 100k-point
//! self-similar cloud: the squared-occupancy curve, scaling-range
//! detection with fit, and the sampled neighbor-growth curve.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fleetplace_bench::bench_points;
use fleetplace_core::{
    correlation_sum, detect_fractal_range, dyadic_ladder, fit_d2, neighborhood_growth,
};

fn bench_fractal(c: &mut Criterion) {
    let points = bench_points(100_000);
    let ladder = dyadic_ladder(8.0, 7).unwrap();
    let curve = correlation_sum(&points, &ladder).unwrap();
    let radii = dyadic_ladder(4.0, 7).unwrap();

    let mut group = c.benchmark_group("fractal");
    group.bench_function("correlation_sum_100k", |b| {
        b.iter(|| correlation_sum(black_box(&points), &ladder).unwrap())
    });
    group.bench_function("detect_and_fit", |b| {
        b.iter(|| {
            let (lo, hi) = detect_fractal_range(black_box(&curve), 0.98, 4).unwrap();
            fit_d2(&curve, lo, hi).unwrap()
        })
    });
    group.bench_function("neighborhood_growth", |b| {
        b.iter(|| neighborhood_growth(black_box(&points), &radii, 400, 8_000, 11).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_fractal);
criterion_main!(benches);
