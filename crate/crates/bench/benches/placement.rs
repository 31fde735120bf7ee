//! Per-snapshot cost of each placement policy and of the assignment oracle
//! on a realistic slot: ~150 vehicles against ~150 requests on a 30x30
//! grid with a 500 m reach.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fleetplace_bench::{bench_grid, bench_history, bench_series, BENCH_REACH};
use fleetplace_core::{opt_oracle, place_ftl_ch, place_pp_lh, place_urand_nh};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_placement(c: &mut Criterion) {
    let grid = bench_grid();
    let series = bench_series(60);
    let windowed = bench_history(&series, 30, 50);
    let complete = bench_history(&series, 0, 50);
    let snap = &series.snapshots[50];

    let mut group = c.benchmark_group("placement");
    group.bench_function("urand_nh", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| place_urand_nh(&grid, black_box(&snap.dropoffs), BENCH_REACH, &mut rng).unwrap())
    });
    group.bench_function("pp_lh", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        b.iter(|| {
            place_pp_lh(&grid, black_box(&snap.dropoffs), &windowed, BENCH_REACH, 3, &mut rng)
                .unwrap()
        })
    });
    group.bench_function("ftl_ch", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        b.iter(|| {
            place_ftl_ch(
                &grid,
                black_box(&snap.dropoffs),
                complete.counts(),
                BENCH_REACH,
                &mut rng,
            )
            .unwrap()
        })
    });
    group.bench_function("opt", |b| {
        b.iter(|| {
            opt_oracle(&grid, black_box(&snap.dropoffs), &snap.pickups, BENCH_REACH).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_placement);
criterion_main!(benches);
