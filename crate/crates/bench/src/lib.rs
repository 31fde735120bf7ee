//! Shared fixtures for the criterion benchmarks: a realistic bucketed
//! demand series on a city-sized grid, and attractor point clouds for the
//! dimension-estimation benchmarks.

use std::collections::BTreeSet;

use fleetplace_core::{
    bucket_snapshots, gen_points, gen_ride_stream, rate_map_from_attractor, ArrivalModel,
    AttractorKind, AttractorSpec, DurationRange, GridSpec, HistoryState, Point2d, SnapshotSeries,
    StreamSpec, TripLaw,
};

pub const BENCH_TAU: i64 = 180;
pub const BENCH_REACH: f64 = 500.0;

pub fn bench_grid() -> GridSpec {
    GridSpec::new(100.0, 30, 30, 40.70, -74.02, 40.70).unwrap()
}

/// Self-similar per-cell Poisson demand, bucketed: the shape the policies
/// see in a real run (roughly 150 events per slot on a 30x30 grid).
pub fn bench_series(slots: usize) -> SnapshotSeries {
    let grid = bench_grid();
    let attractor = AttractorSpec::new(AttractorKind::SierpinskiTriangle, 2800.0).unwrap();
    let rates = rate_map_from_attractor(&attractor, &grid, 0.8, 200_000, 9).unwrap();
    let spec = StreamSpec {
        attractor,
        arrivals: ArrivalModel::RateMap {
            rows: grid.rows,
            cols: grid.cols,
            rates,
        },
        duration: (slots as i64 * BENCH_TAU) as f64,
        trip: TripLaw::UniformDisk { radius: 600.0 },
        trip_duration: DurationRange { lo: 60.0, hi: 480.0 },
        seed: 9,
    };
    let records = gen_ride_stream(&spec, &grid, 0).unwrap();
    bucket_snapshots(
        &records,
        &grid,
        BENCH_TAU,
        &BTreeSet::new(),
        Some(0),
        Some(slots as i64 * BENCH_TAU),
    )
    .unwrap()
    .series
}

/// History over `series.snapshots[start..end)`, as the simulation loop
/// would have accumulated it.
pub fn bench_history(series: &SnapshotSeries, start: usize, end: usize) -> HistoryState {
    let mut history = HistoryState::new(series.grid.rows, series.grid.cols);
    for snap in &series.snapshots[start..end] {
        history.push(snap);
    }
    history
}

pub fn bench_points(n: usize) -> Vec<Point2d> {
    let spec = AttractorSpec::new(AttractorKind::SierpinskiTriangle, 1000.0).unwrap();
    gen_points(&spec, n, 42).unwrap()
}
