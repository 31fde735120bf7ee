//! Simulation-level tests: the incremental history bookkeeping against
//! from-scratch recomputation, oracle dominance, and placement invariants
//! under fuzzed inputs.

use fleetplace_core::{
    bucket_snapshots, gen_ride_stream, opt_oracle, place_ftl_ch, place_pp_lh, place_urand_nh,
    rate_map_from_attractor, reward, simulate, AlgoParams, Algorithm, ArrivalModel, AttractorKind,
    AttractorSpec, Cell, CountMatrix, DurationRange, GridSpec, HistoryState, SnapshotScore,
    SnapshotSeries, StreamSpec, TripLaw,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_8x8() -> GridSpec {
    GridSpec::new(100.0, 8, 8, 40.0, -74.0, 40.0).unwrap()
}

/// A heterogeneous synthetic series: carpet-shaped demand, per-cell Poisson
/// arrivals, local trips.
fn carpet_series(slots: usize, seed: u64) -> SnapshotSeries {
    let grid = grid_8x8();
    let attractor = AttractorSpec::new(AttractorKind::SierpinskiCarpet, 800.0).unwrap();
    let rates = rate_map_from_attractor(&attractor, &grid, 0.5, 50_000, seed).unwrap();
    let spec = StreamSpec {
        attractor,
        arrivals: ArrivalModel::RateMap {
            rows: 8,
            cols: 8,
            rates,
        },
        duration: slots as f64 * 60.0,
        trip: TripLaw::UniformDisk { radius: 200.0 },
        trip_duration: DurationRange { lo: 30.0, hi: 300.0 },
        seed,
    };
    let records = gen_ride_stream(&spec, &grid, 0).unwrap();
    bucket_snapshots(
        &records,
        &grid,
        60,
        &Default::default(),
        Some(0),
        Some(slots as i64 * 60),
    )
    .unwrap()
    .series
}

/// Rebuild the complete-history counts from scratch at every step and drive
/// the same placement routine with an identically seeded RNG: the simulation
/// loop's incremental history must reproduce it exactly.
#[test]
fn ftl_incremental_history_matches_recomputation() {
    let series = carpet_series(40, 17);
    let params = AlgoParams {
        reach: 250.0,
        window: 3,
        threshold: 3,
    };
    let seed = 99;
    let via_simulate = simulate(&series, Algorithm::FtlCh, &params, seed).unwrap();

    let grid = &series.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut expected: Vec<SnapshotScore> = Vec::new();
    for t in params.window..series.len() - 1 {
        // From-scratch cumulative counts over snapshots 0..t.
        let mut m = CountMatrix::zeros(grid.rows, grid.cols);
        for snap in &series.snapshots[..t] {
            for (cell, c) in snap.dropoffs.iter_nonzero() {
                m.add(cell, c);
            }
            for (cell, c) in snap.pickups.iter_nonzero() {
                m.add(cell, c);
            }
        }
        let now = &series.snapshots[t];
        let next = &series.snapshots[t + 1];
        let placed = place_ftl_ch(grid, &now.dropoffs, &m, params.reach, &mut rng).unwrap();
        let r = reward(&next.pickups, &placed).unwrap();
        expected.push(SnapshotScore {
            index: next.index,
            wall_slot: next.wall_slot,
            placements: r.placements,
            matched: r.matched,
            pickups: next.total_pickups(),
        });
    }
    assert_eq!(via_simulate.scores, expected);
}

/// Same idea for the windowed estimator history: rebuilding the window from
/// scratch each step must match the push/retire bookkeeping.
#[test]
fn pp_window_history_matches_recomputation() {
    let series = carpet_series(40, 23);
    let params = AlgoParams {
        reach: 250.0,
        window: 6,
        threshold: 2,
    };
    let seed = 7;
    let via_simulate = simulate(&series, Algorithm::PpLh, &params, seed).unwrap();

    let grid = &series.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut expected: Vec<SnapshotScore> = Vec::new();
    for t in params.window..series.len() - 1 {
        let mut history = HistoryState::new(grid.rows, grid.cols);
        for snap in &series.snapshots[t - params.window..t] {
            history.push(snap);
        }
        let now = &series.snapshots[t];
        let next = &series.snapshots[t + 1];
        let placed = place_pp_lh(
            grid,
            &now.dropoffs,
            &history,
            params.reach,
            params.threshold,
            &mut rng,
        )
        .unwrap();
        let r = reward(&next.pickups, &placed).unwrap();
        expected.push(SnapshotScore {
            index: next.index,
            wall_slot: next.wall_slot,
            placements: r.placements,
            matched: r.matched,
            pickups: next.total_pickups(),
        });
    }
    assert_eq!(via_simulate.scores, expected);
}

/// The clairvoyant oracle can never be beaten on a step it also plays.
#[test]
fn opt_dominates_online_policies_stepwise() {
    let series = carpet_series(60, 31);
    let reach = 250.0;
    let opt = simulate(
        &series,
        Algorithm::Opt,
        &AlgoParams {
            reach,
            window: 0,
            threshold: 3,
        },
        1,
    )
    .unwrap();
    let opt_by_index: std::collections::HashMap<usize, u64> =
        opt.scores.iter().map(|s| (s.index, s.matched)).collect();
    for algo in [Algorithm::UrandNh, Algorithm::PpLh, Algorithm::FtlCh] {
        let params = AlgoParams {
            reach,
            window: 5,
            threshold: 2,
        };
        let out = simulate(&series, algo, &params, 77).unwrap();
        assert!(!out.scores.is_empty());
        for s in &out.scores {
            let opt_matched = opt_by_index[&s.index];
            assert!(
                s.matched <= opt_matched,
                "{algo} matched {} at snapshot {} but the oracle matched {opt_matched}",
                s.matched,
                s.index
            );
        }
    }
}

/// Fuzzed single-step invariants: every policy conserves vehicles and only
/// places within reachable neighborhoods.
#[test]
fn placements_conserve_and_respect_reach() {
    let grid = GridSpec::new(100.0, 6, 7, 40.0, -74.0, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for round in 0..2_000 {
        let mut d = CountMatrix::zeros(6, 7);
        let mut p = CountMatrix::zeros(6, 7);
        for _ in 0..rng.random_range(0..12) {
            d.increment(Cell::new(rng.random_range(0..6), rng.random_range(0..7)));
        }
        for _ in 0..rng.random_range(0..12) {
            p.increment(Cell::new(rng.random_range(0..6), rng.random_range(0..7)));
        }
        let reach = [60.0, 100.0, 150.0, 320.0][round % 4];

        // A small synthetic history with event times.
        let mut hist_snap = fleetplace_core::Snapshot::empty(0, 0, 6, 7);
        for _ in 0..rng.random_range(0..20) {
            let cell = Cell::new(rng.random_range(0..6), rng.random_range(0..7));
            hist_snap.pickups.increment(cell);
            let base = hist_snap
                .event_times
                .get(&cell)
                .and_then(|v| v.last().copied())
                .unwrap_or(0.0);
            hist_snap
                .event_times
                .entry(cell)
                .or_default()
                .push(base + rng.random_range(1.0..30.0));
        }
        let mut history = HistoryState::new(6, 7);
        history.push(&hist_snap);

        let total = d.total();
        let placements = [
            place_urand_nh(&grid, &d, reach, &mut rng).unwrap(),
            place_pp_lh(&grid, &d, &history, reach, 1, &mut rng).unwrap(),
            place_ftl_ch(&grid, &d, history.counts(), reach, &mut rng).unwrap(),
            opt_oracle(&grid, &d, &p, reach).unwrap(),
        ];
        let union: Vec<_> = d
            .iter_nonzero()
            .map(|(c, _)| grid.neighborhood(c, reach).unwrap())
            .collect();
        for placed in &placements {
            assert_eq!(placed.placed(), total, "round {round}: vehicles not conserved");
            for (cell, count) in placed.counts().iter_nonzero() {
                assert!(
                    union.iter().any(|nh| nh.contains(cell)),
                    "round {round}: {count} placements at unreachable {cell}"
                );
            }
        }
    }
}

/// The oracle's matched count also dominates when compared through the
/// public reward function on identical matrices.
#[test]
fn opt_beats_handcrafted_adversaries() {
    let grid = grid_8x8();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let mut d = CountMatrix::zeros(8, 8);
        let mut p = CountMatrix::zeros(8, 8);
        for _ in 0..rng.random_range(1..15) {
            d.increment(Cell::new(rng.random_range(0..8), rng.random_range(0..8)));
        }
        for _ in 0..rng.random_range(1..15) {
            p.increment(Cell::new(rng.random_range(0..8), rng.random_range(0..8)));
        }
        let opt_matched = reward(&p, &opt_oracle(&grid, &d, &p, 150.0).unwrap())
            .unwrap()
            .matched;
        for seed in 0..3 {
            let mut r2 = ChaCha8Rng::seed_from_u64(seed);
            let alt = place_urand_nh(&grid, &d, 150.0, &mut r2).unwrap();
            assert!(reward(&p, &alt).unwrap().matched <= opt_matched);
        }
    }
}
