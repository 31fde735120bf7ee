//! Property-based invariants over randomly generated inputs.

use std::collections::BTreeSet;

use fleetplace_core::{
    bucket_snapshots, correlation_sum, mle_lambda, reward, Cell, CountMatrix, GridSpec,
    PlacementMatrix, Point2d, RequestRecord,
};
use proptest::prelude::*;

const ROWS: usize = 6;
const COLS: usize = 6;

fn count_matrix() -> impl Strategy<Value = CountMatrix> {
    prop::collection::vec(0u32..5, ROWS * COLS)
        .prop_map(|v| CountMatrix::from_vec(ROWS, COLS, v).unwrap())
}

proptest! {
    /// Matched vehicles are the cell-wise minimum overlap: bounded by both
    /// totals, and never hurt by extra demand.
    #[test]
    fn reward_is_bounded_and_demand_monotone(
        pickups in count_matrix(),
        placements in count_matrix(),
        extra_row in 0..ROWS,
        extra_col in 0..COLS,
    ) {
        let placements = PlacementMatrix(placements);
        let r = reward(&pickups, &placements).unwrap();
        prop_assert_eq!(r.placements, placements.placed());
        prop_assert!(r.matched <= r.placements);
        prop_assert!(r.matched <= pickups.total());
        if r.placements > 0 {
            let v = r.value();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        // One more request somewhere can only help (or leave it unchanged).
        let mut more = pickups.clone();
        more.increment(Cell::new(extra_row, extra_col));
        let r2 = reward(&more, &placements).unwrap();
        prop_assert!(r2.matched >= r.matched);
        prop_assert!(r2.matched <= r.matched + 1);
    }

    /// Neighborhoods are clipped windows around the center: the center is
    /// always a member, every member is in bounds, and membership agrees
    /// with the advertised offsets.
    #[test]
    fn neighborhood_shape_invariants(
        rows in 1usize..10,
        cols in 1usize..10,
        epsilon in 20.0f64..400.0,
        reach in 0.0f64..900.0,
        row_frac in 0.0f64..1.0,
        col_frac in 0.0f64..1.0,
    ) {
        let grid = GridSpec::new(epsilon, rows, cols, 40.0, -74.0, 40.0).unwrap();
        let center = Cell::new(
            ((rows as f64 * row_frac) as usize).min(rows - 1),
            ((cols as f64 * col_frac) as usize).min(cols - 1),
        );
        let nh = grid.neighborhood(center, reach).unwrap();
        let side = grid.neighborhood_side(reach);
        prop_assert_eq!(nh.side, side);
        prop_assert!(nh.contains(center));
        prop_assert!(nh.len() <= side * side);
        prop_assert!(!nh.cells.is_empty());

        let lo = -((side as isize - 1) / 2);
        let hi = side as isize / 2;
        for r in 0..rows {
            for c in 0..cols {
                let dr = r as isize - center.row as isize;
                let dc = c as isize - center.col as isize;
                let inside = (lo..=hi).contains(&dr) && (lo..=hi).contains(&dc);
                prop_assert_eq!(
                    nh.contains(Cell::new(r, c)),
                    inside,
                    "cell ({},{}) vs center {:?} side {}",
                    r,
                    c,
                    center,
                    side
                );
            }
        }
    }

    /// Coarsening boxes merges occupants, and `(a+b)^2 >= a^2 + b^2`: the
    /// squared-occupancy sum can only grow along an ascending ladder, from
    /// at least `n` (all singletons) up to `n^2` (one box).
    #[test]
    fn squared_occupancy_grows_with_box_size(
        coords in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 3..120),
        base in 1.0f64..40.0,
        scales in 4usize..8,
    ) {
        let points: Vec<Point2d> = coords.iter().map(|&(x, y)| Point2d::new(x, y)).collect();
        let ladder: Vec<f64> = (0..scales).map(|k| base * (1u64 << k) as f64).collect();
        let curve = correlation_sum(&points, &ladder).unwrap();
        let n = points.len() as u64;
        for pair in curve.points.windows(2) {
            prop_assert!(pair[0].sum_p2 <= pair[1].sum_p2);
        }
        for p in &curve.points {
            prop_assert!(p.sum_p2 >= n);
            prop_assert!(p.sum_p2 <= n * n);
            prop_assert!(p.occupied >= 1);
        }
    }

    /// The squared-occupancy sum is a set property: input order is irrelevant.
    #[test]
    fn squared_occupancy_ignores_point_order(
        coords in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 2..60),
        rot in 0usize..60,
    ) {
        let points: Vec<Point2d> = coords.iter().map(|&(x, y)| Point2d::new(x, y)).collect();
        let mut rotated = points.clone();
        rotated.rotate_left(rot % points.len());
        let ladder = [7.0, 14.0, 28.0];
        let a = correlation_sum(&points, &ladder).unwrap();
        let b = correlation_sum(&rotated, &ladder).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            prop_assert_eq!(pa.sum_p2, pb.sum_p2);
            prop_assert_eq!(pa.occupied, pb.occupied);
        }
    }

    /// Sliding the clock by whole slots (with no hour filter) relabels wall
    /// slots but changes no counts.
    #[test]
    fn bucketing_is_shift_equivariant(
        offsets in prop::collection::vec((0i64..3600, 0usize..4, 0usize..4), 1..40),
        shift_slots in 0i64..50,
        tau in prop::sample::select(vec![60i64, 90, 180]),
    ) {
        let grid = GridSpec::new(100.0, 4, 4, 40.0, -74.0, 40.0).unwrap();
        let make = |base: i64| -> Vec<RequestRecord> {
            offsets
                .iter()
                .map(|&(dt, row, col)| {
                    let p = grid.cell_center(Cell::new(row, col));
                    let (lat, lon) = grid.to_globe(p);
                    RequestRecord {
                        pickup_time: base + dt,
                        pickup_lat: lat,
                        pickup_lon: lon,
                        dropoff_lat: lat,
                        dropoff_lon: lon,
                        dropoff_time: base + dt + 30,
                    }
                })
                .collect()
        };
        let none = BTreeSet::new();
        let shift = shift_slots * tau;
        let a = bucket_snapshots(&make(0), &grid, tau, &none, Some(0), Some(3600 + 60))
            .unwrap();
        let b = bucket_snapshots(
            &make(shift),
            &grid,
            tau,
            &none,
            Some(shift),
            Some(shift + 3600 + 60),
        )
        .unwrap();
        prop_assert_eq!(a.diagnostics, b.diagnostics);
        prop_assert_eq!(a.series.len(), b.series.len());
        for (sa, sb) in a.series.snapshots.iter().zip(&b.series.snapshots) {
            prop_assert_eq!(sa.wall_slot, sb.wall_slot);
            prop_assert_eq!(sa.pickups.as_slice(), sb.pickups.as_slice());
            prop_assert_eq!(sa.dropoffs.as_slice(), sb.dropoffs.as_slice());
        }
    }

    /// The fitted rate is exactly the inverse mean gap.
    #[test]
    fn fitted_rate_inverts_mean_gap(
        gaps in prop::collection::vec(1e-3f64..1e4, 1..50),
    ) {
        let lambda = mle_lambda(&gaps).unwrap();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        prop_assert!((lambda * mean - 1.0).abs() < 1e-9);
    }
}
