//! Time discretization: event streams bucketed into fixed-length snapshots.
//!
//! A snapshot covers one `tau`-second wall-clock slot and records, per cell,
//! how many drop-offs and pickups occurred in that slot. Slots whose starting
//! hour-of-day is excluded (e.g. overnight hours with negligible demand) are
//! dropped from the series; the remaining snapshots are renumbered
//! contiguously while keeping their original wall slot for reference.

use crate::grid::{Cell, CountMatrix, GridError, GridSpec, Point2d};
use std::collections::{BTreeSet, HashMap};

/// Per-cell drop-off and pickup counts for one retained time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Contiguous index within the retained series (0-based).
    pub index: usize,
    /// Absolute slot number since the series start, counting excluded slots.
    pub wall_slot: u64,
    pub dropoffs: CountMatrix,
    pub pickups: CountMatrix,
    /// Projected pickup locations (meters), for spatial analysis.
    pub pickup_points: Vec<Point2d>,
    /// Per-cell event times in seconds since the series start, merged over
    /// drop-offs and pickups and sorted ascending. Used by arrival-rate
    /// estimators; may be empty for hand-built series.
    pub event_times: HashMap<Cell, Vec<f64>>,
}

impl Snapshot {
    pub fn empty(index: usize, wall_slot: u64, rows: usize, cols: usize) -> Self {
        Snapshot {
            index,
            wall_slot,
            dropoffs: CountMatrix::zeros(rows, cols),
            pickups: CountMatrix::zeros(rows, cols),
            pickup_points: Vec::new(),
            event_times: HashMap::new(),
        }
    }

    /// Build a snapshot from count matrices alone (no event times or points).
    pub fn from_counts(
        index: usize,
        wall_slot: u64,
        dropoffs: CountMatrix,
        pickups: CountMatrix,
    ) -> Result<Self, GridError> {
        if !dropoffs.same_shape(&pickups) {
            return Err(GridError::ShapeMismatch {
                left_rows: dropoffs.rows(),
                left_cols: dropoffs.cols(),
                right_rows: pickups.rows(),
                right_cols: pickups.cols(),
            });
        }
        Ok(Snapshot {
            index,
            wall_slot,
            dropoffs,
            pickups,
            pickup_points: Vec::new(),
            event_times: HashMap::new(),
        })
    }

    pub fn total_dropoffs(&self) -> u64 {
        self.dropoffs.total()
    }

    pub fn total_pickups(&self) -> u64 {
        self.pickups.total()
    }
}

/// A contiguous series of retained snapshots over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub grid: GridSpec,
    /// Slot length in seconds.
    pub tau: i64,
    /// Wall-clock time of slot 0, seconds since the Unix epoch.
    pub start_time: i64,
    /// Hours of day (0-23) whose slots were dropped.
    pub excluded_hours: BTreeSet<u8>,
    /// Total wall-clock slots spanned, including excluded ones.
    pub wall_slots: u64,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSeries {
    pub fn new(
        grid: GridSpec,
        tau: i64,
        start_time: i64,
        excluded_hours: BTreeSet<u8>,
        wall_slots: u64,
        snapshots: Vec<Snapshot>,
    ) -> Result<Self, GridError> {
        let series = SnapshotSeries {
            grid,
            tau,
            start_time,
            excluded_hours,
            wall_slots,
            snapshots,
        };
        series.validate()?;
        Ok(series)
    }

    /// Build a series directly from per-slot count matrices, numbering every
    /// slot as retained. Convenient for tests and synthetic experiments.
    pub fn from_matrices(
        grid: GridSpec,
        tau: i64,
        start_time: i64,
        slots: Vec<(CountMatrix, CountMatrix)>,
    ) -> Result<Self, GridError> {
        let snapshots = slots
            .into_iter()
            .enumerate()
            .map(|(i, (d, p))| Snapshot::from_counts(i, i as u64, d, p))
            .collect::<Result<Vec<_>, _>>()?;
        let wall_slots = snapshots.len() as u64;
        SnapshotSeries::new(grid, tau, start_time, BTreeSet::new(), wall_slots, snapshots)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Wall-clock start of an absolute slot, seconds since the epoch.
    pub fn slot_start(&self, wall_slot: u64) -> i64 {
        self.start_time + wall_slot as i64 * self.tau
    }

    /// Hour of day (0-23, UTC) at which an absolute slot starts.
    pub fn slot_hour(&self, wall_slot: u64) -> u8 {
        ((self.slot_start(wall_slot).rem_euclid(86_400)) / 3_600) as u8
    }

    pub fn validate(&self) -> Result<(), GridError> {
        self.grid.validate()?;
        if self.tau <= 0 {
            return Err(GridError::InvalidSpec(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.excluded_hours.iter().any(|&h| h > 23) {
            return Err(GridError::InvalidSpec(
                "excluded hours must lie in 0..=23".to_string(),
            ));
        }
        if (self.snapshots.len() as u64) > self.wall_slots {
            return Err(GridError::InvalidSpec(format!(
                "{} retained snapshots cannot exceed {} wall slots",
                self.snapshots.len(),
                self.wall_slots
            )));
        }
        let mut prev_wall: Option<u64> = None;
        for (i, snap) in self.snapshots.iter().enumerate() {
            if snap.index != i {
                return Err(GridError::InvalidSpec(format!(
                    "snapshot at position {i} has index {}; indices must be contiguous",
                    snap.index
                )));
            }
            if snap.wall_slot >= self.wall_slots {
                return Err(GridError::InvalidSpec(format!(
                    "snapshot {i} has wall slot {} beyond the series span {}",
                    snap.wall_slot, self.wall_slots
                )));
            }
            if let Some(prev) = prev_wall {
                if snap.wall_slot <= prev {
                    return Err(GridError::InvalidSpec(format!(
                        "snapshot {i} has wall slot {} not after its predecessor's {}",
                        snap.wall_slot, prev
                    )));
                }
            }
            prev_wall = Some(snap.wall_slot);
            let shape_ok = snap.dropoffs.shape() == (self.grid.rows, self.grid.cols)
                && snap.pickups.shape() == (self.grid.rows, self.grid.cols);
            if !shape_ok {
                return Err(GridError::InvalidSpec(format!(
                    "snapshot {i} matrices do not match the {}x{} grid",
                    self.grid.rows, self.grid.cols
                )));
            }
        }
        Ok(())
    }

    /// All pickup points across the series, in snapshot order.
    pub fn all_pickup_points(&self) -> Vec<Point2d> {
        self.snapshots
            .iter()
            .flat_map(|s| s.pickup_points.iter().copied())
            .collect()
    }

    pub fn total_dropoffs(&self) -> u64 {
        self.snapshots.iter().map(Snapshot::total_dropoffs).sum()
    }

    pub fn total_pickups(&self) -> u64 {
        self.snapshots.iter().map(Snapshot::total_pickups).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid() -> GridSpec {
        GridSpec::new(100.0, 3, 3, 40.0, -74.0, 40.0).unwrap()
    }

    #[test]
    fn from_matrices_numbers_slots_contiguously() {
        let slots = (0..4)
            .map(|_| (CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3)))
            .collect();
        let s = SnapshotSeries::from_matrices(grid(), 180, 0, slots).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.wall_slots, 4);
        for (i, snap) in s.snapshots.iter().enumerate() {
            assert_eq!(snap.index, i);
            assert_eq!(snap.wall_slot, i as u64);
        }
    }

    #[test]
    fn slot_hour_wraps_by_day() {
        let s = SnapshotSeries::from_matrices(grid(), 3_600, 0, vec![]).unwrap();
        assert_eq!(s.slot_hour(0), 0);
        assert_eq!(s.slot_hour(7), 7);
        assert_eq!(s.slot_hour(23), 23);
        assert_eq!(s.slot_hour(24), 0);
        assert_eq!(s.slot_hour(25), 1);
    }

    #[test]
    fn slot_hour_handles_pre_epoch_start() {
        // Start one hour before the epoch: slot 0 begins at 23:00.
        let s = SnapshotSeries {
            grid: grid(),
            tau: 3_600,
            start_time: -3_600,
            excluded_hours: BTreeSet::new(),
            wall_slots: 0,
            snapshots: vec![],
        };
        assert_eq!(s.slot_hour(0), 23);
        assert_eq!(s.slot_hour(1), 0);
    }

    #[test]
    fn validate_rejects_gaps_in_indices() {
        let mut s = SnapshotSeries::from_matrices(
            grid(),
            180,
            0,
            vec![
                (CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3)),
                (CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3)),
            ],
        )
        .unwrap();
        s.snapshots[1].index = 5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn validate_rejects_unsorted_wall_slots() {
        let mut s = SnapshotSeries::from_matrices(
            grid(),
            180,
            0,
            vec![
                (CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3)),
                (CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3)),
            ],
        )
        .unwrap();
        s.wall_slots = 10;
        s.snapshots[0].wall_slot = 3;
        s.snapshots[1].wall_slot = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn validate_rejects_wrong_shape() {
        let mut s =
            SnapshotSeries::from_matrices(grid(), 180, 0, vec![(CountMatrix::zeros(3, 3), CountMatrix::zeros(3, 3))])
                .unwrap();
        s.snapshots[0].pickups = CountMatrix::zeros(2, 3);
        assert!(s.validate().is_err());
    }
}
