//! Spatial model: a city grid of square cells, projection from WGS-84
//! coordinates, reachable neighborhoods, and placement reward.
//!
//! Distances are in meters on a local tangent plane. A grid has `rows x cols`
//! cells of side `epsilon`; cell `(0, 0)` has its south-west corner at the
//! plane origin, rows grow northward and columns grow eastward.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Mean Earth radius in meters, used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("point ({east:.3} m E, {north:.3} m N) is outside the {rows}x{cols} grid")]
    OutOfBounds {
        east: f64,
        north: f64,
        rows: usize,
        cols: usize,
    },
    #[error("cell ({row}, {col}) is outside the {rows}x{cols} grid")]
    CellOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("non-finite coordinate: lat {lat}, lon {lon}")]
    NonFiniteCoordinate { lat: f64, lon: f64 },
}

/// A grid cell addressed by `(row, col)`, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// A point on the local tangent plane, meters east (`x`) and north (`y`) of
/// the grid origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2d {
    pub x: f64,
    pub y: f64,
}

impl Point2d {
    pub fn new(x: f64, y: f64) -> Self {
        Point2d { x, y }
    }

    /// Chebyshev (L-infinity) distance to another point.
    pub fn linf_dist(&self, other: &Point2d) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

/// Geometry of the city grid plus the projection anchoring it to the globe.
///
/// `origin_lat`/`origin_lon` is the WGS-84 position of the grid's south-west
/// corner; `ref_lat` is the latitude whose cosine scales longitude degrees to
/// meters (usually the center latitude of the covered area).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cell side length in meters.
    pub epsilon: f64,
    pub rows: usize,
    pub cols: usize,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub ref_lat: f64,
}

impl GridSpec {
    pub fn new(
        epsilon: f64,
        rows: usize,
        cols: usize,
        origin_lat: f64,
        origin_lon: f64,
        ref_lat: f64,
    ) -> Result<Self, GridError> {
        let spec = GridSpec {
            epsilon,
            rows,
            cols,
            origin_lat,
            origin_lon,
            ref_lat,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(GridError::InvalidSpec(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(GridError::InvalidSpec(format!(
                "grid must have at least one cell, got {}x{}",
                self.rows, self.cols
            )));
        }
        for (name, v) in [
            ("origin_lat", self.origin_lat),
            ("origin_lon", self.origin_lon),
            ("ref_lat", self.ref_lat),
        ] {
            if !v.is_finite() {
                return Err(GridError::InvalidSpec(format!("{name} must be finite, got {v}")));
            }
        }
        if self.origin_lat.abs() > 90.0 || self.ref_lat.abs() > 90.0 {
            return Err(GridError::InvalidSpec(
                "latitudes must lie in [-90, 90]".to_string(),
            ));
        }
        if self.ref_lat.to_radians().cos() <= 1e-6 {
            return Err(GridError::InvalidSpec(
                "ref_lat too close to a pole for an equirectangular projection".to_string(),
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Width (east extent) of the grid in meters.
    pub fn width_m(&self) -> f64 {
        self.cols as f64 * self.epsilon
    }

    /// Height (north extent) of the grid in meters.
    pub fn height_m(&self) -> f64 {
        self.rows as f64 * self.epsilon
    }

    /// Equirectangular projection of a WGS-84 coordinate onto the tangent
    /// plane: meters north/east of the grid origin, with longitude scaled by
    /// `cos(ref_lat)`.
    pub fn to_plane(&self, lat: f64, lon: f64) -> Result<Point2d, GridError> {
        if !(lat.is_finite() && lon.is_finite()) {
            return Err(GridError::NonFiniteCoordinate { lat, lon });
        }
        let north = (lat - self.origin_lat).to_radians() * EARTH_RADIUS_M;
        let east =
            (lon - self.origin_lon).to_radians() * EARTH_RADIUS_M * self.ref_lat.to_radians().cos();
        Ok(Point2d::new(east, north))
    }

    /// Inverse of [`GridSpec::to_plane`].
    pub fn to_globe(&self, point: Point2d) -> (f64, f64) {
        let lat = self.origin_lat + (point.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin_lon
            + (point.x / (EARTH_RADIUS_M * self.ref_lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }

    /// Cell containing a plane point, or `OutOfBounds` if it falls outside
    /// the grid. Cell edges belong to the cell north/east of them, i.e. a
    /// point is binned by `floor(coord / epsilon)`.
    pub fn locate(&self, point: Point2d) -> Result<Cell, GridError> {
        let row = (point.y / self.epsilon).floor();
        let col = (point.x / self.epsilon).floor();
        if row < 0.0 || col < 0.0 || row >= self.rows as f64 || col >= self.cols as f64 {
            return Err(GridError::OutOfBounds {
                east: point.x,
                north: point.y,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(Cell::new(row as usize, col as usize))
    }

    /// Project a WGS-84 coordinate and bin it into a cell.
    pub fn locate_globe(&self, lat: f64, lon: f64) -> Result<Cell, GridError> {
        self.locate(self.to_plane(lat, lon)?)
    }

    /// Center of a cell on the plane.
    pub fn cell_center(&self, cell: Cell) -> Point2d {
        Point2d::new(
            (cell.col as f64 + 0.5) * self.epsilon,
            (cell.row as f64 + 0.5) * self.epsilon,
        )
    }

    /// Side length, in cells, of the neighborhood a vehicle can reach when it
    /// may travel `reach` meters in any direction: `round(2 * reach / epsilon)`
    /// cells, minimum 1 so a vehicle can always stay put.
    pub fn neighborhood_side(&self, reach: f64) -> usize {
        let c = (2.0 * reach / self.epsilon).round() as isize;
        c.max(1) as usize
    }

    /// Cells reachable from `center` within `reach` meters, clipped to the
    /// grid.
    ///
    /// The neighborhood is a `c x c` block of cells around the center, with
    /// `c = round(2 * reach / epsilon)`. For odd `c` the block is symmetric;
    /// for even `c` it extends one extra cell north/east, covering offsets
    /// `-(c - 1) / 2 ..= c / 2` (integer division) in both axes. The center
    /// cell is always a member.
    pub fn neighborhood(&self, center: Cell, reach: f64) -> Result<Neighborhood, GridError> {
        if center.row >= self.rows || center.col >= self.cols {
            return Err(GridError::CellOutOfBounds {
                row: center.row,
                col: center.col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let side = self.neighborhood_side(reach);
        let lo = -((side as isize - 1) / 2);
        let hi = side as isize / 2;
        let mut cells = Vec::new();
        for dr in lo..=hi {
            let row = center.row as isize + dr;
            if row < 0 || row >= self.rows as isize {
                continue;
            }
            for dc in lo..=hi {
                let col = center.col as isize + dc;
                if col < 0 || col >= self.cols as isize {
                    continue;
                }
                cells.push(Cell::new(row as usize, col as usize));
            }
        }
        Ok(Neighborhood { center, side, cells })
    }
}

/// The set of cells a vehicle dropped off at `center` may be placed into.
///
/// `cells` is sorted row-major (a consequence of construction order) and
/// always contains `center`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: Cell,
    /// Unclipped side length in cells.
    pub side: usize,
    pub cells: Vec<Cell>,
}

impl Neighborhood {
    pub fn contains(&self, cell: Cell) -> bool {
        // Cells are sorted row-major by construction.
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// A dense `rows x cols` matrix of event counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CountMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Build from row-major data; length must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u32>) -> Result<Self, GridError> {
        if data.len() != rows * cols {
            return Err(GridError::ShapeMismatch {
                left_rows: rows,
                left_cols: cols,
                right_rows: data.len(),
                right_cols: 1,
            });
        }
        Ok(CountMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn same_shape(&self, other: &CountMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    #[inline]
    fn idx(&self, cell: Cell) -> usize {
        debug_assert!(cell.row < self.rows && cell.col < self.cols);
        cell.row * self.cols + cell.col
    }

    pub fn get(&self, cell: Cell) -> u32 {
        self.data[self.idx(cell)]
    }

    pub fn set(&mut self, cell: Cell, value: u32) {
        let i = self.idx(cell);
        self.data[i] = value;
    }

    pub fn increment(&mut self, cell: Cell) {
        let i = self.idx(cell);
        self.data[i] += 1;
    }

    pub fn add(&mut self, cell: Cell, amount: u32) {
        let i = self.idx(cell);
        self.data[i] += amount;
    }

    /// Saturating decrement; a zero entry stays zero.
    pub fn saturating_sub(&mut self, cell: Cell, amount: u32) {
        let i = self.idx(cell);
        self.data[i] = self.data[i].saturating_sub(amount);
    }

    /// Sum of all entries.
    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    /// Row-major iterator over `(cell, count)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, u32)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, &v)| (Cell::new(i / self.cols, i % self.cols), v))
    }

    /// Row-major iterator over cells with a non-zero count.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (Cell, u32)> + '_ {
        self.iter().filter(|&(_, v)| v > 0)
    }

    /// Element-wise sum of two matrices of the same shape.
    pub fn sum(&self, other: &CountMatrix) -> Result<CountMatrix, GridError> {
        if !self.same_shape(other) {
            return Err(GridError::ShapeMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(CountMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }
}

/// Where an algorithm chose to place vehicles for one upcoming snapshot:
/// entry `(i, j)` is the number of vehicles parked in cell `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMatrix(pub CountMatrix);

impl PlacementMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PlacementMatrix(CountMatrix::zeros(rows, cols))
    }

    pub fn counts(&self) -> &CountMatrix {
        &self.0
    }

    /// Total vehicles placed.
    pub fn placed(&self) -> u64 {
        self.0.total()
    }
}

/// Outcome of scoring one placement against the pickups that materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardValue {
    /// Vehicles that found a request in their own cell: `sum min(P, Gamma)`.
    pub matched: u64,
    /// Vehicles placed (`n`, the normalizer).
    pub placements: u64,
}

impl RewardValue {
    /// Fraction of placed vehicles matched, in `[0, 1]`. Zero placements
    /// yield 0.0; check [`RewardValue::is_empty`] to distinguish that case.
    pub fn value(&self) -> f64 {
        if self.placements == 0 {
            0.0
        } else {
            self.matched as f64 / self.placements as f64
        }
    }

    /// True when no vehicles were placed, making the fraction undefined.
    pub fn is_empty(&self) -> bool {
        self.placements == 0
    }
}

/// Score a placement against realized pickups: per cell, each placed vehicle
/// serves at most one request and each request is served by at most one
/// vehicle, so cell `(i, j)` contributes `min(P[i,j], Gamma[i,j])` matches.
/// The reward is the matched count divided by the number of placed vehicles.
pub fn reward(pickups: &CountMatrix, placements: &PlacementMatrix) -> Result<RewardValue, GridError> {
    let gamma = placements.counts();
    if !pickups.same_shape(gamma) {
        return Err(GridError::ShapeMismatch {
            left_rows: pickups.rows(),
            left_cols: pickups.cols(),
            right_rows: gamma.rows(),
            right_cols: gamma.cols(),
        });
    }
    let matched: u64 = pickups
        .as_slice()
        .iter()
        .zip(gamma.as_slice())
        .map(|(&p, &g)| p.min(g) as u64)
        .sum();
    Ok(RewardValue {
        matched,
        placements: gamma.total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(epsilon: f64, rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(epsilon, rows, cols, 40.0, -74.0, 40.05).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_inputs() {
        assert!(GridSpec::new(0.0, 5, 5, 40.0, -74.0, 40.0).is_err());
        assert!(GridSpec::new(-1.0, 5, 5, 40.0, -74.0, 40.0).is_err());
        assert!(GridSpec::new(100.0, 0, 5, 40.0, -74.0, 40.0).is_err());
        assert!(GridSpec::new(100.0, 5, 5, 95.0, -74.0, 40.0).is_err());
        assert!(GridSpec::new(100.0, 5, 5, 40.0, -74.0, 90.0).is_err());
        assert!(GridSpec::new(100.0, 5, 5, 40.0, f64::NAN, 40.0).is_err());
        assert!(GridSpec::new(100.0, 5, 5, 40.0, -74.0, 40.0).is_ok());
    }

    #[test]
    fn projection_matches_hand_computation() {
        let g = spec(100.0, 10, 10);
        // One degree of latitude north of the origin.
        let p = g.to_plane(41.0, -74.0).unwrap();
        assert_relative_eq!(p.y, 1.0_f64.to_radians() * EARTH_RADIUS_M, max_relative = 1e-12);
        assert_relative_eq!(p.x, 0.0);
        // One degree of longitude east, scaled by cos(ref_lat).
        let p = g.to_plane(40.0, -73.0).unwrap();
        assert_relative_eq!(
            p.x,
            1.0_f64.to_radians() * EARTH_RADIUS_M * 40.05_f64.to_radians().cos(),
            max_relative = 1e-12
        );
        assert_relative_eq!(p.y, 0.0);
    }

    #[test]
    fn projection_round_trips() {
        let g = spec(100.0, 10, 10);
        for &(lat, lon) in &[(40.003, -73.996), (40.0089, -73.9912), (40.0, -74.0)] {
            let p = g.to_plane(lat, lon).unwrap();
            let (lat2, lon2) = g.to_globe(p);
            assert_relative_eq!(lat, lat2, epsilon = 1e-12);
            assert_relative_eq!(lon, lon2, epsilon = 1e-12);
        }
    }

    #[test]
    fn locate_bins_by_floor_and_rejects_outside() {
        let g = spec(100.0, 4, 3);
        assert_eq!(g.locate(Point2d::new(0.0, 0.0)).unwrap(), Cell::new(0, 0));
        assert_eq!(g.locate(Point2d::new(99.9, 0.0)).unwrap(), Cell::new(0, 0));
        assert_eq!(g.locate(Point2d::new(100.0, 0.0)).unwrap(), Cell::new(0, 1));
        assert_eq!(g.locate(Point2d::new(250.0, 399.9)).unwrap(), Cell::new(3, 2));
        assert!(matches!(
            g.locate(Point2d::new(-0.1, 0.0)),
            Err(GridError::OutOfBounds { .. })
        ));
        assert!(matches!(
            g.locate(Point2d::new(0.0, 400.0)),
            Err(GridError::OutOfBounds { .. })
        ));
        assert!(matches!(
            g.locate(Point2d::new(300.0, 0.0)),
            Err(GridError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn neighborhood_side_rounds_reach_ratio() {
        let g = spec(100.0, 50, 50);
        // 2 * 150 / 100 = 3.
        assert_eq!(g.neighborhood_side(150.0), 3);
        // 2 * 500 / 100 = 10.
        assert_eq!(g.neighborhood_side(500.0), 10);
        // 2 * 120 / 100 = 2.4 rounds to 2.
        assert_eq!(g.neighborhood_side(120.0), 2);
        // Tiny reach still allows staying put.
        assert_eq!(g.neighborhood_side(10.0), 1);
    }

    #[test]
    fn odd_neighborhood_is_symmetric_and_clipped() {
        let g = spec(100.0, 5, 5);
        let nh = g.neighborhood(Cell::new(2, 2), 150.0).unwrap();
        assert_eq!(nh.side, 3);
        assert_eq!(nh.len(), 9);
        for dr in -1..=1_isize {
            for dc in -1..=1_isize {
                let c = Cell::new((2 + dr) as usize, (2 + dc) as usize);
                assert!(nh.contains(c), "missing {c}");
            }
        }
        // Corner cell: the 3x3 block clips to 2x2.
        let nh = g.neighborhood(Cell::new(0, 0), 150.0).unwrap();
        assert_eq!(nh.len(), 4);
        assert!(nh.contains(Cell::new(0, 0)));
        assert!(nh.contains(Cell::new(1, 1)));
    }

    #[test]
    fn even_neighborhood_extends_north_east() {
        let g = spec(100.0, 6, 6);
        let nh = g.neighborhood(Cell::new(2, 2), 100.0).unwrap();
        // side 2: offsets 0..=1 in each axis.
        assert_eq!(nh.side, 2);
        assert_eq!(
            nh.cells,
            vec![
                Cell::new(2, 2),
                Cell::new(2, 3),
                Cell::new(3, 2),
                Cell::new(3, 3)
            ]
        );
    }

    #[test]
    fn neighborhood_always_contains_center() {
        let g = spec(100.0, 7, 7);
        for reach in [10.0, 100.0, 150.0, 350.0, 10_000.0] {
            for row in 0..7 {
                for col in 0..7 {
                    let c = Cell::new(row, col);
                    let nh = g.neighborhood(c, reach).unwrap();
                    assert!(nh.contains(c));
                }
            }
        }
    }

    #[test]
    fn count_matrix_roundtrip_and_totals() {
        let mut m = CountMatrix::zeros(3, 4);
        assert_eq!(m.total(), 0);
        m.increment(Cell::new(1, 2));
        m.increment(Cell::new(1, 2));
        m.add(Cell::new(2, 0), 5);
        assert_eq!(m.get(Cell::new(1, 2)), 2);
        assert_eq!(m.get(Cell::new(2, 0)), 5);
        assert_eq!(m.total(), 7);
        let nz: Vec<_> = m.iter_nonzero().collect();
        assert_eq!(nz, vec![(Cell::new(1, 2), 2), (Cell::new(2, 0), 5)]);
        m.saturating_sub(Cell::new(2, 0), 7);
        assert_eq!(m.get(Cell::new(2, 0)), 0);
    }

    #[test]
    fn reward_hand_examples() {
        // P = [[2, 0], [1, 3]], Gamma = [[1, 1], [0, 5]]:
        // matched = min(2,1) + min(0,1) + min(1,0) + min(3,5) = 1 + 0 + 0 + 3 = 4
        // placements = 7, reward = 4/7.
        let p = CountMatrix::from_vec(2, 2, vec![2, 0, 1, 3]).unwrap();
        let g = PlacementMatrix(CountMatrix::from_vec(2, 2, vec![1, 1, 0, 5]).unwrap());
        let r = reward(&p, &g).unwrap();
        assert_eq!(r.matched, 4);
        assert_eq!(r.placements, 7);
        assert_relative_eq!(r.value(), 4.0 / 7.0);
        assert!(!r.is_empty());
    }

    #[test]
    fn reward_empty_placement_is_flagged() {
        let p = CountMatrix::from_vec(2, 2, vec![2, 0, 1, 3]).unwrap();
        let g = PlacementMatrix::zeros(2, 2);
        let r = reward(&p, &g).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.value(), 0.0);
    }

    #[test]
    fn reward_rejects_shape_mismatch() {
        let p = CountMatrix::zeros(2, 2);
        let g = PlacementMatrix::zeros(2, 3);
        assert!(matches!(reward(&p, &g), Err(GridError::ShapeMismatch { .. })));
    }
}
