//! Synthetic data with known ground truth: chaos-game attractor point sets
//! whose correlation dimension is known in closed form, and ride-request
//! streams with controllable spatial and temporal structure.
//!
//! All generation is driven by seeded ChaCha8 streams, so outputs are
//! byte-stable across runs and platforms for a fixed seed.

use crate::grid::{GridSpec, Point2d};
use crate::ingest::RequestRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(
        "grid ({have_w:.1} m x {have_h:.1} m) cannot contain the generator extent ({need_w:.1} m x {need_h:.1} m)"
    )]
    GridTooSmall {
        need_w: f64,
        need_h: f64,
        have_w: f64,
        have_h: f64,
    },
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// Planar sets with a known correlation dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorKind {
    /// Three half-scale corner maps; dimension `ln 3 / ln 2`.
    SierpinskiTriangle,
    /// Eight third-scale maps (center omitted); dimension `ln 8 / ln 3`.
    SierpinskiCarpet,
    /// Uniform area; dimension 2.
    UniformSquare,
    /// Uniform diagonal segment; dimension 1.
    LineSegment,
}

/// An attractor scaled to a bounding square of side `scale` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSpec {
    pub kind: AttractorKind,
    /// Side of the bounding square in meters.
    pub scale: f64,
}

impl AttractorSpec {
    pub fn new(kind: AttractorKind, scale: f64) -> Result<Self, SynthError> {
        let spec = AttractorSpec { kind, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "attractor scale must be positive and finite, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// The exact correlation dimension of the generated set.
    pub fn theoretical_d2(&self) -> f64 {
        match self.kind {
            AttractorKind::SierpinskiTriangle => 3.0_f64.ln() / 2.0_f64.ln(),
            AttractorKind::SierpinskiCarpet => 8.0_f64.ln() / 3.0_f64.ln(),
            AttractorKind::UniformSquare => 2.0,
            AttractorKind::LineSegment => 1.0,
        }
    }

    /// Extent of the generated set: `(width, height)` in meters.
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            AttractorKind::SierpinskiTriangle => (self.scale, self.scale * 3.0_f64.sqrt() / 2.0),
            _ => (self.scale, self.scale),
        }
    }
}

/// Chaos-game iterations needed before the state is, to double precision,
/// on the attractor (contraction factor >= 2 per step).
const BURN_IN: u32 = 32;

/// Chaos-game walk over an attractor. The RNG is borrowed per step so one
/// stream can interleave walks with other draws deterministically.
struct AttractorWalk {
    spec: AttractorSpec,
    state: Point2d,
}

impl AttractorWalk {
    /// Start a walk, burning in the chaos game where the map is iterative.
    fn new(spec: AttractorSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut walk = AttractorWalk {
            spec,
            state: Point2d::new(spec.scale / 2.0, spec.scale / 4.0),
        };
        if matches!(
            spec.kind,
            AttractorKind::SierpinskiTriangle | AttractorKind::SierpinskiCarpet
        ) {
            for _ in 0..BURN_IN {
                walk.step(rng);
            }
        }
        walk
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> Point2d {
        let s = self.spec.scale;
        self.state = match self.spec.kind {
            AttractorKind::SierpinskiTriangle => {
                let h = s * 3.0_f64.sqrt() / 2.0;
                let verts = [
                    Point2d::new(0.0, 0.0),
                    Point2d::new(s, 0.0),
                    Point2d::new(s / 2.0, h),
                ];
                let v = verts[rng.random_range(0..3)];
                Point2d::new((self.state.x + v.x) / 2.0, (self.state.y + v.y) / 2.0)
            }
            AttractorKind::SierpinskiCarpet => {
                // The eight contraction offsets (column, row) in thirds,
                // skipping the center.
                const OFFSETS: [(f64, f64); 8] = [
                    (0.0, 0.0),
                    (1.0, 0.0),
                    (2.0, 0.0),
                    (0.0, 1.0),
                    (2.0, 1.0),
                    (0.0, 2.0),
                    (1.0, 2.0),
                    (2.0, 2.0),
                ];
                let (ox, oy) = OFFSETS[rng.random_range(0..8)];
                Point2d::new((self.state.x + ox * s) / 3.0, (self.state.y + oy * s) / 3.0)
            }
            AttractorKind::UniformSquare => {
                Point2d::new(rng.random::<f64>() * s, rng.random::<f64>() * s)
            }
            AttractorKind::LineSegment => {
                let t = rng.random::<f64>() * s;
                Point2d::new(t, t)
            }
        };
        self.state
    }
}

/// Generate `n` points of the attractor. Deterministic per seed.
pub fn gen_points(spec: &AttractorSpec, n: usize, seed: u64) -> Result<Vec<Point2d>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = AttractorWalk::new(*spec, &mut rng);
    Ok((0..n).map(|_| walk.step(&mut rng)).collect())
}

/// How drop-off locations relate to pickup locations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum TripLaw {
    /// Drop-offs are drawn from the attractor independently of the pickup.
    Resample,
    /// Drop-offs land uniformly in a disk of `radius` meters around the
    /// pickup (clipped into the grid).
    UniformDisk { radius: f64 },
}

/// Uniform trip-duration range in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationRange {
    pub lo: f64,
    pub hi: f64,
}

impl DurationRange {
    fn validate(&self) -> Result<(), SynthError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.hi >= self.lo) {
            return Err(SynthError::InvalidSpec(format!(
                "trip duration range must satisfy 0 <= lo <= hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

/// Temporal structure of request arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ArrivalModel {
    /// One Poisson process at `rate` events/second; pickups follow the
    /// attractor's spatial law. With `count` set, exactly that many events
    /// are placed uniformly over the stream duration instead.
    GlobalRate { rate: f64, count: Option<u64> },
    /// Independent per-cell Poisson processes, row-major `rates` in
    /// events/second; pickups land uniformly inside their cell.
    RateMap {
        rows: usize,
        cols: usize,
        rates: Vec<f64>,
    },
}

/// Full recipe for a synthetic ride-request stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub attractor: AttractorSpec,
    pub arrivals: ArrivalModel,
    /// Stream length in seconds; pickups occur in `[0, duration)`.
    pub duration: f64,
    pub trip: TripLaw,
    pub trip_duration: DurationRange,
    pub seed: u64,
}

/// Keep generated coordinates strictly inside the grid so projection
/// round-trips cannot push a boundary point out.
const EDGE_MARGIN_M: f64 = 1e-6;

fn clamp_into_grid(p: Point2d, grid: &GridSpec) -> Point2d {
    Point2d::new(
        p.x.clamp(EDGE_MARGIN_M, grid.width_m() - EDGE_MARGIN_M),
        p.y.clamp(EDGE_MARGIN_M, grid.height_m() - EDGE_MARGIN_M),
    )
}

fn check_fits(spec: &AttractorSpec, grid: &GridSpec) -> Result<(), SynthError> {
    let (need_w, need_h) = spec.bounds();
    if need_w > grid.width_m() || need_h > grid.height_m() {
        return Err(SynthError::GridTooSmall {
            need_w,
            need_h,
            have_w: grid.width_m(),
            have_h: grid.height_m(),
        });
    }
    Ok(())
}

/// Generate a ride-request stream on `grid`, with pickup times offset by
/// `start_time` (seconds since the epoch). Records are sorted by pickup
/// time; all locations lie inside the grid. Deterministic per seed.
pub fn gen_ride_stream(
    spec: &StreamSpec,
    grid: &GridSpec,
    start_time: i64,
) -> Result<Vec<RequestRecord>, SynthError> {
    grid.validate()?;
    spec.attractor.validate()?;
    spec.trip_duration.validate()?;
    if !(spec.duration.is_finite() && spec.duration > 0.0) {
        return Err(SynthError::InvalidSpec(format!(
            "stream duration must be positive, got {}",
            spec.duration
        )));
    }
    if let TripLaw::UniformDisk { radius } = spec.trip {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "trip radius must be non-negative, got {radius}"
            )));
        }
    }
    match &spec.arrivals {
        ArrivalModel::GlobalRate { rate, count } => {
            gen_global_rate(spec, grid, start_time, *rate, *count)
        }
        ArrivalModel::RateMap { rows, cols, rates } => {
            gen_rate_map(spec, grid, start_time, *rows, *cols, rates)
        }
    }
}

/// Sub-streams of the generator seed, so arrival times, pickup locations,
/// drop-off locations, and trip parameters draw independently.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gen_global_rate(
    spec: &StreamSpec,
    grid: &GridSpec,
    start_time: i64,
    rate: f64,
    count: Option<u64>,
) -> Result<Vec<RequestRecord>, SynthError> {
    check_fits(&spec.attractor, grid)?;
    let mut arrival_rng = stream_rng(spec.seed, 0);
    let mut pickup_rng = stream_rng(spec.seed, 1);
    let mut dropoff_rng = stream_rng(spec.seed, 2);
    let mut trip_rng = stream_rng(spec.seed, 3);
    let mut pickup_walk = AttractorWalk::new(spec.attractor, &mut pickup_rng);
    let mut dropoff_walk = AttractorWalk::new(spec.attractor, &mut dropoff_rng);

    let times: Vec<f64> = match count {
        Some(n) => {
            let mut ts: Vec<f64> = (0..n)
                .map(|_| arrival_rng.random::<f64>() * spec.duration)
                .collect();
            ts.sort_unstable_by(f64::total_cmp);
            ts
        }
        None => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(SynthError::InvalidSpec(format!(
                    "arrival rate must be positive, got {rate}"
                )));
            }
            let exp = Exp::new(rate).expect("positive rate");
            let mut ts = Vec::new();
            let mut t = exp.sample(&mut arrival_rng);
            while t < spec.duration {
                ts.push(t);
                t += exp.sample(&mut arrival_rng);
            }
            ts
        }
    };

    let records = times
        .into_iter()
        .map(|t| {
            let p = clamp_into_grid(pickup_walk.step(&mut pickup_rng), grid);
            let d = sample_dropoff(spec, grid, p, &mut dropoff_walk, &mut dropoff_rng, &mut trip_rng);
            let dur = spec.trip_duration.sample(&mut trip_rng);
            make_record(grid, start_time, t, p, dur, d)
        })
        .collect();
    Ok(records)
}

fn sample_dropoff(
    spec: &StreamSpec,
    grid: &GridSpec,
    pickup: Point2d,
    dropoff_walk: &mut AttractorWalk,
    dropoff_rng: &mut ChaCha8Rng,
    trip_rng: &mut ChaCha8Rng,
) -> Point2d {
    let raw = match spec.trip {
        TripLaw::Resample => dropoff_walk.step(dropoff_rng),
        TripLaw::UniformDisk { radius } => {
            let theta = trip_rng.random::<f64>() * std::f64::consts::TAU;
            let r = radius * trip_rng.random::<f64>().sqrt();
            Point2d::new(pickup.x + r * theta.cos(), pickup.y + r * theta.sin())
        }
    };
    clamp_into_grid(raw, grid)
}

fn make_record(
    grid: &GridSpec,
    start_time: i64,
    t: f64,
    pickup: Point2d,
    duration: f64,
    dropoff: Point2d,
) -> RequestRecord {
    let (pickup_lat, pickup_lon) = grid.to_globe(pickup);
    let (dropoff_lat, dropoff_lon) = grid.to_globe(dropoff);
    RequestRecord {
        pickup_time: start_time + t.floor() as i64,
        pickup_lat,
        pickup_lon,
        dropoff_lat,
        dropoff_lon,
        dropoff_time: start_time + (t + duration).floor() as i64,
    }
}

fn gen_rate_map(
    spec: &StreamSpec,
    grid: &GridSpec,
    start_time: i64,
    rows: usize,
    cols: usize,
    rates: &[f64],
) -> Result<Vec<RequestRecord>, SynthError> {
    if rows != grid.rows || cols != grid.cols {
        return Err(SynthError::InvalidSpec(format!(
            "rate map is {rows}x{cols} but the grid is {}x{}",
            grid.rows, grid.cols
        )));
    }
    if rates.len() != rows * cols {
        return Err(SynthError::InvalidSpec(format!(
            "rate map has {} entries for a {rows}x{cols} grid",
            rates.len()
        )));
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(SynthError::InvalidSpec(
            "rates must be finite and non-negative".to_string(),
        ));
    }
    if let TripLaw::Resample = spec.trip {
        check_fits(&spec.attractor, grid)?;
    }

    // (continuous time, cell id, record): merged and sorted at the end so the
    // output is a single time-ordered stream regardless of per-cell
    // generation order.
    let mut events: Vec<(f64, usize, RequestRecord)> = Vec::new();
    for (cell_id, &rate) in rates.iter().enumerate() {
        if rate <= 0.0 {
            continue;
        }
        let row = cell_id / cols;
        let col = cell_id % cols;
        // Each cell owns one RNG stream, so adding or re-rating a cell never
        // perturbs the others.
        let mut rng = stream_rng(spec.seed, cell_id as u64 + 1);
        let mut dropoff_walk = AttractorWalk::new(spec.attractor, &mut rng);
        let exp = Exp::new(rate).expect("positive rate");
        let mut t = exp.sample(&mut rng);
        while t < spec.duration {
            let px = (col as f64 + rng.random::<f64>()) * grid.epsilon;
            let py = (row as f64 + rng.random::<f64>()) * grid.epsilon;
            let p = clamp_into_grid(Point2d::new(px, py), grid);
            let d = match spec.trip {
                TripLaw::Resample => clamp_into_grid(dropoff_walk.step(&mut rng), grid),
                TripLaw::UniformDisk { radius } => {
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    let r = radius * rng.random::<f64>().sqrt();
                    clamp_into_grid(
                        Point2d::new(p.x + r * theta.cos(), p.y + r * theta.sin()),
                        grid,
                    )
                }
            };
            let dur = spec.trip_duration.sample(&mut rng);
            events.push((t, cell_id, make_record(grid, start_time, t, p, dur, d)));
            t += exp.sample(&mut rng);
        }
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(events.into_iter().map(|(_, _, rec)| rec).collect())
}

/// Turn an attractor's occupancy profile into a per-cell rate map with total
/// rate `total_rate` events/second, by sampling `samples` attractor points
/// and splitting the rate proportionally to cell hit counts.
pub fn rate_map_from_attractor(
    spec: &AttractorSpec,
    grid: &GridSpec,
    total_rate: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, SynthError> {
    grid.validate()?;
    check_fits(spec, grid)?;
    if !(total_rate.is_finite() && total_rate > 0.0) {
        return Err(SynthError::InvalidSpec(format!(
            "total rate must be positive, got {total_rate}"
        )));
    }
    if samples == 0 {
        return Err(SynthError::InvalidSpec("need at least one sample".to_string()));
    }
    let mut counts = vec![0u64; grid.cell_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = AttractorWalk::new(*spec, &mut rng);
    for _ in 0..samples {
        let p = clamp_into_grid(walk.step(&mut rng), grid);
        let row = (p.y / grid.epsilon).floor() as usize;
        let col = (p.x / grid.epsilon).floor() as usize;
        counts[row * grid.cols + col] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / samples as f64 * total_rate)
        .collect())
}

/// Derive a component seed from a global seed and a label, so "the synth
/// seed" and "the simulation seed" of one experiment are decorrelated but
/// reproducible. FNV-1a over the label, mixed with a SplitMix64 finalizer.
pub fn derive_seed(global: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ global;
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}
