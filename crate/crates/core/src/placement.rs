//! Vehicle placement policies and the simulation loop that scores them.
//!
//! At each decision step `t`, the vehicles dropped off during snapshot `t`
//! must each be parked in a cell of their drop-off neighborhood (the cells
//! reachable within `reach` meters). The placement is scored against the
//! pickups of snapshot `t + 1`: a vehicle earns a match when its cell still
//! has an unserved request, and the step reward is the matched fraction of
//! placed vehicles.
//!
//! Policies:
//! - `urand_nh`: park uniformly at random in the neighborhood.
//! - `pp_lh`: fit per-cell Poisson arrival rates over a trailing window of
//!   snapshots and park greedily on the highest-rate reachable cell, using
//!   each estimated cell at most once per step.
//! - `ftl_ch`: follow the leader — park on the reachable cell with the
//!   highest all-time event count, discounting cells already claimed this
//!   step.
//! - `opt`: offline upper bound — maximize matches exactly via max flow,
//!   knowing the next snapshot's pickups.

use crate::flow::FlowNetwork;
use crate::grid::{reward, Cell, CountMatrix, GridError, GridSpec, PlacementMatrix};
use crate::series::{Snapshot, SnapshotSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::ops::Range;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("series has {got} snapshots; this configuration needs at least {needed}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("inter-arrival gaps must be positive and finite, got {gap}")]
    NonPositiveGap { gap: f64 },
}

/// The placement policies (and the offline oracle) this crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    UrandNh,
    PpLh,
    FtlCh,
    Opt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::UrandNh,
        Algorithm::PpLh,
        Algorithm::FtlCh,
        Algorithm::Opt,
    ];

    /// Stable machine-readable name, used in file names and CLI arguments.
    pub fn wire_name(&self) -> &'static str {
        match self {
            Algorithm::UrandNh => "urand_nh",
            Algorithm::PpLh => "pp_lh",
            Algorithm::FtlCh => "ftl_ch",
            Algorithm::Opt => "opt",
        }
    }

    pub fn from_wire(name: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.wire_name() == name)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// Tunables shared by the policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    /// Maximum travel distance when repositioning, in meters.
    pub reach: f64,
    /// Trailing window length (`pp_lh`'s estimation window; also the number
    /// of warm-up snapshots consumed before the first placement of the
    /// history-driven policies).
    pub window: usize,
    /// Minimum windowed event count a cell must exceed for a rate estimate
    /// (`pp_lh` only; strictly greater-than).
    pub threshold: u32,
}

impl AlgoParams {
    /// Conventional defaults per policy: 500 m reach; a 20-snapshot
    /// estimation window for `pp_lh`; a 3-snapshot warm-up for `ftl_ch`.
    pub fn defaults_for(algo: Algorithm) -> AlgoParams {
        AlgoParams {
            reach: 500.0,
            window: match algo {
                Algorithm::PpLh => 20,
                Algorithm::FtlCh => 3,
                _ => 0,
            },
            threshold: 3,
        }
    }

    pub fn validate(&self, algo: Algorithm) -> Result<(), SimError> {
        if !(self.reach.is_finite() && self.reach > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "reach must be positive and finite, got {}",
                self.reach
            )));
        }
        if algo == Algorithm::PpLh && self.window == 0 {
            return Err(SimError::InvalidParams(
                "pp_lh needs a window of at least 1 snapshot".to_string(),
            ));
        }
        if algo == Algorithm::PpLh && self.threshold < 2 {
            return Err(SimError::InvalidParams(format!(
                "pp_lh needs a sample threshold of at least 2, got {}",
                self.threshold
            )));
        }
        if algo == Algorithm::FtlCh && self.window == 0 {
            return Err(SimError::InvalidParams(
                "ftl_ch needs a warm-up of at least 1 snapshot".to_string(),
            ));
        }
        Ok(())
    }
}

/// Running event history over a contiguous range of snapshots: per-cell
/// drop-off + pickup counts, and per-cell event times for rate estimation.
///
/// Counts come from the snapshot matrices; times from `Snapshot::event_times`
/// (empty for hand-built series, in which case rate estimators simply see no
/// data and policies fall back to their no-estimate behavior).
#[derive(Debug, Clone)]
pub struct HistoryState {
    counts: CountMatrix,
    times: HashMap<Cell, VecDeque<f64>>,
    window: Range<usize>,
}

impl HistoryState {
    pub fn new(rows: usize, cols: usize) -> Self {
        HistoryState {
            counts: CountMatrix::zeros(rows, cols),
            times: HashMap::new(),
            window: 0..0,
        }
    }

    /// Snapshot index range `[start, end)` currently covered.
    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    pub fn len(&self) -> usize {
        self.window.end - self.window.start
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Combined drop-off + pickup counts over the covered range.
    pub fn counts(&self) -> &CountMatrix {
        &self.counts
    }

    /// Event times for a cell over the covered range, oldest first.
    pub fn cell_times(&self, cell: Cell) -> Option<&VecDeque<f64>> {
        self.times.get(&cell)
    }

    /// Append the next snapshot (must directly follow the covered range).
    pub fn push(&mut self, snap: &Snapshot) {
        if self.window.is_empty() {
            self.window = snap.index..snap.index;
        }
        assert_eq!(
            snap.index, self.window.end,
            "history must be fed contiguous snapshots"
        );
        self.window.end += 1;
        for (cell, c) in snap.dropoffs.iter_nonzero() {
            self.counts.add(cell, c);
        }
        for (cell, c) in snap.pickups.iter_nonzero() {
            self.counts.add(cell, c);
        }
        for (cell, ts) in &snap.event_times {
            self.times.entry(*cell).or_default().extend(ts.iter().copied());
        }
    }

    /// Drop the oldest covered snapshot (pass that same snapshot back in).
    pub fn retire(&mut self, snap: &Snapshot) {
        assert_eq!(
            snap.index, self.window.start,
            "snapshots retire oldest-first"
        );
        assert!(!self.window.is_empty(), "nothing to retire");
        self.window.start += 1;
        for (cell, c) in snap.dropoffs.iter_nonzero() {
            debug_assert!(self.counts.get(cell) >= c);
            self.counts.saturating_sub(cell, c);
        }
        for (cell, c) in snap.pickups.iter_nonzero() {
            debug_assert!(self.counts.get(cell) >= c);
            self.counts.saturating_sub(cell, c);
        }
        for (cell, ts) in &snap.event_times {
            if let Some(q) = self.times.get_mut(cell) {
                for _ in 0..ts.len() {
                    q.pop_front();
                }
                if q.is_empty() {
                    self.times.remove(cell);
                }
            }
        }
    }
}

/// Maximum-likelihood Poisson rate from inter-arrival gaps: the inverse of
/// the mean gap. Gaps must be positive and finite.
pub fn mle_lambda(gaps: &[f64]) -> Result<f64, SimError> {
    if gaps.is_empty() {
        return Err(SimError::InsufficientData(
            "no inter-arrival gaps to fit".to_string(),
        ));
    }
    let mut sum = 0.0;
    for &g in gaps {
        if !(g.is_finite() && g > 0.0) {
            return Err(SimError::NonPositiveGap { gap: g });
        }
        sum += g;
    }
    Ok(gaps.len() as f64 / sum)
}

/// Probability a Poisson process at rate `lambda` produces at least one
/// event within `t` seconds: `1 - exp(-lambda * t)`.
pub fn prob_event(lambda: f64, t: f64) -> Result<f64, SimError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SimError::InvalidParams(format!(
            "rate must be non-negative and finite, got {lambda}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(SimError::InvalidParams(format!(
            "horizon must be non-negative and finite, got {t}"
        )));
    }
    Ok(1.0 - (-lambda * t).exp())
}

fn check_shape(grid: &GridSpec, m: &CountMatrix) -> Result<(), SimError> {
    if m.shape() != (grid.rows, grid.cols) {
        return Err(GridError::ShapeMismatch {
            left_rows: grid.rows,
            left_cols: grid.cols,
            right_rows: m.rows(),
            right_cols: m.cols(),
        }
        .into());
    }
    Ok(())
}

/// Park every dropped-off vehicle uniformly at random within its drop-off
/// neighborhood. Cells are processed row-major; each vehicle draws once.
pub fn place_urand_nh(
    grid: &GridSpec,
    dropoffs: &CountMatrix,
    reach: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PlacementMatrix, SimError> {
    check_shape(grid, dropoffs)?;
    let mut placed = PlacementMatrix::zeros(grid.rows, grid.cols);
    for (cell, d) in dropoffs.iter_nonzero() {
        let nh = grid.neighborhood(cell, reach)?;
        for _ in 0..d {
            let pick = nh.cells[rng.random_range(0..nh.cells.len())];
            placed.0.increment(pick);
        }
    }
    Ok(placed)
}

/// Park vehicles on the reachable cells most likely to produce a request,
/// ranked by Poisson rates fitted over the trailing history window.
///
/// A cell gets a rate estimate when its windowed event count strictly
/// exceeds `threshold` and its merged event times yield at least one
/// positive inter-arrival gap (within-second duplicates are ignored). Each
/// estimated cell is used at most once per step: once chosen, its estimate
/// is retired so later vehicles spread out. Vehicles with no estimated cell
/// in reach park uniformly at random in their neighborhood. Rate ties break
/// uniformly at random.
pub fn place_pp_lh(
    grid: &GridSpec,
    dropoffs: &CountMatrix,
    history: &HistoryState,
    reach: f64,
    threshold: u32,
    rng: &mut ChaCha8Rng,
) -> Result<PlacementMatrix, SimError> {
    check_shape(grid, dropoffs)?;
    check_shape(grid, history.counts())?;
    // Fit rates once per step; BTreeMap keeps candidate scans ordered.
    let mut estimates: std::collections::BTreeMap<Cell, f64> = std::collections::BTreeMap::new();
    for (cell, count) in history.counts().iter_nonzero() {
        if count <= threshold {
            continue;
        }
        let Some(times) = history.cell_times(cell) else {
            continue;
        };
        let mut gaps = Vec::with_capacity(times.len().saturating_sub(1));
        let mut iter = times.iter();
        if let Some(&first) = iter.next() {
            let mut prev = first;
            for &t in iter {
                let gap = t - prev;
                if gap > 0.0 {
                    gaps.push(gap);
                }
                prev = t;
            }
        }
        if !gaps.is_empty() {
            estimates.insert(cell, mle_lambda(&gaps)?);
        }
    }

    let mut placed = PlacementMatrix::zeros(grid.rows, grid.cols);
    let mut ties: Vec<Cell> = Vec::new();
    for (cell, d) in dropoffs.iter_nonzero() {
        let nh = grid.neighborhood(cell, reach)?;
        for _ in 0..d {
            let mut best: Option<f64> = None;
            ties.clear();
            for &cand in &nh.cells {
                let Some(&lambda) = estimates.get(&cand) else {
                    continue;
                };
                match best {
                    Some(b) if lambda < b => {}
                    Some(b) if lambda == b => ties.push(cand),
                    _ => {
                        best = Some(lambda);
                        ties.clear();
                        ties.push(cand);
                    }
                }
            }
            let pick = if ties.is_empty() {
                nh.cells[rng.random_range(0..nh.cells.len())]
            } else {
                let chosen = ties[if ties.len() == 1 {
                    0
                } else {
                    rng.random_range(0..ties.len())
                }];
                estimates.remove(&chosen);
                chosen
            };
            placed.0.increment(pick);
        }
    }
    Ok(placed)
}

/// Park vehicles on the reachable cells with the highest cumulative event
/// counts ("follow the leader"). Each placement provisionally discounts the
/// chosen cell's count by one for the remainder of the step, so a burst of
/// vehicles spreads over the leading cells; the discount does not persist.
/// Count ties break uniformly at random; an all-zero neighborhood falls
/// back to a uniform draw.
pub fn place_ftl_ch(
    grid: &GridSpec,
    dropoffs: &CountMatrix,
    history_counts: &CountMatrix,
    reach: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PlacementMatrix, SimError> {
    check_shape(grid, dropoffs)?;
    check_shape(grid, history_counts)?;
    let mut working = history_counts.clone();
    let mut placed = PlacementMatrix::zeros(grid.rows, grid.cols);
    let mut ties: Vec<Cell> = Vec::new();
    for (cell, d) in dropoffs.iter_nonzero() {
        let nh = grid.neighborhood(cell, reach)?;
        for _ in 0..d {
            let mut best = 0u32;
            ties.clear();
            for &cand in &nh.cells {
                let c = working.get(cand);
                if c > best {
                    best = c;
                    ties.clear();
                    ties.push(cand);
                } else if c == best && c > 0 {
                    ties.push(cand);
                }
            }
            let pick = if ties.is_empty() {
                // No history anywhere in reach.
                nh.cells[rng.random_range(0..nh.cells.len())]
            } else {
                let chosen = ties[if ties.len() == 1 {
                    0
                } else {
                    rng.random_range(0..ties.len())
                }];
                working.saturating_sub(chosen, 1);
                chosen
            };
            placed.0.increment(pick);
        }
    }
    Ok(placed)
}

/// Offline optimal placement: knowing the pickups that will materialize,
/// route vehicles through a max-flow network (drop-off cells with supply,
/// reachable pickup cells with demand) to maximize the matched count
/// exactly. Unmatched vehicles park in their own drop-off cell.
pub fn opt_oracle(
    grid: &GridSpec,
    dropoffs: &CountMatrix,
    pickups: &CountMatrix,
    reach: f64,
) -> Result<PlacementMatrix, SimError> {
    check_shape(grid, dropoffs)?;
    check_shape(grid, pickups)?;
    let drops: Vec<(Cell, u32)> = dropoffs.iter_nonzero().collect();
    let picks: Vec<(Cell, u32)> = pickups.iter_nonzero().collect();
    let pick_node: HashMap<Cell, usize> = picks
        .iter()
        .enumerate()
        .map(|(j, &(cell, _))| (cell, 2 + drops.len() + j))
        .collect();

    let source = 0;
    let sink = 1;
    let mut net = FlowNetwork::new(2 + drops.len() + picks.len());
    // (drop index, pick cell, edge id) for recovering the routing.
    let mut routes: Vec<(usize, Cell, usize)> = Vec::new();
    for (i, &(cell, d)) in drops.iter().enumerate() {
        net.add_edge(source, 2 + i, d as u64);
        for &cand in &grid.neighborhood(cell, reach)?.cells {
            if let Some(&pn) = pick_node.get(&cand) {
                let eid = net.add_edge(2 + i, pn, d as u64);
                routes.push((i, cand, eid));
            }
        }
    }
    for &(cell, p) in &picks {
        net.add_edge(pick_node[&cell], sink, p as u64);
    }
    net.max_flow(source, sink);

    let mut placed = PlacementMatrix::zeros(grid.rows, grid.cols);
    let mut outflow = vec![0u64; drops.len()];
    for &(i, cell, eid) in &routes {
        let f = net.edge_flow(eid);
        if f > 0 {
            placed.0.add(cell, f as u32);
            outflow[i] += f;
        }
    }
    for (i, &(cell, d)) in drops.iter().enumerate() {
        let rest = d as u64 - outflow[i];
        if rest > 0 {
            placed.0.add(cell, rest as u32);
        }
    }
    Ok(placed)
}

/// One scored step: the placement decided at snapshot `index - 1` evaluated
/// against the pickups of snapshot `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotScore {
    /// Retained index of the snapshot the placement was scored against.
    pub index: usize,
    pub wall_slot: u64,
    /// Vehicles placed (`n` for this step).
    pub placements: u64,
    /// Vehicles that found a request in their cell.
    pub matched: u64,
    /// Total pickup requests in the scored snapshot.
    pub pickups: u64,
}

impl SnapshotScore {
    /// Matched fraction of placed vehicles; 0 when no vehicle was placed.
    pub fn reward(&self) -> f64 {
        if self.placements == 0 {
            0.0
        } else {
            self.matched as f64 / self.placements as f64
        }
    }
}

/// Scores of one policy over a snapshot series.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSeries {
    pub algorithm: Algorithm,
    pub scores: Vec<SnapshotScore>,
}

impl RewardSeries {
    /// Mean step reward over steps that placed at least one vehicle
    /// (steps with nothing to place carry no signal). `None` if no step
    /// placed anything.
    pub fn mean_reward(&self) -> Option<f64> {
        let active: Vec<f64> = self
            .scores
            .iter()
            .filter(|s| s.placements > 0)
            .map(SnapshotScore::reward)
            .collect();
        if active.is_empty() {
            None
        } else {
            Some(active.iter().sum::<f64>() / active.len() as f64)
        }
    }

    /// Mean fraction of requests served, over steps with at least one
    /// request.
    pub fn mean_fulfilled(&self) -> Option<f64> {
        let active: Vec<f64> = self
            .scores
            .iter()
            .filter(|s| s.pickups > 0)
            .map(|s| s.matched as f64 / s.pickups as f64)
            .collect();
        if active.is_empty() {
            None
        } else {
            Some(active.iter().sum::<f64>() / active.len() as f64)
        }
    }
}

/// Run one policy over a series and score every step.
///
/// History-driven policies (`pp_lh`, `ftl_ch`) warm up on the first
/// `params.window` snapshots; the first placement happens at the next
/// snapshot, always using strictly past history. The last snapshot is never
/// a decision point (there is nothing left to score against). Deterministic
/// for a fixed seed.
pub fn simulate(
    series: &SnapshotSeries,
    algo: Algorithm,
    params: &AlgoParams,
    seed: u64,
) -> Result<RewardSeries, SimError> {
    series.validate()?;
    params.validate(algo)?;
    let warm = match algo {
        Algorithm::PpLh | Algorithm::FtlCh => params.window,
        _ => 0,
    };
    let needed = warm + 2;
    if series.len() < needed {
        return Err(SimError::SeriesTooShort {
            needed,
            got: series.len(),
        });
    }

    let grid = &series.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uses_history = matches!(algo, Algorithm::PpLh | Algorithm::FtlCh);
    let mut history = HistoryState::new(grid.rows, grid.cols);
    if uses_history {
        for snap in &series.snapshots[..warm] {
            history.push(snap);
        }
    }

    let mut scores = Vec::with_capacity(series.len() - warm - 1);
    for t in warm..series.len() - 1 {
        let now = &series.snapshots[t];
        let next = &series.snapshots[t + 1];
        let placed = match algo {
            Algorithm::UrandNh => place_urand_nh(grid, &now.dropoffs, params.reach, &mut rng)?,
            Algorithm::PpLh => place_pp_lh(
                grid,
                &now.dropoffs,
                &history,
                params.reach,
                params.threshold,
                &mut rng,
            )?,
            Algorithm::FtlCh => {
                place_ftl_ch(grid, &now.dropoffs, history.counts(), params.reach, &mut rng)?
            }
            Algorithm::Opt => opt_oracle(grid, &now.dropoffs, &next.pickups, params.reach)?,
        };
        let r = reward(&next.pickups, &placed)?;
        scores.push(SnapshotScore {
            index: next.index,
            wall_slot: next.wall_slot,
            placements: r.placements,
            matched: r.matched,
            pickups: next.total_pickups(),
        });
        if uses_history {
            history.push(now);
            if algo == Algorithm::PpLh {
                history.retire(&series.snapshots[t - params.window]);
            }
        }
    }
    Ok(RewardSeries {
        algorithm: algo,
        scores,
    })
}
