//! Correlation-dimension estimation for planar point sets.
//!
//! The estimator overlays square boxes of side `epsilon` on the point set,
//! counts points per box, and sums the squared counts. Over a ladder of
//! scales, the slope of `ln(sum of squared counts)` against `ln(epsilon)`
//! within the scaling range is the correlation dimension `d2`: the sum of
//! squared box counts equals the number of ordered point pairs sharing a box,
//! which for a self-similar set grows as a power of the box side.

use crate::grid::Point2d;
use crate::series::SnapshotSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FractalError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },
    #[error("non-finite point ({x}, {y})")]
    NonFinitePoint { x: f64, y: f64 },
    #[error("invalid scale ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid fit range: {0}")]
    InvalidRange(String),
    #[error("cannot fit a slope: {0}")]
    DegenerateFit(String),
}

/// Points-per-box histogram at one scale. Boxes are anchored at the point
/// set's bounding-box minimum, so nested (power-of-two) ladders produce
/// nested boxes.
#[derive(Debug, Clone)]
pub struct OccupancyHistogram {
    pub epsilon: f64,
    pub total_points: u64,
    counts: HashMap<(i64, i64), u64>,
}

impl OccupancyHistogram {
    /// Number of occupied boxes.
    pub fn occupied(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Sum of squared box counts — the number of ordered point pairs
    /// (including self-pairs) that share a box. Exact integer arithmetic, so
    /// the value is independent of hash iteration order.
    pub fn sum_squares(&self) -> u64 {
        self.counts.values().map(|&c| c * c).sum()
    }

    pub fn counts(&self) -> &HashMap<(i64, i64), u64> {
        &self.counts
    }
}

/// Bin points into boxes of side `epsilon`.
pub fn occupancy(points: &[Point2d], epsilon: f64) -> Result<OccupancyHistogram, FractalError> {
    if points.is_empty() {
        return Err(FractalError::EmptyPointSet);
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(FractalError::InvalidLadder(format!(
            "box side must be positive and finite, got {epsilon}"
        )));
    }
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(FractalError::NonFinitePoint { x: p.x, y: p.y });
        }
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
    }
    let mut counts: HashMap<(i64, i64), u64> = HashMap::new();
    for p in points {
        let bx = ((p.x - min_x) / epsilon).floor() as i64;
        let by = ((p.y - min_y) / epsilon).floor() as i64;
        *counts.entry((by, bx)).or_insert(0) += 1;
    }
    Ok(OccupancyHistogram {
        epsilon,
        total_points: points.len() as u64,
        counts,
    })
}

/// One scale of a correlation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    /// Sum of squared box counts at this scale.
    pub sum_p2: u64,
    pub occupied: u64,
}

impl CurvePoint {
    pub fn log_epsilon(&self) -> f64 {
        self.epsilon.ln()
    }

    pub fn log_sum_p2(&self) -> f64 {
        (self.sum_p2 as f64).ln()
    }
}

/// Correlation statistics over an ascending ladder of scales.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub points: Vec<CurvePoint>,
}

impl CorrelationCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn validate_ladder(ladder: &[f64]) -> Result<(), FractalError> {
    if ladder.len() < 2 {
        return Err(FractalError::InvalidLadder(format!(
            "need at least 2 scales, got {}",
            ladder.len()
        )));
    }
    for &eps in ladder {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(FractalError::InvalidLadder(format!(
                "scales must be positive and finite, got {eps}"
            )));
        }
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FractalError::InvalidLadder(
            "scales must be strictly ascending".to_string(),
        ));
    }
    Ok(())
}

/// Geometric ladder `base * 2^k` for `k = 0..scales`.
pub fn dyadic_ladder(base: f64, scales: usize) -> Result<Vec<f64>, FractalError> {
    if !(base.is_finite() && base > 0.0) {
        return Err(FractalError::InvalidLadder(format!(
            "ladder base must be positive and finite, got {base}"
        )));
    }
    if scales < 2 {
        return Err(FractalError::InvalidLadder(format!(
            "need at least 2 scales, got {scales}"
        )));
    }
    Ok((0..scales).map(|k| base * (1u64 << k) as f64).collect())
}

/// Evaluate the correlation statistic at every scale of the ladder.
pub fn correlation_sum(points: &[Point2d], ladder: &[f64]) -> Result<CorrelationCurve, FractalError> {
    validate_ladder(ladder)?;
    let curve_points = ladder
        .iter()
        .map(|&eps| {
            let hist = occupancy(points, eps)?;
            Ok(CurvePoint {
                epsilon: eps,
                sum_p2: hist.sum_squares(),
                occupied: hist.occupied(),
            })
        })
        .collect::<Result<Vec<_>, FractalError>>()?;
    Ok(CorrelationCurve { points: curve_points })
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit `y = slope * x + intercept` by least squares. Returns `None` with
/// fewer than two points or when all `x` coincide. A zero-variance `y`
/// fitted exactly reports `r_squared = 1`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        let pred = slope * x + intercept;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    const TINY: f64 = 1e-12;
    let r_squared = if ss_tot < TINY {
        if ss_res < TINY {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// A correlation-dimension estimate over a fitted scale range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2Estimate {
    pub d2: f64,
    pub r_squared: f64,
    /// Smallest and largest scales actually used in the fit.
    pub range_lo: f64,
    pub range_hi: f64,
    pub n_scales: usize,
}

/// Fit the dimension over curve scales within `[range_lo, range_hi]`
/// (inclusive, with a small relative tolerance for endpoint comparisons).
pub fn fit_d2(
    curve: &CorrelationCurve,
    range_lo: f64,
    range_hi: f64,
) -> Result<D2Estimate, FractalError> {
    if !(range_lo.is_finite() && range_hi.is_finite() && range_lo > 0.0 && range_hi >= range_lo) {
        return Err(FractalError::InvalidRange(format!(
            "bad range [{range_lo}, {range_hi}]"
        )));
    }
    let tol = 1e-9;
    let selected: Vec<&CurvePoint> = curve
        .points
        .iter()
        .filter(|p| p.epsilon >= range_lo * (1.0 - tol) && p.epsilon <= range_hi * (1.0 + tol))
        .collect();
    if selected.len() < 2 {
        return Err(FractalError::InvalidRange(format!(
            "range [{range_lo}, {range_hi}] covers {} scale(s); need at least 2",
            selected.len()
        )));
    }
    let xy: Vec<(f64, f64)> = selected
        .iter()
        .map(|p| (p.log_epsilon(), p.log_sum_p2()))
        .collect();
    let fit = linear_fit(&xy)
        .ok_or_else(|| FractalError::DegenerateFit("scales coincide in log space".to_string()))?;
    Ok(D2Estimate {
        d2: fit.slope,
        r_squared: fit.r_squared,
        range_lo: selected.first().unwrap().epsilon,
        range_hi: selected.last().unwrap().epsilon,
        n_scales: selected.len(),
    })
}

/// Find the scaling range: the longest contiguous run of at least
/// `min_scales` ladder points whose log-log fit reaches `min_r_squared`.
/// Ties prefer the wider scale span, then the coarser (larger) endpoints.
/// Returns the `(lo, hi)` scales of the winning window, or `None` when no
/// window qualifies.
pub fn detect_fractal_range(
    curve: &CorrelationCurve,
    min_r_squared: f64,
    min_scales: usize,
) -> Option<(f64, f64)> {
    let n = curve.points.len();
    let min_scales = min_scales.max(2);
    if n < min_scales {
        return None;
    }
    let xy: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.log_epsilon(), p.log_sum_p2()))
        .collect();
    let mut best: Option<(usize, f64, usize, usize)> = None; // (len, span, i, j)
    for i in 0..n {
        for j in (i + min_scales - 1)..n {
            let fit = match linear_fit(&xy[i..=j]) {
                Some(f) => f,
                None => continue,
            };
            if fit.r_squared < min_r_squared {
                continue;
            }
            let len = j - i + 1;
            let span = curve.points[j].epsilon - curve.points[i].epsilon;
            let better = match best {
                None => true,
                Some((blen, bspan, bi, bj)) => {
                    (len, span, j, i) > (blen, bspan, bj, bi)
                }
            };
            if better {
                best = Some((len, span, i, j));
            }
        }
    }
    best.map(|(_, _, i, j)| (curve.points[i].epsilon, curve.points[j].epsilon))
}

/// Why a snapshot has no dimension estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2Flag {
    TooFewPoints,
    NoScalingRange,
}

impl D2Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            D2Flag::TooFewPoints => "too_few_points",
            D2Flag::NoScalingRange => "no_scaling_range",
        }
    }
}

/// Per-snapshot estimate (or the reason there is none).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotD2 {
    pub index: usize,
    pub wall_slot: u64,
    pub points: usize,
    pub estimate: Option<D2Estimate>,
    pub flag: Option<D2Flag>,
}

/// Summary over the snapshots that produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2Summary {
    pub analyzed: usize,
    pub flagged: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct WeeklyD2 {
    pub per_snapshot: Vec<SnapshotD2>,
    pub summary: Option<D2Summary>,
}

/// Estimate the dimension of each snapshot's pickup point set. Snapshots
/// with fewer than `min_points` pickups, or whose curve has no scaling range
/// at the given thresholds, are flagged instead of estimated.
pub fn weekly_d2_series(
    series: &SnapshotSeries,
    ladder: &[f64],
    min_r_squared: f64,
    min_scales: usize,
    min_points: usize,
) -> Result<WeeklyD2, FractalError> {
    validate_ladder(ladder)?;
    let mut per_snapshot = Vec::with_capacity(series.len());
    let mut estimates = Vec::new();
    for snap in &series.snapshots {
        let points = snap.pickup_points.len();
        let (estimate, flag) = if points < min_points.max(1) {
            (None, Some(D2Flag::TooFewPoints))
        } else {
            let curve = correlation_sum(&snap.pickup_points, ladder)?;
            match detect_fractal_range(&curve, min_r_squared, min_scales) {
                None => (None, Some(D2Flag::NoScalingRange)),
                Some((lo, hi)) => (Some(fit_d2(&curve, lo, hi)?), None),
            }
        };
        if let Some(e) = estimate {
            estimates.push(e.d2);
        }
        per_snapshot.push(SnapshotD2 {
            index: snap.index,
            wall_slot: snap.wall_slot,
            points,
            estimate,
            flag,
        });
    }
    let summary = if estimates.is_empty() {
        None
    } else {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &d in &estimates {
            min = min.min(d);
            max = max.max(d);
            sum += d;
        }
        Some(D2Summary {
            analyzed: estimates.len(),
            flagged: per_snapshot.len() - estimates.len(),
            min,
            max,
            mean: sum / estimates.len() as f64,
        })
    };
    Ok(WeeklyD2 {
        per_snapshot,
        summary,
    })
}

/// One radius of the neighbor-growth curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthPoint {
    pub radius: f64,
    /// Estimated mean number of other points within Chebyshev distance
    /// `radius` of a point.
    pub mean_neighbors: f64,
}

/// Estimate how the average neighbor count grows with radius, by sampling
/// `max_anchors` anchor points and `max_candidates` candidate points and
/// counting candidate neighbors within each radius (Chebyshev metric).
/// Counts are rescaled by the candidate sampling fraction, so the curve
/// estimates true neighbor counts; its log-log slope estimates the
/// correlation dimension. Deterministic for a fixed seed.
pub fn neighborhood_growth(
    points: &[Point2d],
    radii: &[f64],
    max_anchors: usize,
    max_candidates: usize,
    seed: u64,
) -> Result<Vec<GrowthPoint>, FractalError> {
    validate_ladder(radii)?;
    if points.len() < 2 {
        return Err(FractalError::NotEnoughPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if max_anchors == 0 || max_candidates == 0 {
        return Err(FractalError::InvalidLadder(
            "sample sizes must be positive".to_string(),
        ));
    }
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(FractalError::NonFinitePoint { x: p.x, y: p.y });
        }
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_indices = |rng: &mut ChaCha8Rng, k: usize| -> Vec<usize> {
        if k >= n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(rng, n, k).into_vec()
        }
    };
    let anchors = sample_indices(&mut rng, max_anchors);
    let candidates = sample_indices(&mut rng, max_candidates);

    // Histogram pairs by the first radius that contains them, then prefix-sum.
    let mut within = vec![0u64; radii.len()];
    for &a in &anchors {
        let pa = points[a];
        for &c in &candidates {
            if c == a {
                continue;
            }
            let d = pa.linf_dist(&points[c]);
            let k = radii.partition_point(|&r| r < d);
            if k < radii.len() {
                within[k] += 1;
            }
        }
    }
    for k in 1..radii.len() {
        within[k] += within[k - 1];
    }
    let scale = n as f64 / candidates.len() as f64 / anchors.len() as f64;
    Ok(radii
        .iter()
        .zip(&within)
        .map(|(&radius, &count)| GrowthPoint {
            radius,
            mean_neighbors: count as f64 * scale,
        })
        .collect())
}
