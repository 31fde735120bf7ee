//! Run configuration: one TOML file plus command-line overrides (flags win).
//! The resolved configuration is embedded in every output manifest, so runs
//! are self-describing and reproducible from their artifacts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fleetplace_core::{
    derive_seed, dyadic_ladder, rate_map_from_attractor, AlgoParams, Algorithm, ArrivalModel,
    AttractorSpec, DurationRange, GridSpec, TripLaw,
};
use serde::{Deserialize, Serialize};

/// Everything a command needs. Loaded from TOML with unknown keys rejected;
/// `--seed`, `--out`, and `--algo` flags override the corresponding fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed: every random choice in a run derives from it (see the
    /// seed-derivation notes in the README).
    #[serde(default)]
    pub seed: u64,
    /// Directory all artifacts are written into.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub grid: GridSpec,
    /// Snapshot length in seconds.
    #[serde(default = "default_tau")]
    pub tau: i64,
    /// Hours of day (UTC) whose snapshot slots are dropped entirely.
    #[serde(default = "default_excluded_hours")]
    pub excluded_hours: BTreeSet<u8>,
    /// Epoch second the slot grid is anchored at; defaults to the earliest
    /// pickup in the stream.
    #[serde(default)]
    pub start_time: Option<i64>,
    /// Exclusive end of the bucketed span; defaults to the last event.
    #[serde(default)]
    pub end_time: Option<i64>,
    /// Ride stream to ingest (`.csv`, `.jsonl`, or `.ndjson`). When absent,
    /// commands that need a stream generate one from `[synth]`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub fractal: FractalConfig,
    /// Policies `simulate` runs (the oracle is always added); defaults to
    /// all of them.
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgoConfig>,
}

fn default_tau() -> i64 {
    180
}

fn default_excluded_hours() -> BTreeSet<u8> {
    (0..=6).collect()
}

fn default_algorithms() -> Vec<AlgoConfig> {
    Algorithm::ALL.iter().map(|&a| AlgoConfig::bare(a)).collect()
}

/// Synthetic-stream settings: the spatial law (attractor), the temporal law
/// (arrivals), and the trip model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub attractor: AttractorSpec,
    pub arrivals: ArrivalConfig,
    /// Stream length in seconds; pickups occur in `[start_time, start_time
    /// + duration)`.
    pub duration: f64,
    #[serde(default = "default_trip")]
    pub trip: TripLaw,
    #[serde(default = "default_trip_duration")]
    pub trip_duration: DurationRange,
}

fn default_trip() -> TripLaw {
    TripLaw::Resample
}

fn default_trip_duration() -> DurationRange {
    DurationRange { lo: 60.0, hi: 600.0 }
}

/// Arrival-model settings. The first two map directly onto the generator's
/// models; `attractor_rate_map` builds per-cell rates from the attractor's
/// cell occupancy so heavy demand cells are also where the point set
/// concentrates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model", deny_unknown_fields)]
pub enum ArrivalConfig {
    /// One global process at `rate` events/second — or exactly `count`
    /// arrivals spread uniformly over the duration when given.
    GlobalRate {
        rate: f64,
        #[serde(default)]
        count: Option<u64>,
    },
    /// Explicit per-cell rates (events/second), row-major.
    RateMap {
        rows: usize,
        cols: usize,
        rates: Vec<f64>,
    },
    /// Per-cell rates proportional to the attractor's occupancy of each
    /// cell, scaled to `total_rate` events/second overall.
    AttractorRateMap {
        total_rate: f64,
        #[serde(default = "default_rate_samples")]
        samples: usize,
    },
}

fn default_rate_samples() -> usize {
    200_000
}

impl ArrivalConfig {
    /// Expand into a concrete generator model. `attractor_rate_map` draws
    /// its occupancy sample with a seed derived from the global seed.
    pub fn to_model(
        &self,
        attractor: &AttractorSpec,
        grid: &GridSpec,
        global_seed: u64,
    ) -> Result<ArrivalModel> {
        match self {
            ArrivalConfig::GlobalRate { rate, count } => Ok(ArrivalModel::GlobalRate {
                rate: *rate,
                count: *count,
            }),
            ArrivalConfig::RateMap { rows, cols, rates } => Ok(ArrivalModel::RateMap {
                rows: *rows,
                cols: *cols,
                rates: rates.clone(),
            }),
            ArrivalConfig::AttractorRateMap {
                total_rate,
                samples,
            } => {
                let rates = rate_map_from_attractor(
                    attractor,
                    grid,
                    *total_rate,
                    *samples,
                    derive_seed(global_seed, "rate-map"),
                )?;
                Ok(ArrivalModel::RateMap {
                    rows: grid.rows,
                    cols: grid.cols,
                    rates,
                })
            }
        }
    }
}

/// Scale ladder and fit settings for dimension estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalConfig {
    /// Finest box side in meters. Defaults so the dyadic ladder tops out at
    /// the grid's larger extent.
    #[serde(default)]
    pub ladder_floor: Option<f64>,
    #[serde(default = "default_ladder_scales")]
    pub ladder_scales: usize,
    /// Minimum fit quality for a window to count as a scaling range.
    #[serde(default = "default_min_r_squared")]
    pub min_r_squared: f64,
    /// Minimum number of ladder scales in a scaling range.
    #[serde(default = "default_min_scales")]
    pub min_scales: usize,
    /// Snapshots with fewer pickup points are flagged, not estimated.
    #[serde(default = "default_min_points")]
    pub min_points: usize,
}

fn default_ladder_scales() -> usize {
    12
}

fn default_min_r_squared() -> f64 {
    0.98
}

fn default_min_scales() -> usize {
    4
}

fn default_min_points() -> usize {
    50
}

impl Default for FractalConfig {
    fn default() -> Self {
        FractalConfig {
            ladder_floor: None,
            ladder_scales: default_ladder_scales(),
            min_r_squared: default_min_r_squared(),
            min_scales: default_min_scales(),
            min_points: default_min_points(),
        }
    }
}

impl FractalConfig {
    /// The dyadic scale ladder, ascending.
    pub fn ladder(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if self.ladder_scales < 2 || self.ladder_scales > 48 {
            bail!("fractal.ladder_scales must be in 2..=48, got {}", self.ladder_scales);
        }
        let floor = match self.ladder_floor {
            Some(f) => f,
            None => {
                let extent = grid.width_m().max(grid.height_m());
                extent / (1u64 << (self.ladder_scales - 1)) as f64
            }
        };
        Ok(dyadic_ladder(floor, self.ladder_scales)?)
    }
}

/// One policy to run: a name plus optional parameter overrides on top of
/// that policy's defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    pub name: Algorithm,
    /// Repositioning radius in meters.
    #[serde(default)]
    pub reach: Option<f64>,
    /// History window (estimation window for `pp_lh`, warm-up length for
    /// `ftl_ch`).
    #[serde(default)]
    pub window: Option<usize>,
    /// Minimum windowed event count for a rate estimate (`pp_lh`).
    #[serde(default)]
    pub threshold: Option<u32>,
}

impl AlgoConfig {
    pub fn bare(name: Algorithm) -> Self {
        AlgoConfig {
            name,
            reach: None,
            window: None,
            threshold: None,
        }
    }

    pub fn params(&self) -> AlgoParams {
        let mut p = AlgoParams::defaults_for(self.name);
        if let Some(r) = self.reach {
            p.reach = r;
        }
        if let Some(w) = self.window {
            p.window = w;
        }
        if let Some(t) = self.threshold {
            p.threshold = t;
        }
        p
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Non-empty: replaces the configured algorithm list (per-algorithm
    /// parameter overrides from the file are kept for the named policies).
    pub algos: Vec<Algorithm>,
}

impl RunConfig {
    /// Parse a TOML config file and apply overrides.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.apply(overrides);
        cfg.grid.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        if !overrides.algos.is_empty() {
            self.algorithms = overrides
                .algos
                .iter()
                .map(|&name| {
                    self.algorithms
                        .iter()
                        .find(|a| a.name == name)
                        .cloned()
                        .unwrap_or_else(|| AlgoConfig::bare(name))
                })
                .collect();
        }
    }

    /// The output directory; required for every command.
    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("no output directory: set `out` in the config or pass --out"))
    }
}
