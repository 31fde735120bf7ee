//! The four subcommands. Each resolves its inputs from the config, computes,
//! and writes artifacts plus a manifest embedding the resolved config — any
//! output directory is reproducible from its own manifest.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fleetplace_core::{
    bucket_snapshots, correlation_sum, derive_seed, detect_fractal_range, fit_d2, gen_ride_stream,
    parse_records, simulate, weekly_d2_series, write_records_csv, Algorithm, BucketDiagnostics,
    CorrelationCurve, D2Estimate, EventCounts, RequestRecord, SnapshotSeries, StreamFormat,
    StreamSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{write_atomic, write_csv, write_json};

/// Seed-derivation label for the stream generator (synth command and
/// in-memory generation alike).
const STREAM_SEED_LABEL: &str = "synth-stream";

fn stream_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, STREAM_SEED_LABEL)
}

fn algo_seed(cfg: &RunConfig, algo: Algorithm) -> u64 {
    derive_seed(cfg.seed, algo.wire_name())
}

/// Build the generator spec from the config's `[synth]` section.
fn stream_spec(cfg: &RunConfig) -> Result<StreamSpec> {
    let synth = cfg
        .synth
        .as_ref()
        .context("config has no [synth] section")?;
    let arrivals = synth
        .arrivals
        .to_model(&synth.attractor, &cfg.grid, cfg.seed)?;
    Ok(StreamSpec {
        attractor: synth.attractor,
        arrivals,
        duration: synth.duration,
        trip: synth.trip,
        trip_duration: synth.trip_duration,
        seed: stream_seed(cfg),
    })
}

fn generate_stream(cfg: &RunConfig) -> Result<Vec<RequestRecord>> {
    let spec = stream_spec(cfg)?;
    Ok(gen_ride_stream(&spec, &cfg.grid, cfg.start_time.unwrap_or(0))?)
}

/// A bucketed series plus where it came from.
struct LoadedSeries {
    series: SnapshotSeries,
    diagnostics: BucketDiagnostics,
    records: usize,
    /// `"input:<path>"` or `"synth"`.
    source: String,
}

/// Load the request stream (from `input` if set, else generated from
/// `[synth]`) and bucket it into snapshots.
fn load_series(cfg: &RunConfig) -> Result<LoadedSeries> {
    let (records, source) = match &cfg.input {
        Some(path) => {
            let format = StreamFormat::from_path(path).with_context(|| {
                format!(
                    "can't infer stream format from extension of {} (use .csv, .jsonl, or .ndjson)",
                    path.display()
                )
            })?;
            let file =
                File::open(path).with_context(|| format!("opening input {}", path.display()))?;
            let records = parse_records(file, format)
                .with_context(|| format!("parsing {}", path.display()))?;
            (records, format!("input:{}", path.display()))
        }
        None => (generate_stream(cfg)?, "synth".to_string()),
    };
    let bucketed = bucket_snapshots(
        &records,
        &cfg.grid,
        cfg.tau,
        &cfg.excluded_hours,
        cfg.start_time,
        cfg.end_time,
    )?;
    Ok(LoadedSeries {
        series: bucketed.series,
        diagnostics: bucketed.diagnostics,
        records: records.len(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct EventCountsOut {
    retained: u64,
    before_start: u64,
    after_end: u64,
    excluded_hour: u64,
    out_of_bounds: u64,
}

impl From<EventCounts> for EventCountsOut {
    fn from(c: EventCounts) -> Self {
        EventCountsOut {
            retained: c.retained,
            before_start: c.before_start,
            after_end: c.after_end,
            excluded_hour: c.excluded_hour,
            out_of_bounds: c.out_of_bounds,
        }
    }
}

#[derive(Debug, Serialize)]
struct DiagnosticsOut {
    records: u64,
    pickups: EventCountsOut,
    dropoffs: EventCountsOut,
}

impl From<BucketDiagnostics> for DiagnosticsOut {
    fn from(d: BucketDiagnostics) -> Self {
        DiagnosticsOut {
            records: d.records,
            pickups: d.pickups.into(),
            dropoffs: d.dropoffs.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SeriesOut {
    snapshots: usize,
    wall_slots: u64,
    total_pickups: u64,
    total_dropoffs: u64,
}

impl From<&SnapshotSeries> for SeriesOut {
    fn from(s: &SnapshotSeries) -> Self {
        SeriesOut {
            snapshots: s.len(),
            wall_slots: s.wall_slots,
            total_pickups: s.total_pickups(),
            total_dropoffs: s.total_dropoffs(),
        }
    }
}

/// Generate a request stream and write it with a manifest.
///
/// Artifacts: `stream.csv`, `synth_manifest.json`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?.to_path_buf();
    let synth = cfg
        .synth
        .as_ref()
        .context("config has no [synth] section")?;
    let records = generate_stream(cfg)?;

    let stream_path = out.join("stream.csv");
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &records)?;
    write_atomic(&stream_path, &buf)?;

    #[derive(Serialize)]
    struct SynthManifest<'a> {
        command: &'static str,
        records: usize,
        theoretical_d2: f64,
        stream_seed: u64,
        stream_file: &'a str,
        config: &'a RunConfig,
    }
    write_json(
        &out.join("synth_manifest.json"),
        &SynthManifest {
            command: "synth",
            records: records.len(),
            theoretical_d2: synth.attractor.theoretical_d2(),
            stream_seed: stream_seed(cfg),
            stream_file: "stream.csv",
            config: cfg,
        },
    )?;
    println!(
        "wrote {} records to {} (theoretical d2 {:.6})",
        records.len(),
        stream_path.display(),
        synth.attractor.theoretical_d2()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FitOut {
    d2: f64,
    r_squared: f64,
    range_lo: f64,
    range_hi: f64,
    n_scales: usize,
}

impl From<D2Estimate> for FitOut {
    fn from(e: D2Estimate) -> Self {
        FitOut {
            d2: e.d2,
            r_squared: e.r_squared,
            range_lo: e.range_lo,
            range_hi: e.range_hi,
            n_scales: e.n_scales,
        }
    }
}

/// Measure the dimension of the stream's pickup point set.
///
/// Artifacts: `fractal_curve.csv` (the pooled log-log curve),
/// `d2_series.csv` (per-snapshot estimates), `fractal_summary.json`.
pub fn cmd_fractal(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?.to_path_buf();
    let loaded = load_series(cfg)?;
    let points = loaded.series.all_pickup_points();
    if points.is_empty() {
        bail!(
            "no pickup points to analyze (source {}, {} records)",
            loaded.source,
            loaded.records
        );
    }
    let ladder = cfg.fractal.ladder(&cfg.grid)?;
    let curve = correlation_sum(&points, &ladder)?;
    let pooled = detect_fractal_range(&curve, cfg.fractal.min_r_squared, cfg.fractal.min_scales)
        .map(|(lo, hi)| fit_d2(&curve, lo, hi))
        .transpose()?;

    write_curve_csv(&out.join("fractal_curve.csv"), &curve)?;

    let weekly = weekly_d2_series(
        &loaded.series,
        &ladder,
        cfg.fractal.min_r_squared,
        cfg.fractal.min_scales,
        cfg.fractal.min_points,
    )?;
    write_csv(&out.join("d2_series.csv"), |w| {
        w.write_record(["snapshot", "d2", "r2", "flag"])?;
        for snap in &weekly.per_snapshot {
            match (&snap.estimate, &snap.flag) {
                (Some(est), None) => w.write_record([
                    snap.index.to_string(),
                    format!("{}", est.d2),
                    format!("{}", est.r_squared),
                    "ok".to_string(),
                ])?,
                (None, Some(flag)) => w.write_record([
                    snap.index.to_string(),
                    String::new(),
                    String::new(),
                    flag.as_str().to_string(),
                ])?,
                _ => unreachable!("a snapshot is either estimated or flagged"),
            }
        }
        Ok(())
    })?;

    #[derive(Serialize)]
    struct WeeklyOut {
        analyzed: usize,
        flagged: usize,
        min_d2: f64,
        max_d2: f64,
        mean_d2: f64,
    }
    #[derive(Serialize)]
    struct FractalSummary<'a> {
        command: &'static str,
        source: &'a str,
        points: usize,
        pooled: Option<FitOut>,
        weekly: Option<WeeklyOut>,
        diagnostics: DiagnosticsOut,
        series: SeriesOut,
        config: &'a RunConfig,
    }
    let summary = FractalSummary {
        command: "fractal",
        source: &loaded.source,
        points: points.len(),
        pooled: pooled.map(FitOut::from),
        weekly: weekly.summary.map(|s| WeeklyOut {
            analyzed: s.analyzed,
            flagged: s.flagged,
            min_d2: s.min,
            max_d2: s.max,
            mean_d2: s.mean,
        }),
        diagnostics: loaded.diagnostics.into(),
        series: (&loaded.series).into(),
        config: cfg,
    };
    write_json(&out.join("fractal_summary.json"), &summary)?;

    match &summary.pooled {
        Some(fit) => println!(
            "pooled d2 {:.4} (r2 {:.4}) over scales [{}, {}]; {} snapshots estimated",
            fit.d2,
            fit.r_squared,
            fit.range_lo,
            fit.range_hi,
            summary.weekly.as_ref().map_or(0, |w| w.analyzed),
        ),
        None => println!(
            "no pooled scaling range at r2 >= {} with >= {} scales",
            cfg.fractal.min_r_squared, cfg.fractal.min_scales
        ),
    }
    Ok(())
}

fn write_curve_csv(path: &Path, curve: &CorrelationCurve) -> Result<()> {
    write_csv(path, |w| {
        w.write_record(["epsilon", "log_eps", "log_sum_p2"])?;
        for p in &curve.points {
            w.write_record([
                format!("{}", p.epsilon),
                format!("{}", p.log_epsilon()),
                format!("{}", p.log_sum_p2()),
            ])?;
        }
        Ok(())
    })
}

/// One policy's run artifacts, echoed into the simulate manifest and read
/// back by `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algorithm: String,
    pub mean_reward: Option<f64>,
    /// Matched pickups over total pickups, across scored snapshots.
    pub mean_fulfilled: Option<f64>,
    pub snapshots: usize,
    pub params: ParamsOut,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsOut {
    pub reach: f64,
    pub window: usize,
    pub threshold: u32,
}

/// Run every configured policy (plus the oracle) over the same series.
///
/// Artifacts: `rewards_<algo>.csv` and `summary_<algo>.json` per policy,
/// plus `simulate_manifest.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?.to_path_buf();
    let loaded = load_series(cfg)?;

    // The oracle always runs so every comparison has its ceiling.
    let mut algos = cfg.algorithms.clone();
    if !algos.iter().any(|a| a.name == Algorithm::Opt) {
        algos.push(crate::config::AlgoConfig::bare(Algorithm::Opt));
    }

    let mut summaries = Vec::new();
    for algo in &algos {
        let params = algo.params();
        let seed = algo_seed(cfg, algo.name);
        let run = simulate(&loaded.series, algo.name, &params, seed)?;

        let name = algo.name.wire_name();
        write_csv(&out.join(format!("rewards_{name}.csv")), |w| {
            w.write_record(["snapshot", "n_t", "reward"])?;
            for s in &run.scores {
                // A snapshot with nothing to place reads as n_t = 0 with
                // zero reward; means skip such rows.
                w.write_record([
                    s.index.to_string(),
                    s.placements.to_string(),
                    format!("{}", s.reward()),
                ])?;
            }
            Ok(())
        })?;

        let summary = AlgoSummary {
            algorithm: name.to_string(),
            mean_reward: run.mean_reward(),
            mean_fulfilled: run.mean_fulfilled(),
            snapshots: run.scores.len(),
            params: ParamsOut {
                reach: params.reach,
                window: params.window,
                threshold: params.threshold,
            },
            seed,
        };
        write_json(&out.join(format!("summary_{name}.json")), &summary)?;
        summaries.push(summary);
    }

    #[derive(Serialize)]
    struct SimulateManifest<'a> {
        command: &'static str,
        source: &'a str,
        diagnostics: DiagnosticsOut,
        series: SeriesOut,
        runs: &'a [AlgoSummary],
        config: &'a RunConfig,
    }
    write_json(
        &out.join("simulate_manifest.json"),
        &SimulateManifest {
            command: "simulate",
            source: &loaded.source,
            diagnostics: loaded.diagnostics.into(),
            series: (&loaded.series).into(),
            runs: &summaries,
            config: cfg,
        },
    )?;

    for s in &summaries {
        match s.mean_reward {
            Some(m) => println!("{:<9} mean reward {m:.4} over {} snapshots", s.algorithm, s.snapshots),
            None => println!("{:<9} no scored snapshots with placements", s.algorithm),
        }
    }
    Ok(())
}

/// Merge the `summary_*.json` files in the output directory into one
/// comparison CSV.
///
/// Artifact: `comparison.csv`.
pub fn cmd_report(out: &Path) -> Result<()> {
    let mut entries: Vec<(String, PathBuf)> = std::fs::read_dir(out)
        .with_context(|| format!("reading {}", out.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let algo = name.strip_prefix("summary_")?.strip_suffix(".json")?;
            Some((algo.to_string(), e.path()))
        })
        .collect();
    if entries.is_empty() {
        bail!(
            "no summary_*.json files in {} (run `simulate` first)",
            out.display()
        );
    }
    entries.sort();

    let mut rows = Vec::new();
    for (_, path) in &entries {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let summary: AlgoSummary = serde_json::from_reader(file)
            .with_context(|| format!("parsing {}", path.display()))?;
        rows.push(summary);
    }

    let path = out.join("comparison.csv");
    write_csv(&path, |w| {
        w.write_record([
            "algorithm",
            "mean_reward",
            "mean_fulfilled",
            "snapshots",
            "seed",
        ])?;
        for s in &rows {
            w.write_record([
                s.algorithm.clone(),
                s.mean_reward.map(|v| format!("{v}")).unwrap_or_default(),
                s.mean_fulfilled.map(|v| format!("{v}")).unwrap_or_default(),
                s.snapshots.to_string(),
                s.seed.to_string(),
            ])?;
        }
        Ok(())
    })?;
    println!("merged {} summaries into {}", rows.len(), path.display());
    Ok(())
}
