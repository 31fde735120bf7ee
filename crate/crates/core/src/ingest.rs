//! Ride-request stream ingestion: CSV / JSON-lines parsing with per-row
//! validation, and bucketing of pickup/drop-off events into snapshot series.

use crate::grid::{GridError, GridSpec};
use crate::series::{Snapshot, SnapshotSeries};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("stream is empty and no start time was given")]
    EmptyStream,
    #[error("invalid time window: end {end} is not after start {start}")]
    InvalidWindow { start: i64, end: i64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One ride request: where/when the passenger was picked up and dropped off.
/// Times are seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestRecord {
    pub pickup_time: i64,
    pub pickup_lat: f64,
    pub pickup_lon: f64,
    pub dropoff_lat: f64,
    pub dropoff_lon: f64,
    pub dropoff_time: i64,
}

impl RequestRecord {
    fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("pickup_lat", self.pickup_lat),
            ("pickup_lon", self.pickup_lon),
            ("dropoff_lat", self.dropoff_lat),
            ("dropoff_lon", self.dropoff_lon),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if self.dropoff_time < self.pickup_time {
            return Err(format!(
                "dropoff_time {} precedes pickup_time {}",
                self.dropoff_time, self.pickup_time
            ));
        }
        Ok(())
    }
}

/// Serialization of a request stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    /// Header row `pickup_time,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,dropoff_time`.
    Csv,
    /// One JSON object per line with the same fields.
    Jsonl,
}

impl StreamFormat {
    /// Guess the format from a file extension (`.csv`, `.jsonl`, `.ndjson`).
    pub fn from_path(path: &Path) -> Option<StreamFormat> {
        match path.extension()?.to_str()? {
            "csv" => Some(StreamFormat::Csv),
            "jsonl" | "ndjson" => Some(StreamFormat::Jsonl),
            _ => None,
        }
    }
}

/// Parse a request stream, validating every row. The first bad row aborts
/// with its 1-based line number (CSV line 1 is the header).
pub fn parse_records(reader: impl Read, format: StreamFormat) -> Result<Vec<RequestRecord>, IngestError> {
    match format {
        StreamFormat::Csv => parse_csv(reader),
        StreamFormat::Jsonl => parse_jsonl(reader),
    }
}

fn parse_csv(reader: impl Read) -> Result<Vec<RequestRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut records = Vec::new();
    let mut iter = rdr.deserialize::<RequestRecord>();
    loop {
        // Read the position first: after a successful next() the reader has
        // already advanced to the following record.
        let line = iter.reader().position().line();
        match iter.next() {
            None => break,
            Some(Ok(rec)) => {
                rec.check()
                    .map_err(|reason| IngestError::Malformed { line, reason })?;
                records.push(rec);
            }
            Some(Err(err)) => {
                let line = err
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(line);
                return Err(IngestError::Malformed {
                    line,
                    reason: err.to_string(),
                });
            }
        }
    }
    Ok(records)
}

fn parse_jsonl(reader: impl Read) -> Result<Vec<RequestRecord>, IngestError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RequestRecord =
            serde_json::from_str(&line).map_err(|err| IngestError::Malformed {
                line: line_no,
                reason: err.to_string(),
            })?;
        rec.check().map_err(|reason| IngestError::Malformed {
            line: line_no,
            reason,
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Column order of the canonical CSV format.
pub const CSV_HEADER: [&str; 6] = [
    "pickup_time",
    "pickup_lat",
    "pickup_lon",
    "dropoff_lat",
    "dropoff_lon",
    "dropoff_time",
];

/// Write records as CSV. The canonical header is always written, even for
/// an empty stream.
pub fn write_records_csv(writer: impl Write, records: &[RequestRecord]) -> Result<(), IngestError> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let io_err = |e: csv::Error| IngestError::Malformed {
        line: 0,
        reason: e.to_string(),
    };
    wtr.write_record(CSV_HEADER).map_err(io_err)?;
    for rec in records {
        wtr.serialize(rec).map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Why each pickup/drop-off event was kept or skipped during bucketing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub retained: u64,
    pub before_start: u64,
    pub after_end: u64,
    pub excluded_hour: u64,
    pub out_of_bounds: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.retained + self.before_start + self.after_end + self.excluded_hour + self.out_of_bounds
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BucketDiagnostics {
    /// Records consumed (each contributes one pickup and one drop-off event).
    pub records: u64,
    pub pickups: EventCounts,
    pub dropoffs: EventCounts,
}

/// A snapshot series plus the bookkeeping of what was skipped to build it.
#[derive(Debug, Clone)]
pub struct Bucketed {
    pub series: SnapshotSeries,
    pub diagnostics: BucketDiagnostics,
}

/// Bucket a request stream into `tau`-second snapshots on `grid`.
///
/// Each record contributes two independent events: a pickup and a drop-off,
/// binned by their own time and location. An event is skipped (and counted in
/// the diagnostics) when it precedes `start_time`, falls at/after `end_time`,
/// lands in a slot whose starting hour of day (UTC) is excluded, or projects
/// outside the grid — checked in that order.
///
/// `start_time` defaults to the earliest pickup time in the stream. With
/// `end_time` given, the series spans exactly `ceil((end - start) / tau)`
/// wall slots whether or not events reach that far; otherwise it spans
/// through the last event's slot. Excluded slots are dropped and the
/// survivors renumbered contiguously; `wall_slots` keeps the full span.
///
/// For day-of-week-stable hour exclusion, pass a `start_time` aligned to a
/// whole hour and a `tau` dividing 3600.
pub fn bucket_snapshots(
    records: &[RequestRecord],
    grid: &GridSpec,
    tau: i64,
    excluded_hours: &BTreeSet<u8>,
    start_time: Option<i64>,
    end_time: Option<i64>,
) -> Result<Bucketed, IngestError> {
    grid.validate()?;
    if tau <= 0 {
        return Err(GridError::InvalidSpec(format!("tau must be positive, got {tau}")).into());
    }
    if excluded_hours.iter().any(|&h| h > 23) {
        return Err(GridError::InvalidSpec("excluded hours must lie in 0..=23".to_string()).into());
    }
    let start = match start_time {
        Some(s) => s,
        None => records
            .iter()
            .map(|r| r.pickup_time)
            .min()
            .ok_or(IngestError::EmptyStream)?,
    };

    let wall_slots: u64 = match end_time {
        Some(end) => {
            if end <= start {
                return Err(IngestError::InvalidWindow { start, end });
            }
            ((end - start) as u64).div_ceil(tau as u64)
        }
        None => {
            let last = records
                .iter()
                .flat_map(|r| [r.pickup_time, r.dropoff_time])
                .filter(|&t| t >= start)
                .max();
            match last {
                Some(t) => ((t - start) as u64) / (tau as u64) + 1,
                None => 0,
            }
        }
    };

    // Map wall slots to retained snapshot indices, skipping excluded hours.
    let probe = SnapshotSeries {
        grid: grid.clone(),
        tau,
        start_time: start,
        excluded_hours: excluded_hours.clone(),
        wall_slots,
        snapshots: Vec::new(),
    };
    let mut slot_map: Vec<Option<usize>> = Vec::with_capacity(wall_slots as usize);
    let mut snapshots: Vec<Snapshot> = Vec::new();
    for ws in 0..wall_slots {
        if excluded_hours.contains(&probe.slot_hour(ws)) {
            slot_map.push(None);
        } else {
            let idx = snapshots.len();
            snapshots.push(Snapshot::empty(idx, ws, grid.rows, grid.cols));
            slot_map.push(Some(idx));
        }
    }

    let mut diag = BucketDiagnostics {
        records: records.len() as u64,
        ..Default::default()
    };

    enum EventKind {
        Pickup,
        Dropoff,
    }

    let mut place_event = |kind: EventKind, time: i64, lat: f64, lon: f64, counts: &mut EventCounts| {
        if time < start {
            counts.before_start += 1;
            return Ok(());
        }
        if let Some(end) = end_time {
            if time >= end {
                counts.after_end += 1;
                return Ok(());
            }
        }
        let ws = ((time - start) / tau) as u64;
        debug_assert!(ws < wall_slots);
        let idx = match slot_map[ws as usize] {
            Some(idx) => idx,
            None => {
                counts.excluded_hour += 1;
                return Ok(());
            }
        };
        let point = grid.to_plane(lat, lon)?;
        let cell = match grid.locate(point) {
            Ok(c) => c,
            Err(GridError::OutOfBounds { .. }) => {
                counts.out_of_bounds += 1;
                return Ok(());
            }
            Err(other) => return Err(IngestError::Grid(other)),
        };
        let snap = &mut snapshots[idx];
        match kind {
            EventKind::Pickup => {
                snap.pickups.increment(cell);
                snap.pickup_points.push(point);
            }
            EventKind::Dropoff => snap.dropoffs.increment(cell),
        }
        snap.event_times
            .entry(cell)
            .or_default()
            .push((time - start) as f64);
        counts.retained += 1;
        Ok(())
    };

    for rec in records {
        place_event(
            EventKind::Pickup,
            rec.pickup_time,
            rec.pickup_lat,
            rec.pickup_lon,
            &mut diag.pickups,
        )?;
        place_event(
            EventKind::Dropoff,
            rec.dropoff_time,
            rec.dropoff_lat,
            rec.dropoff_lon,
            &mut diag.dropoffs,
        )?;
    }

    // Input order is arbitrary; rate estimators expect sorted times.
    for snap in &mut snapshots {
        for times in snap.event_times.values_mut() {
            times.sort_unstable_by(f64::total_cmp);
        }
    }

    let series = SnapshotSeries::new(
        grid.clone(),
        tau,
        start,
        excluded_hours.clone(),
        wall_slots,
        snapshots,
    )?;
    Ok(Bucketed {
        series,
        diagnostics: diag,
    })
}
