//! Core library for simulating proactive vehicle placement on a discretized
//! city grid.
//!
//! The library is organized around a small set of concerns:
//!
//! - [`grid`]: the spatial model — square cells of side `epsilon` meters,
//!   equirectangular projection from WGS-84 coordinates, neighborhoods of
//!   reachable cells, and the per-snapshot reward of a placement.
//! - [`series`]: time discretization — drop-off/pickup count matrices bucketed
//!   into fixed `tau`-second snapshots, with hour-of-day exclusion.
//! - [`ingest`]: parsing ride-request streams (CSV / JSON lines) and turning
//!   them into snapshot series, with per-event skip diagnostics.
//! - [`fractal`]: correlation-dimension estimation of request point sets via
//!   box-occupancy statistics on a ladder of scales.
//! - [`synth`]: synthetic generators — chaos-game attractors with known
//!   dimension, and ride-stream generation with controllable arrival models.
//! - [`placement`]: the online placement policies, the offline max-flow
//!   oracle, and the simulation driver that scores them.
//! - [`flow`]: a small integer max-flow implementation used by the oracle.

pub mod flow;
pub mod fractal;
pub mod grid;
pub mod ingest;
pub mod placement;
pub mod series;
pub mod synth;

pub use fractal::{
    correlation_sum, detect_fractal_range, dyadic_ladder, fit_d2, linear_fit, neighborhood_growth,
    occupancy, weekly_d2_series, CorrelationCurve, CurvePoint, D2Estimate, D2Flag, D2Summary,
    FractalError, GrowthPoint, LinearFit, OccupancyHistogram, SnapshotD2, WeeklyD2,
};
pub use grid::{
    reward, Cell, CountMatrix, GridError, GridSpec, Neighborhood, PlacementMatrix, Point2d,
    RewardValue,
};
pub use ingest::{
    bucket_snapshots, parse_records, write_records_csv, BucketDiagnostics, Bucketed, EventCounts,
    IngestError, RequestRecord, StreamFormat, CSV_HEADER,
};
pub use placement::{
    mle_lambda, opt_oracle, place_ftl_ch, place_pp_lh, place_urand_nh, prob_event, simulate,
    AlgoParams, Algorithm, HistoryState, RewardSeries, SimError, SnapshotScore,
};
pub use series::{Snapshot, SnapshotSeries};
pub use synth::{
    derive_seed, gen_points, gen_ride_stream, rate_map_from_attractor, ArrivalModel,
    AttractorKind, AttractorSpec, DurationRange, StreamSpec, SynthError, TripLaw,
};
