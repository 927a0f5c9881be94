//! Seeded experiment runner, metrics, persistence, aggregation and SVG plots.

mod aggregate;
mod config;
mod plot;
mod runner;
mod store;

pub use aggregate::{aggregate, aggregate_series, summarize, AggregateCurve};
pub use config::{Aggregation, AlgoSpec, EnvSpec, ExperimentConfig, Metric};
pub use plot::{plot_emit, render_svg};
pub use runner::{
    mean_return_estimate, run_experiment, run_seed, value_error, BufferStats, FiniteTask,
    RunRecord, TaskApprox,
};
pub use store::{
    csv_name, read_series, series_from_csv, series_to_csv, write_records, Manifest, ManifestEntry,
    ManifestRun, MANIFEST,
};
