//! Experiment orchestration and the command-line surface.

pub mod config;
pub mod csv;
pub mod diagnostics;
pub mod experiment;
pub mod rates;

pub use config::{ExperimentConfig, GameSpec, InitSpec, ReferenceMode, SetsSpec};
pub use csv::{export_csv, parse_csv, read_csv, to_csv_string, HEADER};
pub use diagnostics::{run_diagnostics, DiagnosticsGrid, DiagnosticsReport, ProbeResult};
pub use experiment::{run_experiment, run_experiment_runs, ExperimentMetadata, ExperimentOutput, TableRow};
pub use rates::{fit_loglog, fit_rate, RateEstimate, TailWindow};
