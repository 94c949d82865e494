//! Experiment harness for the low-rank SDC integrators: config parsing, the
//! convergence matrix runner, CSV tables and SVG rank plots.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod svg;

pub use config::{ExperimentConfig, ReferenceKind};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, scheme_label, write_outputs, CellRun, ExperimentOutput, RunOptions};
pub use output::{emit_csv, parse_convergence_csv, read_convergence_csv, ConvergenceRow};
pub use svg::{emit_rank_svg, Series};
