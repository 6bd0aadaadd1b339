//! Experiment runner: presets, config files, seeded runs and their artifacts.

pub mod error;
pub mod preset;
pub mod runner;
pub mod summary;
pub mod svg;

pub use error::{CliError, CliResult};
pub use preset::{preset, DatasetKind, DatasetSpec, Experiment, Variant, PRESETS};
pub use runner::{prepare_data, run_experiment, train_seed, PreparedData, RunOptions, SeedRun};
pub use summary::{Comparison, Summary, SummaryRow};
