//! Command-line runs, configuration files, CSV ingestion and report output.

pub mod config;
pub mod emit;
pub mod format;
pub mod input;
pub mod run;

pub use config::{resolve, Job, OutputFormat, Overrides, RunConfig, RunKind};
pub use emit::{emit, emit_report, parse_report_csv, FitReport, Meta, Output, SampleReport};
pub use format::format_real;
pub use input::{load_population, load_population_from_reader, Direction, PopulationCsv};
pub use run::{execute, exit_code, fit_dataset, run_study, EstimatorFit, main_with_args, write_atomic, RunOutcome};
