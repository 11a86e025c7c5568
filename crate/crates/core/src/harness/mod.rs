//! Configuration files, experiment orchestration and CSV reports.

mod config;
mod pipeline;
mod report;

pub use config::{BoundarySpec, ExperimentConfig};
pub use pipeline::{run_experiment, run_pipeline, Pipeline};
pub use report::{emit_csv, parse_csv, read_csv, sort_rows, write_csv, ReportRow, Stage, CSV_HEADER};
