//! Experiment harness: dataset generation and persistence, ingestion of
//! external trajectory logs, accuracy experiments over recognizer methods,
//! and results emission (CSV and SVG).

mod dataset;
mod emit;
mod experiment;
mod ingest;
mod prepare;
mod records;
mod street;

pub use dataset::{generate_dataset, DatasetSpec, MapRegistry, MapSplit};
pub use emit::{
    load_results, read_results_csv, save_results, save_svg, write_results_csv, write_svg,
    RESULTS_HEADER,
};
pub use experiment::{
    accuracy, robustness_experiment, run_experiment, ExperimentConfig, Method, ModelSet, ResultRow,
};
pub use ingest::{ingest_trajectories, IngestReport};
pub use prepare::{train_recognizer, ExamplePool, TrainReport};
pub use records::{
    parse_cell_list,
    load_records, read_records, save_records, write_records, ExampleRecord, GenParams,
};
pub use street::{
    generate_street_traffic, read_region_spec, read_traffic_csv, street_scene, write_region_spec,
    write_traffic_csv, GoalRegion, StreetScene, TrafficSample,
};

use crate::gridworld::GridError;
use crate::learned::LearnedError;
use crate::planning::PlanningError;
use thiserror::Error;

/// Errors raised by dataset, ingest, experiment, and emission code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Learned(#[from] LearnedError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error("traffic line {line}: {msg}")]
    Traffic { line: usize, msg: String },
    #[error("region line {line}: {msg}")]
    Region { line: usize, msg: String },
    #[error("results line {line}: {msg}")]
    Results { line: usize, msg: String },
    #[error("no model provided for method {0}")]
    MissingModel(String),
    #[error("model was trained on map {0}, which is also in the test set")]
    SharedMap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
