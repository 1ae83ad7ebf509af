//! Configuration, data ingestion, and the replicated pipelines.

pub mod analyze;
pub mod config;
pub mod ingest;
pub mod manifest;
pub mod project;
pub mod study;

pub use analyze::{run_data_analysis, AnalysisOutputs};
pub use config::{load_config, AnalyzeConfig, ExperimentConfig, FitConfig, ProtocolConfig};
pub use ingest::{
    project_records, read_raw_records, read_tracks_csv, subsample_tracks, write_tracks_csv,
    Ingested, RawRecord,
};
pub use manifest::Manifest;
pub use project::Projection;
pub use study::{run_simulation_study, ReplicateRecord, StudyOutputs};
