//! Stage-by-stage command-line pipeline over `aeromon_core`.
//!
//! Stages exchange CSV and JSON files in one output directory. Test
//! features and test labels live in separate files, and only `evaluate`
//! opens the labels.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use pipeline::run_pipeline;
