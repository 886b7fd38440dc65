//! Command-line orchestration: configuration, dataset resolution, the
//! end-to-end pipeline and experiment sweeps.

pub mod commands;
pub mod config;
pub mod data;
pub mod pipeline;
pub mod report;

pub use config::{RunConfig, TauChoice};
pub use pipeline::{run_pipeline, Layout, PipelineRun};
