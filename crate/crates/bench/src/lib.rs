//! Experiment harness for `proxvr-core`: problem files, experiment configs
//! and manifests, the comparison and sweep protocols, and the acceptance
//! suite behind `proxvr verify`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod stats;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{BenchError, Result};
pub use experiments::{replay, run_experiment, Outcome, Report};
pub use manifest::ExperimentManifest;
