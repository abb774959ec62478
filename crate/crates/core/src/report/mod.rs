//! Run configuration, staged pipeline execution and output artifacts.

pub mod artifacts;
pub mod config;
pub mod fixture;
pub mod plot;
pub mod stages;
pub mod tables;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::PipelineError;
use crate::dfm::DfmError;
use crate::qr::QrError;
use crate::skewt::SkewTError;
use crate::stress::StressError;

pub use config::RunConfig;
pub use fixture::{synthetic_fixture, write_fixture, Fixture, FixtureSpec};
pub use stages::{ModelArtifact, OutputLock, RunOptions, Runner, Stage, StageOutcome, MODEL_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("output directory is locked by another run ({0})")]
    Locked(PathBuf),
    #[error("missing {stage} artifacts at {path}: {reason}")]
    MissingArtifact { stage: String, path: PathBuf, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("schema check failed: {0}")]
    Schema(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dfm(#[from] DfmError),
    #[error(transparent)]
    Qr(#[from] QrError),
    #[error(transparent)]
    SkewT(#[from] SkewTError),
    #[error(transparent)]
    Stress(#[from] StressError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReportError {
    /// Process exit code: 2 configuration or input, 3 numerical or other
    /// failure, 4 missing upstream artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) | ReportError::Locked(_) => 2,
            ReportError::Pipeline(PipelineError::ImputationNotConverged { .. }) => 3,
            ReportError::Pipeline(_) => 2,
            ReportError::Stress(StressError::Config(_)) => 2,
            ReportError::MissingArtifact { .. } => 4,
            _ => 3,
        }
    }
}
