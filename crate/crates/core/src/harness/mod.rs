//! Virtual experiments: specimen preparation, boundary data with controlled
//! errors, single identification runs and Monte-Carlo campaigns.

mod boundary;
mod campaign;
mod config;
mod dataset;
mod experiment;
mod manifest;
mod metrics;
mod report;

pub use boundary::{dns_boundary_max, extract_boundary, perturb_boundary, smooth_boundary};
pub use campaign::{campaign_jobs, check_specimen, run_campaign, run_campaign_with, CampaignJob};
pub use config::{
    CampaignConfig, Config, GeometryConfig, IdicConfig, ImagingConfig, MaterialConfig, Method, MhaConfig,
    PerturbationKind, PerturbationSpec, ENV_PREFIX,
};
pub use dataset::{CaseData, Dataset, DATASET_FILES};
pub use experiment::{applied_boundary, run_single, run_single_with, RunOutcome, RunSpec};
pub use manifest::{sha256_file, sha256_hex, FileDigest, RunManifest};
pub use metrics::{boundary_error, parameter_error};
pub use report::{aggregate, AggregateRow, ExperimentReport, RealizationRow, AGGREGATE_COLUMNS, REALIZATION_COLUMNS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("reference boundary has zero norm")]
    ZeroReference,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("report line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Fem(#[from] crate::fem::FemError),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
    #[error(transparent)]
    Forward(#[from] crate::forward::ForwardError),
    #[error(transparent)]
    Correlation(#[from] crate::correlation::CorrelationError),
    #[error(transparent)]
    Idic(#[from] crate::idic::IdicError),
    #[error(transparent)]
    Mha(#[from] crate::mha::MhaError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
