//! Experiment driver: builds the synthetic intersection scenario, runs the
//! RBPF and the static baselines over method × noise-model × seed grids, and
//! writes per-epoch error CSVs plus a run summary.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod summary;

pub use config::{Method, NoiseModel, ScenarioConfig};
pub use experiment::{run_experiment, run_single, RunOutput, RunSpec, RunStatus};
pub use metrics::{compute_rms, EpochRecord};

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("configuration key '{key}': cannot use '{value}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("configuration key '{key}' {reason}")]
    Invalid { key: String, reason: String },
    #[error("configuration line {line} is not 'key = value': {text}")]
    Syntax { line: usize, text: String },
    #[error("CSV schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Empty(String),
    #[error(transparent)]
    Core(#[from] cmm_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
