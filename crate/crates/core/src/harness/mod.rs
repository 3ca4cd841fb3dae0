//! Training, evaluation, experiment configuration and curve export.

mod config;
mod curves;
mod eval;
mod experiment;
mod gradsuite;
mod train;

pub use config::{scheme_list, Config, ExperimentConfig, TrainConfig};
pub use curves::{curve_points, export_curves, format_curves, parse_curves, CurvePoint};
pub use eval::{evaluate, EvalReport, SnrAccuracy};
pub use experiment::{load_or_generate, pooled_reports, run_experiment, ExperimentRun};
pub use gradsuite::{gradient_suite, GradSuiteEntry, SUITE_TOLERANCE};
pub use train::{batch_input, rotate_phases, train, EpochLog, TrainOutcome};

use crate::archs::ArchError;
use crate::autodiff::AutodiffError;
use crate::dataset::DatasetError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

impl HarnessError {
    /// Stable short tag for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Dataset(_) => "dataset",
            HarnessError::Arch(ArchError::Io { .. }) => "io",
            HarnessError::Arch(_) => "model",
            HarnessError::Autodiff(_) => "model",
            HarnessError::Diverged { .. } => "diverged",
            HarnessError::EmptyTestSet => "dataset",
            HarnessError::GradCheck(_) => "gradcheck",
        }
    }
}
