use std::io;
use std::path::PathBuf;

use netindep_core::algorithms::AlgorithmError;
use netindep_core::graph::GraphError;
use netindep_core::metrics::MetricsError;
use netindep_core::mixing::MixingError;
use netindep_core::objectives::ObjectiveError;
use thiserror::Error;

/// Every problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
pub struct ConfigError(pub Vec<String>);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for divergence,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } => 2,
            Self::Graph(_) | Self::Objective(_) | Self::Mixing(MixingError::Disconnected) => 2,
            Self::Algorithm(AlgorithmError::Divergence { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
