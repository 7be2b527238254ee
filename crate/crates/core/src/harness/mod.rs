//! Configuration, experiment orchestration and sweeps.
//!
//! A master seed feeds [`crate::seed`], which hands out independent streams
//! for the graph, the data split, the initial model, every agent's noise and
//! batches, and the asynchronous scheduler. Changing one config value
//! therefore changes only the parts of a run that depend on it.

mod config;
mod experiment;
mod metrics;
mod sweep;

pub use config::{
    parse_config, parse_flags, parse_pairs, ConfigError, DatasetSpec, ExperimentConfig, ModelKind, ProtocolKind, KEYS,
};
pub use experiment::{run_experiment, simulate, write_outputs, Aborted, RunOutput};
pub use metrics::{parse_summary, summarize, write_summary, MetricsRecord, SUMMARY_HEADER};
pub use sweep::{sweep, SweepAxis};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::learning::LearningError;
use crate::privacy::PrivacyError;
use crate::protocol::ProtocolError;
use crate::topology::TopologyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{samples} training samples cannot cover {agents} agents")]
    TooFewSamples { samples: usize, agents: usize },
    #[error("{path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
