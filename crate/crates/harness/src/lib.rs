//! Training, evaluation and experiment sweeps for the service coordination
//! agents.

pub mod eval;
pub mod report;
pub mod sweep;
pub mod train;

use std::io;
use std::path::{Path, PathBuf};

pub use eval::{evaluate, evaluate_or_record, EvalProtocol, GreedyPolicy, Policy, RandomPolicy, ResultRecord};
pub use sweep::{run_sweep, ExperimentSpec};
pub use train::{new_agent, train, AgentKind, TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Env(#[from] gsc_core::environment::EnvError),
    #[error(transparent)]
    Agent(#[from] gsc_nn::agent::AgentError),
    #[error(transparent)]
    Replay(#[from] gsc_core::replay::ReplayError),
    #[error(transparent)]
    Traffic(#[from] gsc_core::traffic::TrafficError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
