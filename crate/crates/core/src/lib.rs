//! Two-agent learning-to-teach.
//!
//! Task-level learners (tabular and tile-coded Q-learning) act in small
//! cooperative games while advising-level policies decide when to request
//! advice and what actions to advise. Advising policies are trained with a
//! centralized critic over replayed advising experiences; heuristic advising
//! baselines and an experiment harness round out the crate.

pub mod advising;
pub mod envs;
pub mod harness;
pub mod heuristics;
pub mod neural;
pub mod protocol;
pub mod qlearn;
pub mod rewards;

pub use envs::{ActionRotation, DomainId, Env, FlipAxis, JointObservation, StepResult};
pub use qlearn::{Learner, TabularQ, TileCodedQ, UpdateReport};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("empty replay buffer")]
    EmptyBuffer,
    #[error("policy file error: {0}")]
    PolicyFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] Box<csv::Error>),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(Box::new(e))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
