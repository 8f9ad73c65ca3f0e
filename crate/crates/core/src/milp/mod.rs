//! The TS-MILP: process assignment, rates and epoch-level agent/token flows.

pub mod backend;
mod build;
mod document;
mod embedding;

use serde::{Deserialize, Serialize};

pub use backend::{
    BackendError, Cmp, HighsBackend, HighsOptions, LpBackend, SolveOutcome, SolveStatus, VarId,
    VarKind,
};
pub use build::{build_ts_milp, solve_ts_milp, TsMilp, VarCounts};
pub use document::EmbeddingDoc;
pub use embedding::{check_embedding, ConstraintViolation, Rule, Tensor3, TrafficSystemEmbedding};

/// Number of epochs per cycle and timesteps per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(rename = "N")]
    pub num_epochs: usize,
    #[serde(rename = "L")]
    pub epoch_len: usize,
}

impl HyperParams {
    pub fn new(num_epochs: usize, epoch_len: usize) -> Self {
        HyperParams { num_epochs, epoch_len }
    }

    pub fn cycle_len(&self) -> usize {
        self.num_epochs * self.epoch_len
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum MilpError {
    #[error("cannot build TS-MILP: {0}")]
    Build(String),
    #[error("solver backend failure: {0}")]
    Backend(String),
    #[error("bad embedding document: {0}")]
    Document(String),
}
