//! Timestep-level transport plan generator driven by a traffic-system embedding.

mod generator;
pub mod movement;
pub mod topology;

pub use generator::{FactoryState, Generator, GeneratorState, Slab, StepEvents};
pub use movement::{resolve_moves, MovePolicy, Moves};
pub use topology::{Place, TopoJunction, TopoRoad, Topology};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TplanError {
    #[error("plan drift at t={t}: agent {agent} {detail}")]
    PlanDrift { t: usize, agent: usize, detail: String },
    #[error("unmet demand when closing epoch {epoch}: {detail}")]
    UnmetDemand { epoch: u64, detail: String },
    #[error("machine {machine} output buffer lacks token {token} at t={t}")]
    EmptyBuffer { t: usize, machine: usize, token: usize },
    #[error("road {road} cannot queue {needed} agents (length {len})")]
    Capacity { road: usize, needed: usize, len: usize },
    #[error("inconsistent generator state: {0}")]
    Corrupt(String),
}
