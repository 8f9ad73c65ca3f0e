//! Smart factory embedding: process assignment and cyclic traffic-system
//! transport plans solved as a MILP, compiled to a timestep generator and
//! checked by simulation.

pub mod fixtures;
pub mod milp;
pub mod model;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod tplan;

pub use model::{SfeInstance, ModelError};
