//! Search engine and verifier for decomposing small multi-qubit gates
//! (CCZ, CCCZ, ...) into CZ and single-qubit rotations under arbitrary
//! qubit-connectivity constraints.
//!
//! The optimizer maximizes the trace overlap |tr(V_T^dag V P)|^2 between a
//! parameterized circuit V and a target gate V_T, one rotation angle at a
//! time, each update solved in closed form. Restarted optimization over an
//! enumerated space of CZ placements yields decompositions with minimal
//! CZ-count or CZ-depth.

pub mod circuit;
pub mod objective;
pub mod registry;
pub mod search;
pub mod structure;
pub mod sweep;
pub mod tensor;

use thiserror::Error;

/// Qubit index 0 is the most-significant bit of basis-state indices,
/// everywhere in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
