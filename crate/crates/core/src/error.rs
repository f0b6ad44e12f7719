use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid block plan: {0}")]
    Plan(String),

    #[error("grid capacity exceeded: {segments} {side} segments on a grid with {capacity} {axis}")]
    GridCapacity {
        side: &'static str,
        axis: &'static str,
        segments: usize,
        capacity: usize,
    },

    #[error("simulator livelock at cycle {cycle}: no state change for {idle} cycles")]
    Livelock { cycle: u64, idle: u64 },

    #[error("FIFO overwrite at DPE ({row}, {col}) on cycle {cycle}")]
    FifoOverwrite { row: usize, col: usize, cycle: u64 },

    #[error("Taylor series did not converge within {cap} terms (one-norm {norm:.6e})")]
    Convergence { cap: usize, norm: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("refusing {qubits} qubits: cap is {cap}")]
    QubitCap { qubits: usize, cap: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
