//! Diagonal-sparse matrices and a cycle-level model of a diagonal
//! SpMSpM systolic accelerator.

pub mod accel;
pub mod blocking;
pub mod dataflow;
pub mod diagmat;
pub mod error;
pub mod hamsim;
pub mod io;
pub mod memory;
pub mod pauli;
pub mod report;
pub mod spmspm;

pub use diagmat::{DenseMatrix, DiagMatrix, Diagonal, Scalar};
pub use error::{Error, Result};
