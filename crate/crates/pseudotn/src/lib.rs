//! Moment operators, Weingarten calculus, and tensor-network state tools for
//! studying pseudoentangled random-state ensembles.
//!
//! The crate has three layers: exact symmetric-group / Weingarten machinery
//! (`symgroup`, `replica`), graph-level models (`tngraph`, `spinmodel`), and
//! samplers plus state simulation (`ensembles`, `statesim`). `xcli` wires the
//! layers into the command-line drivers.

extern crate blas_src;

pub mod ensembles;
pub mod replica;
pub mod spinmodel;
pub mod statesim;
pub mod symgroup;
pub mod tngraph;
pub mod xcli;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid permutation mapping: {0}")]
    InvalidPermutation(String),
    #[error("copy counts differ: {0} vs {1}")]
    CopyMismatch(usize, usize),
    #[error("register layouts differ: {0}")]
    LayoutMismatch(String),
    #[error("weingarten inversion needs m < d, got m={m}, d={d}")]
    WeingartenRegime { m: usize, d: usize },
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: u128, cap: u128 },
    #[error("enumeration of S_m capped at m <= {cap}, got m={m}")]
    GroupCap { m: usize, cap: usize },
    #[error("graph validation failed: {0}")]
    InvalidGraph(String),
    #[error("graph parse error at line {line}: {msg}")]
    GraphParse { line: usize, msg: String },
    #[error("region error: {0}")]
    InvalidRegion(String),
    #[error("ensemble error: {0}")]
    Ensemble(String),
    #[error("partition enumeration too large: {terms} weighted terms exceed {cap}")]
    PartitionCap { terms: u128, cap: u128 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("linear algebra backend error: {0}")]
    Linalg(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
