//! Sparse and small dense linear algebra.
//!
//! [`CsrMatrix`] carries every assembled system and its blocks. [`DenseMatrix`]
//! exists for oracle checks on small instances: explicit inverses, spectral
//! radii of iteration matrices and direct solves on the coarsest level.

mod csr;
mod dense;
mod mm;

pub use csr::{BlockSplit, CsrMatrix};
pub use dense::{DenseLu, DenseMatrix};
pub use mm::{mm_read, mm_write, read_matrix_market, write_matrix_market};

use thiserror::Error;

/// Largest dimension for which dense oracle computations are attempted.
pub const DEFAULT_ORACLE_CAP: usize = 600;

/// Relative threshold below which assembled entries are dropped.
pub const COMPACTION_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("matrix is singular (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("dense oracle cap exceeded: n = {n} > {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,
    #[error("malformed Matrix Market header: {0}")]
    MalformedHeader(String),
    #[error("unsupported Matrix Market symmetry `{0}` (only `general` is accepted)")]
    UnsupportedSymmetry(String),
    #[error("unsupported Matrix Market field `{0}`")]
    UnsupportedField(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("entry ({row}, {col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("duplicate entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SparseError>;

/// Euclidean inner product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
