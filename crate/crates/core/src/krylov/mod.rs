//! Iterative solvers: right-preconditioned BiCGstab, ILU(0), and the classical
//! Jacobi and Gauss-Seidel sweeps.

mod bicgstab;
mod ilu;
mod stationary;

pub use bicgstab::{bicgstab, BicgstabOptions};
pub use ilu::{ilu0, Ilu0Factors};
pub use stationary::{gauss_seidel_iterate, jacobi_iterate, JacobiPreconditioner};
pub(crate) use stationary::gauss_seidel_sweep;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{DenseLu, SparseError};

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KrylovError>;

/// Approximate inverse `z = M^-1 r`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// `M = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl Preconditioner for DenseLu {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.solve(r));
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `||r_k|| / ||b||`, starting with the initial residual.
    pub residual_history: Vec<f64>,
    /// Reason for a breakdown that ended the solve (or was recovered from).
    pub breakdown: Option<String>,
    /// Non-finite values or residual growth beyond the divergence bound.
    pub diverged: bool,
    /// Informational only.
    pub wall_time: f64,
}

impl SolveReport {
    pub fn final_relres(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Two columns: iteration, relres.
    pub fn write_history_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "relres"])?;
        for (k, r) in self.residual_history.iter().enumerate() {
            out.write_record([k.to_string(), format!("{r:e}")])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
