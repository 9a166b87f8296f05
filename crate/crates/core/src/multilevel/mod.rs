//! Two-grid and multi-level methods.
//!
//! Reordering the unknowns into fine (F) and coarse (C) sets gives
//! `A = [A_FF A_FC; A_CF A_CC]` and the exact block factorization with Schur
//! complement `S = A_CC - A_CF A_FF^-1 A_FC`. Replacing `A_FF` by a cheap
//! approximation yields the AMLI family of two-grid operators; [`amg`]
//! provides the classical recursive alternative.

mod amg;
mod coarsening;
mod two_grid;

pub use amg::{AmgConfig, AmgHierarchy, AmgLevel, AmgSummary, Cycle, LevelSummary, Restriction, Smoother};
pub use coarsening::{
    default_coarsening, ruge_stueben_coarsening, strong_connections, CfLabel, CfSplitting, DEFAULT_THETA,
};
pub use two_grid::{amli_iterate, AmliVariant, FineKind, TwoGridOperator, DIVERGENCE_BOUND};

use rayon::prelude::*;
use thiserror::Error;

use crate::sparse::{CsrMatrix, DenseMatrix, SparseError};

/// Entrywise lower bound accepted as nonnegative.
pub const NONNEG_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MultilevelError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("splitting needs n >= 2, got {0}")]
    TooSmall(usize),
    #[error("strength threshold {0} outside (0, 1)")]
    InvalidTheta(f64),
    #[error("invalid splitting: {0}")]
    InvalidSplitting(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fine block approximation is singular: {0}")]
    SingularFineBlock(String),
    #[error("approximate Schur complement is singular: {0}")]
    SingularSchur(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

pub type Result<T> = std::result::Result<T, MultilevelError>;

/// Checks `M^-1 >= 0` and `M^-1 N >= 0` (entrywise, down to `-1e-12`) for a
/// splitting `A = M - N` given by the action of `M^-1`.
pub fn weak_regular_first_type(
    m_inv_apply: impl Fn(&[f64], &mut [f64]) + Sync,
    n_mat: &CsrMatrix,
    n: usize,
    cap: usize,
) -> Result<bool> {
    if n > cap {
        return Err(SparseError::CapExceeded { n, cap }.into());
    }
    if n_mat.n_rows() != n || n_mat.n_cols() != n {
        return Err(MultilevelError::DimensionMismatch {
            expected: n,
            got: n_mat.n_rows(),
        });
    }
    let nt = n_mat.transpose();
    let apply_col = |col: Vec<f64>| {
        let mut z = vec![0.0; n];
        m_inv_apply(&col, &mut z);
        z
    };
    let m_inv: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            apply_col(e)
        })
        .collect();
    let m_inv_n: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![0.0; n];
            let (rows, vals) = nt.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                col[i] = v;
            }
            apply_col(col)
        })
        .collect();
    let min = |cols: &[Vec<f64>]| DenseMatrix::from_columns(n, cols).min_entry();
    Ok(min(&m_inv) >= -NONNEG_TOL && min(&m_inv_n) >= -NONNEG_TOL)
}
