//! Per-point stencil selection.
//!
//! A stencil `(s_0, s_1, .., s_m)` approximates the Laplacian (or a boundary
//! normal derivative) at a centre point from its neighbours. Consistency is a
//! small linear system `V s = b` (exactness for polynomials up to degree two);
//! with more neighbours than constraints it is underdetermined and a selection
//! rule picks one solution:
//!
//! * [`lsq_stencil`] minimises the weighted 2-norm, giving dense stencils of
//!   arbitrary sign;
//! * [`lp_stencil`] minimises the weighted 1-norm over nonnegative
//!   coefficients, giving basic solutions with at most `k` nonzeros.

mod constraints;
mod lp;
mod lsq;
mod simplex;

pub use constraints::{build_constraints, laplace_rows, ConstraintKind, ConstraintSystem};
pub use lp::{lp_stencil, DEFAULT_LP_ALPHA};
pub use lsq::{lsq_flops, lsq_stencil, DEFAULT_LSQ_ALPHA};
pub use simplex::{simplex_solve, BasicSolution, LpOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StencilError {
    #[error("neighbourhood is empty")]
    EmptyNeighborhood,
    #[error("neighbour {0} coincides with the centre")]
    ZeroDistance(usize),
    #[error("weight exponent {0} must be finite and >= 1")]
    InvalidAlpha(f64),
    #[error("normal vector is not a unit vector")]
    InvalidNormal,
    #[error("constraint Gram matrix is singular (pivot {pivot:e} below {threshold:e})")]
    RankDeficient { pivot: f64, threshold: f64 },
    #[error("no nonnegative stencil satisfies the constraints")]
    Infeasible { pivots: usize },
    #[error("LP is unbounded")]
    Unbounded,
    #[error("simplex exceeded {limit} pivots")]
    CycleLimit { limit: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, StencilError>;

/// Which selection rule produced a stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilMethod {
    Lsq,
    L1,
}

/// Selected stencil at one point.
///
/// `coeffs[i]` multiplies the value at `neighbors[i]`; `center_coeff` is the
/// constant-exactness complement `-sum(coeffs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub method: StencilMethod,
    pub center: usize,
    pub center_coeff: f64,
    pub neighbors: Vec<usize>,
    pub coeffs: Vec<f64>,
    /// Laplace: every neighbour coefficient is nonnegative. Normal
    /// derivative: every neighbour coefficient is nonpositive. Either way the
    /// stencil yields a row with the L-matrix sign pattern.
    pub positive: bool,
    /// At most `k` nonzero neighbour coefficients.
    pub minimal: bool,
    /// Simplex basis changes (0 for least squares).
    pub pivot_count: usize,
    /// Value of the selection objective at the returned coefficients.
    pub objective: f64,
}

impl Stencil {
    pub(crate) fn from_coeffs(
        sys: &ConstraintSystem,
        method: StencilMethod,
        coeffs: Vec<f64>,
        pivot_count: usize,
        objective: f64,
    ) -> Self {
        let center_coeff = -coeffs.iter().sum::<f64>();
        let positive = match sys.kind {
            ConstraintKind::Laplace => coeffs.iter().all(|&s| s >= 0.0),
            ConstraintKind::NeumannDerivative { .. } => coeffs.iter().all(|&s| s <= 0.0),
        };
        let nonzeros = coeffs.iter().filter(|&&s| s != 0.0).count();
        Self {
            method,
            center: sys.center,
            center_coeff,
            neighbors: sys.neighbors.clone(),
            minimal: nonzeros <= sys.k(),
            coeffs,
            positive,
            pivot_count,
            objective,
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.coeffs.iter().filter(|&&s| s != 0.0).count()
    }
}
