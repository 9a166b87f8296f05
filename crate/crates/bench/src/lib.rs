//! Benchmark harness: manufactured problems, convergence and sparsity
//! studies, solver comparisons and the acceptance suite behind `mfd verify`.

pub mod acceptance;
pub mod cli;
pub mod problems;
pub mod report;
pub mod solvers;
pub mod studies;

use thiserror::Error;

use mfd_core::assembly::AssemblyError;
use mfd_core::geometry::GeometryError;
use mfd_core::krylov::KrylovError;
use mfd_core::multilevel::MultilevelError;
use mfd_core::sparse::SparseError;
use mfd_core::stencil::StencilError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("problem {name}: source differs from the Laplacian of the exact solution by {gap:e}")]
    InconsistentProblem { name: String, gap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown study {0:?}")]
    UnknownStudy(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Multilevel(#[from] MultilevelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
