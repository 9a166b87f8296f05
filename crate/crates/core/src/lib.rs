//! Meshfree finite differences for the Poisson equation on point clouds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: point clouds, neighbourhoods, mesh size and the geometric
//!   predicates that decide whether a positive Laplace stencil can exist.
//! * [`stencil`]: per-point constraint systems and the two stencil selectors,
//!   weighted least squares and sign-constrained l1 minimisation (simplex).
//! * [`sparse`]: CSR matrices, dense oracles and Matrix Market I/O.
//! * [`assembly`]: the global system `A u = f` and its M-matrix certificates.
//! * [`krylov`]: BiCGstab, ILU(0), Jacobi and Gauss-Seidel.
//! * [`multilevel`]: CF-splittings, AMLI-type two-grid operators and a
//!   classical AMG V-cycle.

pub mod assembly;
pub mod geometry;
pub mod krylov;
pub mod multilevel;
pub mod sparse;
pub mod stencil;
