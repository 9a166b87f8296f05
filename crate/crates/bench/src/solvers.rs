//! Uniform front end to the linear solvers compared in the studies.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use mfd_core::krylov::{bicgstab, ilu0, BicgstabOptions, SolveReport};
use mfd_core::multilevel::{
    amli_iterate, default_coarsening, ruge_stueben_coarsening, AmgConfig, AmgHierarchy, AmliVariant, CfSplitting,
    FineKind, TwoGridOperator, DEFAULT_THETA,
};
use mfd_core::sparse::CsrMatrix;

use crate::Result;

/// Iteration cap for the stationary AMLI iterations.
pub const AMLI_MAX_ITER: usize = 2000;
/// Iteration cap for BiCGstab.
pub const BICGSTAB_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coarsening {
    /// First half of the unknowns coarse.
    Default,
    RugeStueben,
}

impl Coarsening {
    pub fn split(self, a: &CsrMatrix) -> Result<CfSplitting> {
        Ok(match self {
            Coarsening::Default => default_coarsening(a.n_rows())?,
            Coarsening::RugeStueben => ruge_stueben_coarsening(a, DEFAULT_THETA)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverSpec {
    BicgstabIlu0,
    AmgBicgstab,
    Amli {
        variant: AmliVariant,
        coarsening: Coarsening,
        fine: FineKind,
    },
}

impl SolverSpec {
    /// All AMLI combinations with Jacobi, Gauss-Seidel and ILU(0) fine solvers.
    pub fn amli_grid() -> Vec<SolverSpec> {
        let mut out = vec![];
        for coarsening in [Coarsening::Default, Coarsening::RugeStueben] {
            for fine in [FineKind::Jacobi, FineKind::GaussSeidel, FineKind::Ilu0] {
                for variant in AmliVariant::ALL {
                    out.push(SolverSpec::Amli {
                        variant,
                        coarsening,
                        fine,
                    });
                }
            }
        }
        out
    }

    /// BiCGstab + ILU(0), AMG-BiCGstab and [`SolverSpec::amli_grid`].
    pub fn full_grid() -> Vec<SolverSpec> {
        let mut out = vec![SolverSpec::BicgstabIlu0, SolverSpec::AmgBicgstab];
        out.extend(Self::amli_grid());
        out
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::BicgstabIlu0 => write!(f, "bicgstab-ilu0"),
            SolverSpec::AmgBicgstab => write!(f, "amg-bicgstab"),
            SolverSpec::Amli {
                variant,
                coarsening,
                fine,
            } => {
                let c = match coarsening {
                    Coarsening::Default => "default",
                    Coarsening::RugeStueben => "rs",
                };
                let fk = match fine {
                    FineKind::Jacobi => "jacobi",
                    FineKind::GaussSeidel => "gs",
                    FineKind::Ilu0 => "ilu0",
                    FineKind::Exact => "exact",
                };
                write!(f, "{}-{c}-{fk}", format!("{variant:?}").to_lowercase())
            }
        }
    }
}

/// Result of one solve; `report` is `None` when the setup failed.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Option<Vec<f64>>,
    pub report: Option<SolveReport>,
    pub setup_time: f64,
    pub failure: Option<String>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.failure.is_none() && self.report.as_ref().is_some_and(|r| r.converged)
    }
}

/// Solves `A x = b` from a zero guess to relative residual `tol`. Setup and
/// iteration failures are recorded in the outcome instead of propagated.
pub fn solve(a: &CsrMatrix, b: &[f64], spec: SolverSpec, tol: f64) -> SolveOutcome {
    let start = Instant::now();
    let opts = BicgstabOptions {
        tol,
        max_iter: BICGSTAB_MAX_ITER,
        ..BicgstabOptions::default()
    };
    let run = || -> Result<(f64, Vec<f64>, SolveReport)> {
        match spec {
            SolverSpec::BicgstabIlu0 => {
                let m = ilu0(a)?;
                let setup = start.elapsed().as_secs_f64();
                let (x, r) = bicgstab(a, b, Some(&m), &opts)?;
                Ok((setup, x, r))
            }
            SolverSpec::AmgBicgstab => {
                let m = AmgHierarchy::build(a, AmgConfig::default())?;
                let setup = start.elapsed().as_secs_f64();
                let (x, r) = bicgstab(a, b, Some(&m), &opts)?;
                Ok((setup, x, r))
            }
            SolverSpec::Amli {
                variant,
                coarsening,
                fine,
            } => {
                let split = coarsening.split(a)?;
                let op = TwoGridOperator::new(a, &split, fine, variant)?;
                let setup = start.elapsed().as_secs_f64();
                let (x, r) = amli_iterate(&op, a, b, &vec![0.0; b.len()], tol, AMLI_MAX_ITER)?;
                Ok((setup, x, r))
            }
        }
    };
    match run() {
        Ok((setup_time, x, report)) => {
            let failure = if report.converged {
                None
            } else if report.diverged {
                Some(format!("diverged after {} iterations", report.iterations))
            } else if let Some(b) = &report.breakdown {
                Some(format!("breakdown: {b}"))
            } else {
                Some(format!("no convergence in {} iterations", report.iterations))
            };
            SolveOutcome {
                x: Some(x),
                report: Some(report),
                setup_time,
                failure,
            }
        }
        Err(e) => SolveOutcome {
            x: None,
            report: None,
            setup_time: start.elapsed().as_secs_f64(),
            failure: Some(format!("setup failed: {e}")),
        },
    }
}
