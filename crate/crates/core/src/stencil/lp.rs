use super::simplex::{simplex_solve, LpOutcome};
use super::{ConstraintKind, ConstraintSystem, Result, Stencil, StencilError, StencilMethod};

/// Weight exponent used for l1 stencils unless configured. Anything above two
/// makes far neighbours costlier than the quadratic constraint can reward.
pub const DEFAULT_LP_ALPHA: f64 = 4.0;

/// Minimal positive stencil: a basic optimum of
/// `min sum s_i / w_i  s.t.  V s = b, s >= 0`.
///
/// For a normal-derivative system the LP is posed for the inward derivative
/// (`b = -n`) and the result negated, so the returned coefficients satisfy
/// `V s = n` with `s <= 0`.
///
/// Returns [`StencilError::Infeasible`] when no such stencil exists.
pub fn lp_stencil(sys: &ConstraintSystem) -> Result<Stencil> {
    let (v, w, unscale) = sys.scaled();
    let flip = match sys.kind {
        ConstraintKind::Laplace => 1.0,
        ConstraintKind::NeumannDerivative { .. } => -1.0,
    };
    let b: Vec<f64> = sys.b.iter().map(|x| flip * x).collect();
    let cost: Vec<f64> = w.iter().map(|wi| 1.0 / wi).collect();
    let sol = match simplex_solve(&v, &b, &cost)? {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Infeasible { pivots, .. } => return Err(StencilError::Infeasible { pivots }),
    };
    let coeffs: Vec<f64> = sol.x.iter().map(|t| flip * unscale * t).collect();
    let objective = coeffs
        .iter()
        .zip(&sys.weights)
        .map(|(s, w)| s.abs() / w)
        .sum();
    Ok(Stencil::from_coeffs(sys, StencilMethod::L1, coeffs, sol.pivots, objective))
}
