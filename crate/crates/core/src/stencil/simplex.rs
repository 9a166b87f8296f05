//! Dense two-phase revised simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Problems here are tiny (a handful of rows, a few dozen columns), so the
//! basis matrix is refactorised from scratch at every iteration instead of
//! being updated. Bland's rule picks both the entering column (lowest index
//! with negative reduced cost) and the leaving row (lowest basic index among
//! ratio-test ties), which rules out cycling and makes the returned vertex a
//! deterministic function of the input.

use super::{Result, StencilError};
use crate::sparse::{norm_inf, DenseLu, DenseMatrix};

/// Reduced costs below `-COST_TOL` are improving.
const COST_TOL: f64 = 1e-11;
/// Pivot elements must exceed this in the ratio test.
const PIVOT_TOL: f64 = 1e-11;

/// Optimal basic feasible solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub x: Vec<f64>,
    /// Basic column indices, ascending. Redundant equality rows are dropped,
    /// so the basis may be smaller than the row count.
    pub basis: Vec<usize>,
    pub objective: f64,
    /// Basis changes over both phases.
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(BasicSolution),
    Infeasible { phase1_objective: f64, pivots: usize },
}

struct Problem<'a> {
    /// Column `j` of the constraint matrix (artificials included).
    cols: &'a [Vec<f64>],
    rows: &'a [usize],
    b: &'a [f64],
}

impl Problem<'_> {
    fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|&r| self.cols[j][r]).collect()
    }

    fn basis_lu(&self, basis: &[usize]) -> Result<DenseLu> {
        let cols: Vec<Vec<f64>> = basis.iter().map(|&j| self.column(j)).collect();
        DenseMatrix::from_columns(self.rows.len(), &cols)
            .lu()
            .map_err(|e| StencilError::Numerical(format!("basis factorisation: {e}")))
    }

    fn rhs(&self) -> Vec<f64> {
        self.rows.iter().map(|&r| self.b[r]).collect()
    }
}

/// Runs simplex iterations on columns `0..n_eligible` from the given basis.
fn optimize(
    p: &Problem,
    cost: &[f64],
    n_eligible: usize,
    basis: &mut [usize],
    pivots: &mut usize,
    limit: usize,
) -> Result<Vec<f64>> {
    loop {
        let lu = p.basis_lu(basis)?;
        let x_b = lu.solve(&p.rhs());
        let c_b: Vec<f64> = basis.iter().map(|&j| cost[j]).collect();
        let y = lu.solve_transpose(&c_b);
        let entering = (0..n_eligible).find(|j| {
            if basis.contains(j) {
                return false;
            }
            let col = p.column(*j);
            let reduced = cost[*j] - y.iter().zip(&col).map(|(a, b)| a * b).sum::<f64>();
            reduced < -COST_TOL
        });
        let Some(q) = entering else {
            return Ok(x_b);
        };
        let u = lu.solve(&p.column(q));
        let mut leave: Option<(f64, usize, usize)> = None;
        for (i, &ui) in u.iter().enumerate() {
            if ui > PIVOT_TOL {
                let ratio = x_b[i].max(0.0) / ui;
                let better = match leave {
                    None => true,
                    Some((best, _, idx)) => {
                        ratio < best - 1e-14 * best.abs().max(1.0)
                            || (ratio <= best + 1e-14 * best.abs().max(1.0) && basis[i] < idx)
                    }
                };
                if better {
                    leave = Some((ratio, i, basis[i]));
                }
            }
        }
        let Some((_, r, _)) = leave else {
            return Err(StencilError::Unbounded);
        };
        basis[r] = q;
        *pivots += 1;
        if *pivots > limit {
            return Err(StencilError::CycleLimit { limit });
        }
    }
}

/// Solves `min c.x  s.t.  A x = b, x >= 0`.
///
/// Infeasibility is declared when the phase-one optimum exceeds
/// `1e-9 * max(1, ||b||_inf)`. More than `50 (k + m)` pivots abort with
/// [`StencilError::CycleLimit`].
pub fn simplex_solve(a: &DenseMatrix, b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let (k, m) = (a.n_rows(), a.n_cols());
    if b.len() != k || c.len() != m {
        return Err(StencilError::DimensionMismatch(format!(
            "A is {k}x{m}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }
    if a.data().iter().chain(b).chain(c).any(|v| !v.is_finite()) {
        return Err(StencilError::Numerical("non-finite LP data".into()));
    }
    let limit = 50 * (k + m);
    let feas_tol = 1e-9 * norm_inf(b).max(1.0);

    // Phase one: rows sign-normalised so that b >= 0, artificial identity.
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let b1: Vec<f64> = b.iter().zip(&sign).map(|(v, s)| v * s).collect();
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..k).map(|i| sign[i] * a[(i, j)]).collect())
        .collect();
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        cols.push(e);
    }
    let mut rows: Vec<usize> = (0..k).collect();
    let mut basis: Vec<usize> = (m..m + k).collect();
    let mut cost1 = vec![0.0; m + k];
    cost1[m..].iter_mut().for_each(|v| *v = 1.0);
    let mut pivots = 0;

    let p = Problem {
        cols: &cols,
        rows: &rows,
        b: &b1,
    };
    let x_b = optimize(&p, &cost1, m + k, &mut basis, &mut pivots, limit)?;
    let phase1: f64 = basis
        .iter()
        .zip(&x_b)
        .filter(|(&j, _)| j >= m)
        .map(|(_, v)| v.max(0.0))
        .sum();
    if phase1 > feas_tol {
        return Ok(LpOutcome::Infeasible {
            phase1_objective: phase1,
            pivots,
        });
    }

    // Drive remaining (zero-valued) artificials out of the basis; a row
    // whose tableau entries all vanish is redundant and is dropped.
    let mut pos = 0;
    while pos < basis.len() {
        if basis[pos] < m {
            pos += 1;
            continue;
        }
        let p = Problem {
            cols: &cols,
            rows: &rows,
            b: &b1,
        };
        let lu = p.basis_lu(&basis)?;
        let mut e = vec![0.0; rows.len()];
        e[pos] = 1.0;
        // Row `pos` of B^-1 A is (B^-T e_pos) . a_j.
        let z = lu.solve_transpose(&e);
        let scale = (0..m)
            .map(|j| p.column(j).iter().fold(0.0f64, |s, v| s.max(v.abs())))
            .fold(0.0f64, f64::max)
            .max(1.0);
        let replacement = (0..m).find(|j| {
            !basis.contains(j)
                && p.column(*j)
                    .iter()
                    .zip(&z)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
                    > 1e-9 * scale
        });
        match replacement {
            Some(j) => {
                basis[pos] = j;
                pivots += 1;
                pos += 1;
            }
            None => {
                rows.remove(pos);
                basis.remove(pos);
            }
        }
    }

    // Phase two on the original columns.
    let p = Problem {
        cols: &cols,
        rows: &rows,
        b: &b1,
    };
    let x_b = optimize(&p, c, m, &mut basis, &mut pivots, limit)?;
    let mut x = vec![0.0; m];
    for (&j, &v) in basis.iter().zip(&x_b) {
        x[j] = if v < 0.0 { 0.0 } else { v };
    }
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    let mut sorted = basis.clone();
    sorted.sort_unstable();
    Ok(LpOutcome::Optimal(BasicSolution {
        x,
        basis: sorted,
        objective,
        pivots,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(o: LpOutcome) -> BasicSolution {
        match o {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn tiny_optimum() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -1.0]]);
        let s = optimal(simplex_solve(&a, &[1.0], &[1.0, 1.0]).unwrap());
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn tiny_infeasible() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]);
        assert!(matches!(
            simplex_solve(&a, &[-1.0], &[1.0, 1.0]).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn redundant_row_is_dropped() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]);
        let s = optimal(simplex_solve(&a, &[1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap());
        assert_eq!(s.x, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.basis.len(), 1);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 (slacks added).
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![3.0, 2.0, 0.0, 0.0, 1.0],
        ]);
        let s = optimal(simplex_solve(&a, &[4.0, 12.0, 18.0], &[-3.0, -5.0, 0.0, 0.0, 0.0]).unwrap());
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective + 36.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -1.0]]);
        assert_eq!(simplex_solve(&a, &[1.0], &[-1.0, -1.0]), Err(StencilError::Unbounded));
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -1.0]]);
        assert!(matches!(
            simplex_solve(&a, &[1.0, 2.0], &[1.0, 1.0]),
            Err(StencilError::DimensionMismatch(_))
        ));
    }
}
