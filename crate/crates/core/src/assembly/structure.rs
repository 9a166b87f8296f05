use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LinearSystem, Result};
use crate::geometry::PointKind;
use crate::krylov::{bicgstab, ilu0, BicgstabOptions, KrylovError, Preconditioner};
use crate::sparse::{norm_inf, CsrMatrix, DEFAULT_ORACLE_CAP};

/// Relative tolerance for sign and dominance predicates.
const PREDICATE_TOL: f64 = 1e-12;
/// Entrywise lower bound accepted for a nonnegative inverse.
const INVERSE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleOutcome {
    True,
    False,
    NotRun,
}

impl OracleOutcome {
    fn from_bool(b: bool) -> Self {
        if b {
            OracleOutcome::True
        } else {
            OracleOutcome::False
        }
    }

    pub fn is_true(self) -> bool {
        self == OracleOutcome::True
    }
}

/// Sign, dominance and connectivity predicates of a system matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub n: usize,
    pub is_z: bool,
    pub is_l: bool,
    pub weakly_dd: bool,
    pub strictly_dd_rows: Vec<usize>,
    pub essentially_irreducible: bool,
    pub essentially_dd: bool,
    pub m_matrix_by_sufficient_condition: bool,
    pub m_matrix_by_oracle: OracleOutcome,
    pub inverse_positive_by_oracle: OracleOutcome,
    /// Why the oracle did not run, if it was requested.
    pub oracle_note: Option<String>,
    /// The certificates contradict each other.
    pub inconsistent: bool,
    /// Rows with a positive off-diagonal entry.
    pub positive_offdiagonal_rows: Vec<usize>,
    /// Rows whose diagonal is not positive.
    pub nonpositive_diagonal_rows: Vec<usize>,
    pub not_weakly_dd_rows: Vec<usize>,
    /// Rows with no path to a Dirichlet row.
    pub unconnected_to_dirichlet: Vec<usize>,
    /// Rows with no path to a strictly dominant row.
    pub unconnected_to_strict: Vec<usize>,
}

impl StructureReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Rows from which some row in `targets` is reachable along
/// `i -> j` whenever `a_ij != 0`; found by a search on the transpose.
fn reaching(at: &CsrMatrix, targets: &[usize]) -> Vec<bool> {
    let n = at.n_rows();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &t in targets {
        if !seen[t] {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(j) = queue.pop_front() {
        for &i in at.row(j).0 {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Certificates for an assembled system; Dirichlet rows come from the
/// point classification.
pub fn structure_report(sys: &LinearSystem, run_oracles: bool) -> StructureReport {
    let dirichlet: Vec<usize> = (0..sys.n()).filter(|&i| sys.kinds[i] == PointKind::Dirichlet).collect();
    structure_report_for(&sys.a, Some(&dirichlet), run_oracles, DEFAULT_ORACLE_CAP)
}

/// Certificates for a bare matrix. Without `dirichlet_rows`, rows whose only
/// entry is the diagonal are taken as Dirichlet rows.
pub fn structure_report_for(
    a: &CsrMatrix,
    dirichlet_rows: Option<&[usize]>,
    run_oracles: bool,
    cap: usize,
) -> StructureReport {
    let n = a.n_rows();
    let mut rep = StructureReport {
        n,
        is_z: true,
        is_l: true,
        weakly_dd: true,
        strictly_dd_rows: vec![],
        essentially_irreducible: false,
        essentially_dd: false,
        m_matrix_by_sufficient_condition: false,
        m_matrix_by_oracle: OracleOutcome::NotRun,
        inverse_positive_by_oracle: OracleOutcome::NotRun,
        oracle_note: None,
        inconsistent: false,
        positive_offdiagonal_rows: vec![],
        nonpositive_diagonal_rows: vec![],
        not_weakly_dd_rows: vec![],
        unconnected_to_dirichlet: vec![],
        unconnected_to_strict: vec![],
    };
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = PREDICATE_TOL * scale;
        let mut diag = 0.0;
        let mut off_sum = 0.0;
        let mut positive_off = false;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                off_sum += v.abs();
                if v > tol {
                    positive_off = true;
                }
            }
        }
        if positive_off {
            rep.positive_offdiagonal_rows.push(i);
        }
        if !(diag > tol) {
            rep.nonpositive_diagonal_rows.push(i);
        }
        let dd_tol = PREDICATE_TOL * (diag.abs() + off_sum);
        if diag.abs() < off_sum - dd_tol {
            rep.not_weakly_dd_rows.push(i);
        } else if diag.abs() > off_sum + dd_tol {
            rep.strictly_dd_rows.push(i);
        }
    }
    rep.is_z = rep.positive_offdiagonal_rows.is_empty();
    rep.is_l = rep.is_z && rep.nonpositive_diagonal_rows.is_empty();
    rep.weakly_dd = rep.not_weakly_dd_rows.is_empty();

    let at = a.transpose();
    let inferred: Vec<usize>;
    let dirichlet = match dirichlet_rows {
        Some(d) => d,
        None => {
            inferred = (0..n)
                .filter(|&i| {
                    let (cols, _) = a.row(i);
                    cols == [i]
                })
                .collect();
            &inferred
        }
    };
    let to_dirichlet = reaching(&at, dirichlet);
    rep.unconnected_to_dirichlet = (0..n).filter(|&i| !to_dirichlet[i]).collect();
    rep.essentially_irreducible = rep.unconnected_to_dirichlet.is_empty();
    let to_strict = reaching(&at, &rep.strictly_dd_rows);
    rep.unconnected_to_strict = (0..n).filter(|&i| !to_strict[i]).collect();
    rep.essentially_dd = rep.weakly_dd && rep.unconnected_to_strict.is_empty();
    rep.m_matrix_by_sufficient_condition = rep.is_l && rep.essentially_dd;

    if run_oracles {
        if n > cap {
            rep.oracle_note = Some(format!("n = {n} exceeds oracle cap {cap}"));
        } else {
            match a.to_dense().inverse() {
                Ok(inv) => {
                    let bound = -INVERSE_TOL * inv.max_abs().max(1.0);
                    let positive = inv.min_entry() >= bound;
                    rep.inverse_positive_by_oracle = OracleOutcome::from_bool(positive);
                    rep.m_matrix_by_oracle = OracleOutcome::from_bool(positive && rep.is_z);
                }
                Err(e) => {
                    rep.oracle_note = Some(format!("inverse failed: {e}"));
                    rep.inverse_positive_by_oracle = OracleOutcome::False;
                    rep.m_matrix_by_oracle = OracleOutcome::False;
                }
            }
        }
    }
    rep.inconsistent = (rep.m_matrix_by_oracle.is_true() && !rep.is_z)
        || (rep.m_matrix_by_sufficient_condition && rep.m_matrix_by_oracle == OracleOutcome::False);
    rep
}

/// Solves `A x = y` for `trials` random `y <= 0` and checks
/// `x <= 1e-9 ||x||_inf` each time.
pub fn discrete_max_principle_check(a: &CsrMatrix, trials: usize, seed: u64) -> Result<bool> {
    let n = a.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    enum Solver {
        Dense(crate::sparse::DenseLu),
        Iterative(crate::krylov::Ilu0Factors),
    }
    let solver = if n <= DEFAULT_ORACLE_CAP {
        Solver::Dense(a.to_dense().lu()?)
    } else {
        Solver::Iterative(ilu0(a)?)
    };
    for _ in 0..trials {
        let y: Vec<f64> = (0..n).map(|_| -rng.random::<f64>()).collect();
        let x = match &solver {
            Solver::Dense(lu) => lu.solve(&y),
            Solver::Iterative(ilu) => {
                let opts = BicgstabOptions {
                    tol: 1e-12,
                    max_iter: 5000,
                    seed,
                };
                let (x, rep) = bicgstab(a, &y, Some(ilu as &dyn Preconditioner), &opts)?;
                if !rep.converged {
                    return Err(KrylovError::InvalidArgument(format!(
                        "solve did not converge (relres {:e})",
                        rep.final_relres()
                    ))
                    .into());
                }
                x
            }
        };
        let bound = 1e-9 * norm_inf(&x);
        if x.iter().any(|&v| v > bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DenseMatrix;

    fn poisson_with_dirichlet(n: usize) -> CsrMatrix {
        let mut t = vec![(0, 0, 1.0), (n - 1, n - 1, 1.0)];
        for i in 1..n - 1 {
            t.extend([(i, i - 1, -16.0), (i, i, 32.0), (i, i + 1, -16.0)]);
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn one_d_poisson_certificates() {
        let a = poisson_with_dirichlet(9);
        let rep = structure_report_for(&a, None, true, 600);
        assert!(rep.is_l && rep.essentially_irreducible && rep.essentially_dd);
        assert!(rep.m_matrix_by_sufficient_condition);
        assert_eq!(rep.m_matrix_by_oracle, OracleOutcome::True);
        assert_eq!(rep.strictly_dd_rows, vec![0, 8]);
        assert!(!rep.inconsistent);
    }

    #[test]
    fn oracle_beats_sufficient_condition() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![1.0, -3.0], vec![0.0, 1.0]]), 0.0);
        let rep = structure_report_for(&a, None, true, 600);
        assert!(rep.is_z && !rep.weakly_dd);
        assert!(!rep.m_matrix_by_sufficient_condition);
        assert_eq!(rep.m_matrix_by_oracle, OracleOutcome::True);
    }

    #[test]
    fn positive_offdiagonal_is_flagged() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]), 0.0);
        let rep = structure_report_for(&a, None, true, 600);
        assert!(!rep.is_z);
        assert_eq!(rep.positive_offdiagonal_rows, vec![0]);
        assert_eq!(rep.m_matrix_by_oracle, OracleOutcome::False);
        assert_eq!(rep.inverse_positive_by_oracle, OracleOutcome::False);
    }

    #[test]
    fn floating_block_is_not_irreducible() {
        // Rows 2 and 3 only see each other.
        let a = CsrMatrix::from_dense(
            &DenseMatrix::from_rows(&[
                vec![1.0, 0.0, 0.0, 0.0],
                vec![-1.0, 2.0, 0.0, -1.0],
                vec![0.0, 0.0, 1.0, -1.0],
                vec![0.0, 0.0, -1.0, 1.0],
            ]),
            0.0,
        );
        let rep = structure_report_for(&a, None, false, 600);
        assert_eq!(rep.unconnected_to_dirichlet, vec![2, 3]);
        assert!(!rep.essentially_irreducible && !rep.essentially_dd);
        assert_eq!(rep.m_matrix_by_oracle, OracleOutcome::NotRun);
    }

    #[test]
    fn cap_skips_oracle() {
        let a = poisson_with_dirichlet(20);
        let rep = structure_report_for(&a, None, true, 10);
        assert_eq!(rep.m_matrix_by_oracle, OracleOutcome::NotRun);
        assert!(rep.oracle_note.is_some());
        assert!(rep.m_matrix_by_sufficient_condition);
    }

    #[test]
    fn max_principle_on_poisson() {
        let a = poisson_with_dirichlet(30);
        assert!(discrete_max_principle_check(&a, 20, 1).unwrap());
        let x = a.to_dense().lu().unwrap().solve(&vec![-1.0; 30]);
        assert!(x[1..29].iter().all(|&v| v < 0.0));
    }

    #[test]
    fn non_z_example_arithmetic() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let x = a.lu().unwrap().solve(&[-2.0, -1.0]);
        assert_eq!(x, vec![0.0, -1.0]);
    }
}
