use serde::{Deserialize, Serialize};

use super::coarsening::ruge_stueben_masked;
use super::{strong_connections, CfSplitting, MultilevelError, Result, DEFAULT_THETA};
use crate::krylov::Preconditioner;
use crate::sparse::{CsrMatrix, DenseLu};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoother {
    /// Forward Gauss-Seidel.
    GaussSeidel,
    /// Damped Jacobi.
    Jacobi { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cycle {
    V,
    F,
}

/// How restriction weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    /// Direct interpolation of `A^T` on the same splitting, transposed.
    TransposeProblem,
    /// `R = P^T`.
    Transpose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmgConfig {
    pub theta: f64,
    pub smoother: Smoother,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Levels at or below this size are solved directly.
    pub coarsest_cap: usize,
    pub cycle: Cycle,
    pub restriction: Restriction,
    pub max_levels: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            smoother: Smoother::GaussSeidel,
            pre_sweeps: 1,
            post_sweeps: 1,
            coarsest_cap: 40,
            cycle: Cycle::V,
            restriction: Restriction::Transpose,
            max_levels: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmgLevel {
    pub a: CsrMatrix,
    pub split: CfSplitting,
    /// Interpolation, `n x n_c`.
    pub p: CsrMatrix,
    /// Restriction, `n_c x n`.
    pub r: CsrMatrix,
    diag: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarsest: CsrMatrix,
    coarsest_lu: DenseLu,
    config: AmgConfig,
    stagnated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub nnz: usize,
}

/// Hierarchy statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmgSummary {
    pub levels: Vec<LevelSummary>,
    /// `sum nnz(level) / nnz(A)`.
    pub operator_complexity: f64,
    /// `sum n(level) / n(A)`.
    pub grid_complexity: f64,
    /// Coarsening stopped because it no longer reduced the size.
    pub stagnated: bool,
    pub config: AmgConfig,
}

impl AmgSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

/// Direct interpolation from strong coarse neighbours. For fine point `i`
/// with interpolatory set `P_i`, negative and positive couplings are
/// distributed separately:
/// `w_ij = -alpha a_ij / a~_ii` (negative `a_ij`), `alpha = sum_k a_ik^- /
/// sum_{P_i} a_ik^-`, likewise `beta` for positive entries; positive
/// couplings without a positive interpolatory partner are lumped onto the
/// diagonal. Decoupled points interpolate nothing and are ignored as
/// neighbours: smoothing leaves no error there.
fn direct_interpolation(
    a: &CsrMatrix,
    split: &CfSplitting,
    strong: &[Vec<usize>],
    decoupled: &[bool],
) -> Result<CsrMatrix> {
    let n = a.n_rows();
    let mut cindex = vec![usize::MAX; n];
    for (k, &c) in split.coarse().iter().enumerate() {
        cindex[c] = k;
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        if split.is_coarse(i) {
            rows.push(vec![(cindex[i], 1.0)]);
            continue;
        }
        if decoupled[i] {
            rows.push(vec![]);
            continue;
        }
        let (cols, vals) = a.row(i);
        let strong_c: Vec<usize> = strong[i].iter().copied().filter(|&j| split.is_coarse(j)).collect();
        // Fall back to every coarse neighbour when none is strong.
        let interp: Vec<usize> = if strong_c.is_empty() {
            cols.iter().copied().filter(|&j| j != i && split.is_coarse(j)).collect()
        } else {
            strong_c
        };
        let mut diag = 0.0;
        let (mut neg_all, mut pos_all, mut neg_p, mut pos_p) = (0.0, 0.0, 0.0, 0.0);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
                continue;
            }
            if decoupled[j] {
                continue;
            }
            let in_p = interp.binary_search(&j).is_ok();
            if v < 0.0 {
                neg_all += v;
                if in_p {
                    neg_p += v;
                }
            } else {
                pos_all += v;
                if in_p {
                    pos_p += v;
                }
            }
        }
        if pos_p == 0.0 {
            diag += pos_all;
        }
        if diag == 0.0 {
            return Err(MultilevelError::SingularFineBlock(format!("zero diagonal at row {i}")));
        }
        let alpha = if neg_p != 0.0 { neg_all / neg_p } else { 0.0 };
        let beta = if pos_p != 0.0 { pos_all / pos_p } else { 0.0 };
        let mut row = Vec::with_capacity(interp.len());
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i || interp.binary_search(&j).is_err() {
                continue;
            }
            let w = if v < 0.0 { -alpha * v / diag } else { -beta * v / diag };
            row.push((cindex[j], w));
        }
        rows.push(row);
    }
    Ok(CsrMatrix::from_rows(split.coarse().len(), rows)?)
}

/// Rows without nonzero off-diagonals (e.g. Dirichlet identity rows). Their
/// scale is unrelated to the rest of the operator, so they are kept out of
/// the coarse spaces.
fn decoupled_rows(a: &CsrMatrix) -> Vec<bool> {
    (0..a.n_rows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| j == i || v == 0.0)
        })
        .collect()
}

fn smooth(a: &CsrMatrix, diag: &[f64], smoother: Smoother, b: &[f64], x: &mut [f64], sweeps: usize) {
    for _ in 0..sweeps {
        match smoother {
            Smoother::GaussSeidel => crate::krylov::gauss_seidel_sweep(a, diag, b, x),
            Smoother::Jacobi { omega } => {
                let r = a.residual(b, x);
                for i in 0..x.len() {
                    x[i] += omega * r[i] / diag[i];
                }
            }
        }
    }
}

impl AmgHierarchy {
    pub fn build(a: &CsrMatrix, config: AmgConfig) -> Result<Self> {
        if !a.is_square() {
            return Err(MultilevelError::NotSquare);
        }
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut big_steps = 0;
        let mut stagnated = false;
        while current.n_rows() > config.coarsest_cap && levels.len() + 1 < config.max_levels {
            let n = current.n_rows();
            let decoupled = decoupled_rows(&current);
            let split = ruge_stueben_masked(&current, config.theta, &decoupled)?;
            if split.fell_back() {
                stagnated = true;
                break;
            }
            let strong = strong_connections(&current, config.theta);
            let p = direct_interpolation(&current, &split, &strong, &decoupled)?;
            let r = match config.restriction {
                Restriction::Transpose => p.transpose(),
                Restriction::TransposeProblem => {
                    let at = current.transpose();
                    let strong_t = strong_connections(&at, config.theta);
                    direct_interpolation(&at, &split, &strong_t, &decoupled)?.transpose()
                }
            };
            let coarse = r.matmul(&current.matmul(&p)?)?;
            let nc = coarse.n_rows();
            big_steps = if nc as f64 > 0.9 * n as f64 { big_steps + 1 } else { 0 };
            let diag = current.diagonal();
            if let Some(i) = diag.iter().position(|&d| d == 0.0) {
                return Err(MultilevelError::SingularFineBlock(format!(
                    "zero diagonal at row {i} of level {}",
                    levels.len()
                )));
            }
            levels.push(AmgLevel {
                a: current,
                split,
                p,
                r,
                diag,
            });
            current = coarse;
            if big_steps >= 2 {
                stagnated = true;
                break;
            }
        }
        let coarsest_lu = current
            .to_dense()
            .lu()
            .map_err(|e| MultilevelError::SingularSchur(format!("coarsest level: {e}")))?;
        Ok(Self {
            levels,
            coarsest: current,
            coarsest_lu,
            config,
            stagnated,
        })
    }

    /// Number of levels including the coarsest.
    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    pub fn coarsest(&self) -> &CsrMatrix {
        &self.coarsest
    }

    pub fn config(&self) -> &AmgConfig {
        &self.config
    }

    pub fn stagnated(&self) -> bool {
        self.stagnated
    }

    pub fn summary(&self) -> AmgSummary {
        let mut levels: Vec<LevelSummary> = self
            .levels
            .iter()
            .map(|l| LevelSummary {
                n: l.a.n_rows(),
                nnz: l.a.nnz(),
            })
            .collect();
        levels.push(LevelSummary {
            n: self.coarsest.n_rows(),
            nnz: self.coarsest.nnz(),
        });
        let (n0, nnz0) = (levels[0].n.max(1) as f64, levels[0].nnz.max(1) as f64);
        AmgSummary {
            operator_complexity: levels.iter().map(|l| l.nnz as f64).sum::<f64>() / nnz0,
            grid_complexity: levels.iter().map(|l| l.n as f64).sum::<f64>() / n0,
            levels,
            stagnated: self.stagnated,
            config: self.config,
        }
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64], cycle: Cycle) {
        if level == self.levels.len() {
            x.copy_from_slice(&self.coarsest_lu.solve(b));
            return;
        }
        let l = &self.levels[level];
        let cfg = &self.config;
        smooth(&l.a, &l.diag, cfg.smoother, b, x, cfg.pre_sweeps);
        let res = l.a.residual(b, x);
        let nc = l.r.n_rows();
        let mut bc = vec![0.0; nc];
        l.r.mul_into(&res, &mut bc);
        let mut xc = vec![0.0; nc];
        match cycle {
            Cycle::V => self.cycle(level + 1, &bc, &mut xc, Cycle::V),
            Cycle::F => {
                self.cycle(level + 1, &bc, &mut xc, Cycle::F);
                self.cycle(level + 1, &bc, &mut xc, Cycle::V);
            }
        }
        let mut corr = vec![0.0; x.len()];
        l.p.mul_into(&xc, &mut corr);
        x.iter_mut().zip(&corr).for_each(|(xi, ci)| *xi += ci);
        smooth(&l.a, &l.diag, cfg.smoother, b, x, cfg.post_sweeps);
    }

    /// One cycle from a zero initial guess.
    pub fn apply_cycle(&self, b: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        self.cycle(0, b, x, self.config.cycle);
    }
}

impl Preconditioner for AmgHierarchy {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.apply_cycle(r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{bicgstab, BicgstabOptions};
    use crate::sparse::{norm2, DenseMatrix};

    fn poisson_1d(n: usize) -> CsrMatrix {
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn one_d_poisson_hierarchy_and_solve() {
        let n = 63;
        let a = poisson_1d(n);
        let h = AmgHierarchy::build(&a, AmgConfig::default()).unwrap();
        assert!(h.n_levels() >= 2);
        let sizes: Vec<usize> = h.summary().levels.iter().map(|l| l.n).collect();
        assert_eq!(sizes[0], 63);
        assert!(*sizes.last().unwrap() <= 40);
        let b = vec![1.0; n];
        let opts = BicgstabOptions::default();
        let (x, rep) = bicgstab(&a, &b, Some(&h), &opts).unwrap();
        assert!(rep.converged, "{:?}", rep.residual_history);
        assert!(rep.iterations <= 10, "{}", rep.iterations);
        assert!(norm2(&a.residual(&b, &x)) <= 1e-9 * norm2(&b));
    }

    #[test]
    fn small_cap_gives_three_levels() {
        let a = poisson_1d(63);
        let cfg = AmgConfig {
            coarsest_cap: 10,
            ..AmgConfig::default()
        };
        let h = AmgHierarchy::build(&a, cfg).unwrap();
        assert!(h.n_levels() >= 3, "{:?}", h.summary());
        let (_, rep) = bicgstab(&a, &vec![1.0; 63], Some(&h), &BicgstabOptions::default()).unwrap();
        assert!(rep.converged && rep.iterations <= 10, "{}", rep.iterations);
    }

    #[test]
    fn tiny_problem_is_a_direct_solve() {
        let a = poisson_1d(20);
        let h = AmgHierarchy::build(&a, AmgConfig::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut x = vec![0.0; 20];
        h.apply_cycle(&b, &mut x);
        assert!(norm2(&a.residual(&b, &x)) < 1e-12 * norm2(&b));
    }

    #[test]
    fn galerkin_property() {
        let a = poisson_1d(60);
        let h = AmgHierarchy::build(
            &a,
            AmgConfig {
                coarsest_cap: 5,
                ..AmgConfig::default()
            },
        )
        .unwrap();
        let l0 = &h.levels()[0];
        let rap = l0.r.to_dense().matmul(&l0.a.to_dense()).matmul(&l0.p.to_dense());
        let next = if h.levels().len() > 1 {
            h.levels()[1].a.to_dense()
        } else {
            h.coarsest().to_dense()
        };
        assert!(rap.sub(&next).max_abs() <= 1e-12 * rap.max_abs());
    }

    #[test]
    fn interpolation_preserves_constants_for_zero_row_sums() {
        // Interior rows have zero sum, so interpolated constants stay
        // constant there.
        let a = poisson_1d(30);
        let h = AmgHierarchy::build(
            &a,
            AmgConfig {
                coarsest_cap: 5,
                ..AmgConfig::default()
            },
        )
        .unwrap();
        let l0 = &h.levels()[0];
        let ones = vec![1.0; l0.p.n_cols()];
        let pc = l0.p.spmv(&ones).unwrap();
        for (i, v) in pc.iter().enumerate().skip(1).take(28) {
            assert!((v - 1.0).abs() < 1e-14, "row {i}: {v}");
        }
    }

    #[test]
    fn nonsymmetric_restriction_differs_from_transpose() {
        let n = 50;
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -2.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let cfg = AmgConfig {
            coarsest_cap: 5,
            restriction: Restriction::TransposeProblem,
            ..AmgConfig::default()
        };
        let h = AmgHierarchy::build(&a, cfg).unwrap();
        let l0 = &h.levels()[0];
        assert_ne!(l0.r, l0.p.transpose());
        let (_, rep) = bicgstab(&a, &vec![1.0; n], Some(&h), &BicgstabOptions::default()).unwrap();
        assert!(rep.converged);
        let h2 = AmgHierarchy::build(
            &a,
            AmgConfig {
                restriction: Restriction::Transpose,
                cycle: Cycle::F,
                ..cfg
            },
        )
        .unwrap();
        let (_, rep2) = bicgstab(&a, &vec![1.0; n], Some(&h2), &BicgstabOptions::default()).unwrap();
        assert!(rep2.converged);
    }

    #[test]
    fn diagonal_matrix_stops_coarsening() {
        let a = CsrMatrix::from_dense(&DenseMatrix::identity(50), 0.0);
        let h = AmgHierarchy::build(&a, AmgConfig::default()).unwrap();
        assert!(h.stagnated());
        assert_eq!(h.n_levels(), 1);
    }

    #[test]
    fn summary_json() {
        let a = poisson_1d(100);
        let s = AmgHierarchy::build(&a, AmgConfig::default()).unwrap().summary();
        assert!(s.operator_complexity > 1.0 && s.operator_complexity < 3.0);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["levels"][0]["n"], 100);
    }

    #[test]
    fn identity_rows_stay_out_of_coarse_spaces() {
        // 1d Poisson scaled by n^2 with identity rows at both ends.
        let n = 101;
        let s = (n * n) as f64;
        let mut t = vec![(0, 0, 1.0), (n - 1, n - 1, 1.0)];
        for i in 1..n - 1 {
            t.extend([(i, i, 2.0 * s), (i, i - 1, -s), (i, i + 1, -s)]);
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let h = AmgHierarchy::build(
            &a,
            AmgConfig {
                coarsest_cap: 10,
                ..AmgConfig::default()
            },
        )
        .unwrap();
        let l0 = &h.levels()[0];
        assert!(!l0.split.is_coarse(0) && !l0.split.is_coarse(n - 1));
        assert_eq!(l0.p.row(0).0.len(), 0);
        // Stationary cycles contract by a fixed factor.
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let mut res = vec![];
        for _ in 0..8 {
            let r = a.residual(&b, &x);
            let mut z = vec![0.0; n];
            h.apply_cycle(&r, &mut z);
            x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
            res.push(norm2(&a.residual(&b, &x)));
        }
        let rate = (res[7] / res[0]).powf(1.0 / 7.0);
        assert!(rate < 0.3, "{res:?}");
    }
}
