use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CfSplitting, MultilevelError, Result};
use crate::krylov::{ilu0, Ilu0Factors, Preconditioner, SolveReport};
use crate::sparse::{norm2, CsrMatrix, DenseLu, DenseMatrix, SparseError};

/// Residual growth treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Approximation of `A_FF` inside the factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FineKind {
    /// `diag(A_FF)`.
    Jacobi,
    /// Lower triangle of `A_FF`.
    GaussSeidel,
    Ilu0,
    Exact,
}

/// Ordering of the fine relaxation and the coarse correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmliVariant {
    /// Three-factor inverse of the approximate factorization.
    Amli,
    /// Fine relaxation, then coarse correction.
    Mamli,
    /// Coarse correction, then fine relaxation.
    Rmamli,
    /// Fine, coarse, fine.
    Smamli,
}

impl AmliVariant {
    pub const ALL: [AmliVariant; 4] = [
        AmliVariant::Amli,
        AmliVariant::Mamli,
        AmliVariant::Rmamli,
        AmliVariant::Smamli,
    ];
}

#[derive(Debug, Clone)]
enum FineSolver {
    Diagonal(Vec<f64>),
    Lower(CsrMatrix),
    Ilu(Ilu0Factors),
    Exact(DenseLu),
}

impl FineSolver {
    fn build(ff: &CsrMatrix, kind: FineKind) -> Result<Self> {
        let singular = |msg: String| MultilevelError::SingularFineBlock(msg);
        Ok(match kind {
            FineKind::Jacobi => {
                let d = ff.diagonal();
                if let Some(i) = d.iter().position(|&v| v == 0.0) {
                    return Err(singular(format!("zero diagonal at fine index {i}")));
                }
                FineSolver::Diagonal(d.iter().map(|v| 1.0 / v).collect())
            }
            FineKind::GaussSeidel => {
                if let Some(i) = ff.diagonal().iter().position(|&v| v == 0.0) {
                    return Err(singular(format!("zero diagonal at fine index {i}")));
                }
                FineSolver::Lower(ff.lower_triangle())
            }
            FineKind::Ilu0 => FineSolver::Ilu(ilu0(ff).map_err(|e| singular(e.to_string()))?),
            FineKind::Exact => FineSolver::Exact(ff.to_dense().lu().map_err(|e| singular(e.to_string()))?),
        })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        match self {
            FineSolver::Diagonal(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            FineSolver::Lower(l) => {
                for i in 0..r.len() {
                    let (cols, vals) = l.row(i);
                    let mut s = r[i];
                    let mut d = 1.0;
                    for (&j, &v) in cols.iter().zip(vals) {
                        if j == i {
                            d = v;
                        } else {
                            s -= v * z[j];
                        }
                    }
                    z[i] = s / d;
                }
            }
            FineSolver::Ilu(f) => f.solve_into(r, z),
            FineSolver::Exact(lu) => z.copy_from_slice(&lu.solve(r)),
        }
    }
}

/// Two-grid operator `M` from the approximate block factorization
/// `[I 0; A_CF A~^-1 I] [A~ 0; 0 S~] [I A~^-1 A_FC; 0 I]` with
/// `S~ = A_CC - A_CF A~^-1 A_FC`.
#[derive(Debug, Clone)]
pub struct TwoGridOperator {
    a: CsrMatrix,
    split: CfSplitting,
    ff: CsrMatrix,
    fc: CsrMatrix,
    cf: CsrMatrix,
    cc: CsrMatrix,
    fine_kind: FineKind,
    variant: AmliVariant,
    fine: FineSolver,
    schur: DenseMatrix,
    schur_lu: DenseLu,
}

impl TwoGridOperator {
    pub fn new(a: &CsrMatrix, split: &CfSplitting, fine_kind: FineKind, variant: AmliVariant) -> Result<Self> {
        if !a.is_square() {
            return Err(MultilevelError::NotSquare);
        }
        if a.n_rows() != split.n() {
            return Err(MultilevelError::DimensionMismatch {
                expected: a.n_rows(),
                got: split.n(),
            });
        }
        let blocks = a.extract_blocks(split.fine(), split.coarse())?;
        let fine = FineSolver::build(&blocks.ff, fine_kind)?;
        let nf = split.fine().len();
        let nc = split.coarse().len();

        // Column c of S~ is A_CC e_c - A_CF A~^-1 (A_FC e_c).
        let fc_t = blocks.fc.transpose();
        let cc_t = blocks.cc.transpose();
        let columns: Vec<Vec<f64>> = (0..nc)
            .into_par_iter()
            .map(|c| {
                let mut rhs = vec![0.0; nf];
                let (cols, vals) = fc_t.row(c);
                for (&f, &v) in cols.iter().zip(vals) {
                    rhs[f] = v;
                }
                let mut y = vec![0.0; nf];
                fine.solve(&rhs, &mut y);
                let mut col = vec![0.0; nc];
                blocks.cf.mul_into(&y, &mut col);
                col.iter_mut().for_each(|v| *v = -*v);
                let (cols, vals) = cc_t.row(c);
                for (&r, &v) in cols.iter().zip(vals) {
                    col[r] += v;
                }
                col
            })
            .collect();
        let schur = DenseMatrix::from_columns(nc, &columns);
        let schur_lu = schur.lu().map_err(|e| MultilevelError::SingularSchur(e.to_string()))?;
        Ok(Self {
            a: a.clone(),
            split: split.clone(),
            ff: blocks.ff,
            fc: blocks.fc,
            cf: blocks.cf,
            cc: blocks.cc,
            fine_kind,
            variant,
            fine,
            schur,
            schur_lu,
        })
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn splitting(&self) -> &CfSplitting {
        &self.split
    }

    pub fn fine_kind(&self) -> FineKind {
        self.fine_kind
    }

    pub fn variant(&self) -> AmliVariant {
        self.variant
    }

    /// Same blocks and factors, different composition.
    pub fn with_variant(&self, variant: AmliVariant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn blocks(&self) -> (&CsrMatrix, &CsrMatrix, &CsrMatrix, &CsrMatrix) {
        (&self.ff, &self.fc, &self.cf, &self.cc)
    }

    /// The approximate Schur complement `S~`.
    pub fn schur(&self) -> &DenseMatrix {
        &self.schur
    }

    fn gather(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.split.fine().iter().map(|&i| v[i]).collect(),
            self.split.coarse().iter().map(|&i| v[i]).collect(),
        )
    }

    fn scatter(&self, vf: &[f64], vc: &[f64], out: &mut [f64]) {
        for (&i, &v) in self.split.fine().iter().zip(vf) {
            out[i] = v;
        }
        for (&i, &v) in self.split.coarse().iter().zip(vc) {
            out[i] = v;
        }
    }

    /// `z = B_F r` with `B_F = [A~^-1 0; 0 0]`.
    fn fine_relax(&self, r: &[f64], z: &mut [f64]) {
        let (rf, _) = self.gather(r);
        let mut zf = vec![0.0; rf.len()];
        self.fine.solve(&rf, &mut zf);
        let zc = vec![0.0; self.split.coarse().len()];
        self.scatter(&zf, &zc, z);
    }

    /// `z = (B_F + P_c S~^-1 R_c) r` when `with_fine`, otherwise the coarse
    /// correction `P_c S~^-1 R_c r` alone, where
    /// `P_c = [-A~^-1 A_FC; I]` and `R_c = [-A_CF A~^-1, I]`.
    fn factored(&self, r: &[f64], z: &mut [f64], with_fine: bool) {
        let (rf, rc) = self.gather(r);
        let nf = rf.len();
        let mut yf = vec![0.0; nf];
        self.fine.solve(&rf, &mut yf);
        let mut t = vec![0.0; rc.len()];
        self.cf.mul_into(&yf, &mut t);
        for (ti, ri) in t.iter_mut().zip(&rc) {
            *ti = ri - *ti;
        }
        let zc = self.schur_lu.solve(&t);
        let mut w = vec![0.0; nf];
        self.fc.mul_into(&zc, &mut w);
        let mut corr = vec![0.0; nf];
        self.fine.solve(&w, &mut corr);
        let zf: Vec<f64> = if with_fine {
            yf.iter().zip(&corr).map(|(y, c)| y - c).collect()
        } else {
            corr.iter().map(|c| -c).collect()
        };
        self.scatter(&zf, &zc, z);
    }

    /// `e <- e + step(r - A e)`.
    fn correct(&self, r: &[f64], e: &mut [f64], step: impl Fn(&[f64], &mut [f64])) {
        let res = self.a.residual(r, e);
        let mut d = vec![0.0; e.len()];
        step(&res, &mut d);
        e.iter_mut().zip(&d).for_each(|(ei, di)| *ei += di);
    }

    /// `z = M^-1 r` for the configured variant.
    pub fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        let fine = |r: &[f64], z: &mut [f64]| self.fine_relax(r, z);
        let coarse = |r: &[f64], z: &mut [f64]| self.factored(r, z, false);
        match self.variant {
            AmliVariant::Amli => self.factored(r, z, true),
            AmliVariant::Mamli => {
                z.fill(0.0);
                self.correct(r, z, fine);
                self.correct(r, z, coarse);
            }
            AmliVariant::Rmamli => {
                z.fill(0.0);
                self.correct(r, z, coarse);
                self.correct(r, z, fine);
            }
            AmliVariant::Smamli => {
                z.fill(0.0);
                self.correct(r, z, fine);
                self.correct(r, z, coarse);
                self.correct(r, z, fine);
            }
        }
    }

    fn unit_columns(&self, cap: usize, f: impl Fn(usize) -> Vec<f64> + Sync + Send) -> Result<DenseMatrix> {
        let n = self.n();
        if n > cap {
            return Err(SparseError::CapExceeded { n, cap }.into());
        }
        let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(f).collect();
        Ok(DenseMatrix::from_columns(n, &cols))
    }

    /// Dense `M^-1`.
    pub fn inverse_matrix(&self, cap: usize) -> Result<DenseMatrix> {
        self.unit_columns(cap, |j| {
            let mut e = vec![0.0; self.n()];
            e[j] = 1.0;
            let mut z = vec![0.0; self.n()];
            self.apply_inverse(&e, &mut z);
            z
        })
    }

    /// Dense error propagator `T = I - M^-1 A`.
    pub fn iteration_matrix(&self, cap: usize) -> Result<DenseMatrix> {
        let at = self.a.transpose();
        self.unit_columns(cap, |j| {
            let mut col = vec![0.0; self.n()];
            let (rows, vals) = at.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                col[i] = v;
            }
            let mut z = vec![0.0; self.n()];
            self.apply_inverse(&col, &mut z);
            z.iter_mut().for_each(|v| *v = -*v);
            z[j] += 1.0;
            z
        })
    }

    /// Dense residual propagator `I - A M^-1`, similar to `T`.
    pub fn residual_propagator(&self, cap: usize) -> Result<DenseMatrix> {
        self.unit_columns(cap, |j| {
            let mut e = vec![0.0; self.n()];
            e[j] = 1.0;
            let mut z = vec![0.0; self.n()];
            self.apply_inverse(&e, &mut z);
            let mut az = vec![0.0; self.n()];
            self.a.mul_into(&z, &mut az);
            az.iter_mut().for_each(|v| *v = -*v);
            az[j] += 1.0;
            az
        })
    }

    /// `M^-1 >= 0` and `M^-1 N = T >= 0` for the induced splitting
    /// `A = M - N`.
    pub fn is_weak_regular_first_type(&self, cap: usize) -> Result<bool> {
        let m_inv = self.inverse_matrix(cap)?;
        let t = self.iteration_matrix(cap)?;
        Ok(m_inv.min_entry() >= -super::NONNEG_TOL && t.min_entry() >= -super::NONNEG_TOL)
    }
}

impl Preconditioner for TwoGridOperator {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.apply_inverse(r, z);
    }
}

/// Stationary iteration `x <- x + M^-1 (b - A x)`, stopped when the relative
/// residual drops below `tol`, exceeds [`DIVERGENCE_BOUND`] or turns
/// non-finite.
pub fn amli_iterate(
    op: &TwoGridOperator,
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n_rows();
    for len in [b.len(), x0.len(), op.n()] {
        if len != n {
            return Err(MultilevelError::DimensionMismatch { expected: n, got: len });
        }
    }
    let start = Instant::now();
    let bnorm = match norm2(b) {
        v if v > 0.0 => v,
        _ => 1.0,
    };
    let mut x = x0.to_vec();
    let mut r = a.residual(b, &x);
    let mut history = vec![norm2(&r) / bnorm];
    let mut z = vec![0.0; n];
    let mut converged = history[0] <= tol;
    let mut diverged = false;
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        op.apply_inverse(&r, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
        r = a.residual(b, &x);
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        iterations += 1;
        if !rel.is_finite() || rel > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        converged = rel <= tol;
    }
    Ok((
        x,
        SolveReport {
            converged,
            iterations,
            residual_history: history,
            breakdown: None,
            diverged,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilevel::{default_coarsening, CfLabel};

    fn poisson_1d(n: usize, scale: f64) -> CsrMatrix {
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 2.0 * scale));
            if i > 0 {
                t.push((i, i - 1, -scale));
            }
            if i + 1 < n {
                t.push((i, i + 1, -scale));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn exact_two_by_two() {
        let a = poisson_1d(2, 1.0);
        let split = CfSplitting::from_labels(vec![CfLabel::Fine, CfLabel::Coarse]).unwrap();
        for kind in [FineKind::Exact, FineKind::Jacobi] {
            let op = TwoGridOperator::new(&a, &split, kind, AmliVariant::Amli).unwrap();
            assert!((op.schur()[(0, 0)] - 1.5).abs() < 1e-15);
            let t = op.iteration_matrix(600).unwrap();
            assert!(t.max_abs() < 1e-15);
            let m_inv = op.inverse_matrix(600).unwrap();
            let m = m_inv.inverse().unwrap();
            assert!(max_abs_diff(&m, &a.to_dense()) < 1e-12);
        }
    }

    #[test]
    fn exact_fine_solve_is_exact_for_every_variant() {
        let a = poisson_1d(9, 16.0);
        let split = default_coarsening(9).unwrap();
        for v in AmliVariant::ALL {
            let op = TwoGridOperator::new(&a, &split, FineKind::Exact, v).unwrap();
            assert!(op.iteration_matrix(600).unwrap().norm_inf() <= 1e-12, "{v:?}");
            let (_, rep) = amli_iterate(&op, &a, &[1.0; 9], &[0.0; 9], 1e-10, 5).unwrap();
            assert!(rep.converged && rep.iterations == 1);
        }
    }

    #[test]
    fn n4_jacobi_matches_block_formula() {
        let a = poisson_1d(4, 1.0);
        let split = CfSplitting::from_labels(vec![CfLabel::Fine, CfLabel::Fine, CfLabel::Coarse, CfLabel::Coarse])
            .unwrap();
        let op = TwoGridOperator::new(&a, &split, FineKind::Jacobi, AmliVariant::Amli).unwrap();

        // Independent dense assembly of
        // M^-1 = [A~^-1 + A~^-1 A_FC S~^-1 A_CF A~^-1, -A~^-1 A_FC S~^-1;
        //         -S~^-1 A_CF A~^-1,                   S~^-1].
        let d = a.to_dense();
        let sub = |r0: usize, c0: usize| {
            DenseMatrix::from_rows(&[vec![d[(r0, c0)], d[(r0, c0 + 1)]], vec![d[(r0 + 1, c0)], d[(r0 + 1, c0 + 1)]]])
        };
        let (afc, acf, acc) = (sub(0, 2), sub(2, 0), sub(2, 2));
        let at_inv = DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]);
        let s = acc.sub(&acf.matmul(&at_inv).matmul(&afc));
        let s_inv = s.inverse().unwrap();
        let x = at_inv.matmul(&afc).matmul(&s_inv);
        let y = s_inv.matmul(&acf).matmul(&at_inv);
        let b11 = {
            let t = x.matmul(&acf).matmul(&at_inv);
            let mut m = at_inv.clone();
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] += t[(i, j)];
                }
            }
            m
        };
        let mut m_inv = DenseMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                m_inv[(i, j)] = b11[(i, j)];
                m_inv[(i, j + 2)] = -x[(i, j)];
                m_inv[(i + 2, j)] = -y[(i, j)];
                m_inv[(i + 2, j + 2)] = s_inv[(i, j)];
            }
        }
        let t_oracle = DenseMatrix::identity(4).sub(&m_inv.matmul(&d));
        let t = op.iteration_matrix(600).unwrap();
        assert!(max_abs_diff(&t, &t_oracle) < 1e-12);
        assert!(t.min_entry() >= -1e-12);
        let rho = t.spectral_radius(600).unwrap();
        assert!(rho < 1.0);
        // Regression baseline.
        assert!((rho - 0.612_372_435_695_794_5).abs() < 1e-9, "{rho}");
    }

    #[test]
    fn multiplicative_forms_match_products() {
        let a = poisson_1d(8, 1.0);
        let split = default_coarsening(8).unwrap();
        let base = TwoGridOperator::new(&a, &split, FineKind::GaussSeidel, AmliVariant::Amli).unwrap();
        let n = 8;
        let ad = a.to_dense();
        let id = DenseMatrix::identity(n);

        let fine_only = {
            let mut bf = DenseMatrix::zeros(n, n);
            let ff_lower_inv = base.ff.lower_triangle().to_dense().inverse().unwrap();
            let f = split.fine();
            for (p, &i) in f.iter().enumerate() {
                for (q, &j) in f.iter().enumerate() {
                    bf[(i, j)] = ff_lower_inv[(p, q)];
                }
            }
            bf
        };
        let tf = id.sub(&fine_only.matmul(&ad));
        let amli_minv = base.inverse_matrix(600).unwrap();
        let coarse_minv = amli_minv.sub(&fine_only);
        let tc = id.sub(&coarse_minv.matmul(&ad));

        let cases = [
            (AmliVariant::Mamli, tc.matmul(&tf)),
            (AmliVariant::Rmamli, tf.matmul(&tc)),
            (AmliVariant::Smamli, tf.matmul(&tc).matmul(&tf)),
        ];
        for (v, want) in cases {
            let t = base.with_variant(v).iteration_matrix(600).unwrap();
            assert!(max_abs_diff(&t, &want) < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn variant_ordering_on_poisson() {
        let a = poisson_1d(20, 1.0);
        let split = default_coarsening(20).unwrap();
        for kind in [FineKind::Jacobi, FineKind::GaussSeidel, FineKind::Ilu0] {
            let base = TwoGridOperator::new(&a, &split, kind, AmliVariant::Amli).unwrap();
            let rho = |v| {
                base.with_variant(v)
                    .iteration_matrix(600)
                    .unwrap()
                    .spectral_radius(600)
                    .unwrap()
            };
            let (r_a, r_m, r_r, r_s) = (
                rho(AmliVariant::Amli),
                rho(AmliVariant::Mamli),
                rho(AmliVariant::Rmamli),
                rho(AmliVariant::Smamli),
            );
            assert!(r_a < 1.0, "{kind:?}");
            assert!(r_s <= r_m + 1e-10 && r_m <= r_a + 1e-10, "{kind:?}: {r_s} {r_m} {r_a}");
            assert!((r_m - r_r).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_iteration_converges_monotonically() {
        let a = poisson_1d(30, 1.0);
        let labels = (0..30)
            .map(|i| if i % 2 == 0 { CfLabel::Coarse } else { CfLabel::Fine })
            .collect();
        let split = CfSplitting::from_labels(labels).unwrap();
        let op = TwoGridOperator::new(&a, &split, FineKind::GaussSeidel, AmliVariant::Mamli).unwrap();
        let b = vec![1.0; 30];
        let (x, rep) = amli_iterate(&op, &a, &b, &vec![0.0; 30], 1e-10, 500).unwrap();
        assert!(rep.converged);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(norm2(&a.residual(&b, &x)) <= 1e-10 * norm2(&b) * 1.0001);
    }

    #[test]
    fn divergence_is_reported() {
        // Fine block [[1, 4], [4, 1]] with a unit Jacobi approximation: the
        // fine part of T has eigenvalues -4 and 4.
        let a = CsrMatrix::from_dense(
            &DenseMatrix::from_rows(&[vec![1.0, 4.0, 0.0], vec![4.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
            0.0,
        );
        let split = CfSplitting::from_labels(vec![CfLabel::Fine, CfLabel::Fine, CfLabel::Coarse]).unwrap();
        let op = TwoGridOperator::new(&a, &split, FineKind::Jacobi, AmliVariant::Amli).unwrap();
        let (_, rep) = amli_iterate(&op, &a, &[1.0; 3], &[0.0; 3], 1e-10, 1000).unwrap();
        assert!(rep.diverged && !rep.converged);
    }

    #[test]
    fn singular_blocks_are_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let split = CfSplitting::from_labels(vec![CfLabel::Fine, CfLabel::Coarse]).unwrap();
        assert!(matches!(
            TwoGridOperator::new(&a, &split, FineKind::Jacobi, AmliVariant::Amli),
            Err(MultilevelError::SingularFineBlock(_))
        ));
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]), 0.0);
        assert!(matches!(
            TwoGridOperator::new(&a, &split, FineKind::Exact, AmliVariant::Amli),
            Err(MultilevelError::SingularSchur(_))
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let a = poisson_1d(12, 1.0);
        let op = TwoGridOperator::new(&a, &default_coarsening(12).unwrap(), FineKind::Jacobi, AmliVariant::Amli)
            .unwrap();
        assert!(matches!(
            op.iteration_matrix(10),
            Err(MultilevelError::Sparse(SparseError::CapExceeded { n: 12, cap: 10 }))
        ));
    }
}
