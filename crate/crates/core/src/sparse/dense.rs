use std::ops::{Index, IndexMut};

use nalgebra::{linalg::Schur, DMatrix};

use super::{Result, SparseError};

/// Row-major dense matrix used for oracles and coarsest-level solves.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "data length mismatch");
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    /// Builds a matrix column by column.
    pub fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(n_rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch");
        let mut c = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let ci = &mut c.data[i * other.n_cols..(i + 1) * other.n_cols];
            for k in 0..self.n_cols {
                let a = self.data[i * self.n_cols + k];
                if a == 0.0 {
                    continue;
                }
                for (cij, bkj) in ci.iter_mut().zip(other.row(k)) {
                    *cij += a * bkj;
                }
            }
        }
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.n_cols, x.len(), "dimension mismatch");
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest entry (`+inf` for an empty matrix).
    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// LU factorization with partial pivoting. Fails when a pivot falls below
    /// `1e-14 * ||A||_inf`.
    pub fn lu(&self) -> Result<DenseLu> {
        assert_eq!(self.n_rows, self.n_cols, "LU of a non-square matrix");
        let n = self.n_rows;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = 1e-14 * self.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= tiny {
                return Err(SparseError::Singular {
                    step: k,
                    pivot: pmax,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for i in (k + 1)..n {
                let row_i = &mut tail[(i - k - 1) * n..(i - k) * n];
                let l = row_i[k] / pivot;
                row_i[k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        row_i[j] -= l * row_k[j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let lu = self.lu()?;
        let n = self.n_rows;
        let mut inv = Self::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let x = lu.solve(&e);
            for i in 0..n {
                inv[(i, j)] = x[i];
            }
        }
        Ok(inv)
    }

    /// Spectral radius `max |lambda|` via a real Schur decomposition
    /// (Hessenberg reduction + shifted QR). Matrices larger than `cap` are
    /// refused.
    pub fn spectral_radius(&self, cap: usize) -> Result<f64> {
        assert_eq!(self.n_rows, self.n_cols, "spectral radius of a non-square matrix");
        let n = self.n_rows;
        if n > cap {
            return Err(SparseError::CapExceeded { n, cap });
        }
        if n == 0 {
            return Ok(0.0);
        }
        let m = DMatrix::from_row_slice(n, n, &self.data);
        match Schur::try_new(m, f64::EPSILON, 1000 * n.max(10)) {
            Some(schur) => Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)),
            None if self.min_entry() >= 0.0 => self.perron_root(),
            None => Err(SparseError::EigenNoConvergence),
        }
    }

    /// Power iteration for entrywise nonnegative matrices; the Perron root is
    /// the spectral radius.
    fn perron_root(&self) -> Result<f64> {
        let n = self.n_rows;
        // Shift by I to avoid oscillation on periodic matrices.
        let mut x = vec![1.0 / n as f64; n];
        let mut lambda = 0.0;
        for _ in 0..200_000 {
            let mut y = self.matvec(&x);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi += xi;
            }
            let s: f64 = y.iter().sum();
            if s <= 0.0 {
                return Ok(0.0);
            }
            y.iter_mut().for_each(|v| *v /= s);
            let next = s - 1.0;
            let diff = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum::<f64>();
            x = y;
            if (next - lambda).abs() < 1e-13 && diff < 1e-12 {
                return Ok(next);
            }
            lambda = next;
        }
        Err(SparseError::EigenNoConvergence)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Packed `PA = LU` factors.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, xj)| l * xj).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, xj)| u * xj).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A^T y = c`.
    pub fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(c.len(), n, "dimension mismatch");
        // A^T = U^T L^T P: forward with U^T, backward with unit L^T.
        let mut z = c.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lu[k * n + i] * z[k];
            }
            z[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.lu[k * n + i] * z[k];
            }
            z[i] = s;
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let inv = a.inverse().unwrap();
        let expect = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        for (x, e) in inv.data().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_residual_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseMatrix::from_row_major(n, n, data);
        let inv = a.inverse().unwrap();
        let r = a.matmul(&inv).sub(&DenseMatrix::identity(n)).norm_inf();
        assert!(r <= 1e-8 * n as f64, "residual {r}");
    }

    #[test]
    fn transpose_solve() {
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![3.0, -1.0, 0.5],
            vec![1.0, 1.0, 4.0],
        ]);
        let c = [1.0, -2.0, 0.25];
        let y = a.lu().unwrap().solve_transpose(&c);
        let back = a.transpose().matvec(&y);
        for (u, v) in back.iter().zip(&c) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(a.inverse(), Err(SparseError::Singular { .. })));
    }

    #[test]
    fn radius_of_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]);
        assert!((a.spectral_radius(600).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn radius_of_rotation_is_complex_modulus() {
        let a = DenseMatrix::from_rows(&[vec![0.0, -0.8], vec![0.8, 0.0]]);
        assert!((a.spectral_radius(600).unwrap() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn radius_of_jacobi_poisson() {
        // I - D^{-1} A for tridiag(-1, 2, -1), n = 10: eigenvalues cos(k pi / 11).
        let n = 10;
        let mut t = DenseMatrix::zeros(n, n);
        for i in 0..n {
            if i > 0 {
                t[(i, i - 1)] = 0.5;
            }
            if i + 1 < n {
                t[(i, i + 1)] = 0.5;
            }
        }
        let rho = t.spectral_radius(600).unwrap();
        let expect = (std::f64::consts::PI / 11.0).cos();
        assert!((rho - expect).abs() < 1e-8, "{rho} vs {expect}");
        assert!((t.perron_root().unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn cap_is_enforced() {
        let a = DenseMatrix::identity(5);
        assert!(matches!(
            a.spectral_radius(4),
            Err(SparseError::CapExceeded { n: 5, cap: 4 })
        ));
    }
}
