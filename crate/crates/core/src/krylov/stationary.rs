use super::{KrylovError, Preconditioner, Result};
use crate::sparse::CsrMatrix;

fn checked_diagonal(a: &CsrMatrix, b: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(KrylovError::NotSquare);
    }
    let n = a.n_rows();
    for len in [b.len(), x0.len()] {
        if len != n {
            return Err(KrylovError::DimensionMismatch { expected: n, got: len });
        }
    }
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return Err(KrylovError::ZeroDiagonal(i));
    }
    Ok(d)
}

/// `sweeps` Jacobi steps `x <- x + D^-1 (b - A x)`.
pub fn jacobi_iterate(a: &CsrMatrix, b: &[f64], x0: &[f64], sweeps: usize) -> Result<Vec<f64>> {
    let d = checked_diagonal(a, b, x0)?;
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; x.len()];
    for _ in 0..sweeps {
        a.mul_into(&x, &mut ax);
        for i in 0..x.len() {
            x[i] += (b[i] - ax[i]) / d[i];
        }
    }
    Ok(x)
}

/// `sweeps` forward Gauss-Seidel steps (ascending row order).
pub fn gauss_seidel_iterate(a: &CsrMatrix, b: &[f64], x0: &[f64], sweeps: usize) -> Result<Vec<f64>> {
    let d = checked_diagonal(a, b, x0)?;
    let mut x = x0.to_vec();
    for _ in 0..sweeps {
        gauss_seidel_sweep(a, &d, b, &mut x);
    }
    Ok(x)
}

pub(crate) fn gauss_seidel_sweep(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..x.len() {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    }
}

/// `M = diag(A)` as a preconditioner.
#[derive(Debug, Clone)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let d = a.diagonal();
        if let Some(i) = d.iter().position(|&v| v == 0.0) {
            return Err(KrylovError::ZeroDiagonal(i));
        }
        Ok(Self {
            inv_diag: d.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{norm_inf, DenseMatrix};

    fn poisson(n: usize) -> CsrMatrix {
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
    fn diagonal_one_sweep() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 4.0), (2, 2, -1.0)]).unwrap();
        let x = jacobi_iterate(&a, &[2.0, 2.0, 3.0], &[0.0; 3], 1).unwrap();
        assert_eq!(x, vec![1.0, 0.5, -3.0]);
    }

    #[test]
    fn jacobi_rate_is_cos_pi_over_n_plus_one() {
        let n = 10;
        let a = poisson(n);
        let mut t = DenseMatrix::identity(n);
        let ad = a.to_dense();
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] -= ad[(i, j)] / 2.0;
            }
        }
        let rho = t.spectral_radius(600).unwrap();
        let exact = (std::f64::consts::PI / 11.0).cos();
        assert!((rho - exact).abs() < 1e-10);
        // Observed contraction of the error approaches the same rate.
        let b = vec![0.0; n];
        let x0: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sin()).collect();
        let e200 = norm_inf(&jacobi_iterate(&a, &b, &x0, 200).unwrap());
        let e201 = norm_inf(&jacobi_iterate(&a, &b, &x0, 202).unwrap());
        let rate = (e201 / e200).sqrt();
        assert!((rate - exact).abs() < 1e-3, "{rate}");
    }

    #[test]
    fn gauss_seidel_beats_jacobi() {
        let n = 50;
        let a = poisson(n);
        let b = vec![1.0; n];
        let exact = a.to_dense().lu().unwrap().solve(&b);
        let err = |x: Vec<f64>| x.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let ej = err(jacobi_iterate(&a, &b, &vec![0.0; n], 100).unwrap());
        let eg = err(gauss_seidel_iterate(&a, &b, &vec![0.0; n], 100).unwrap());
        assert!(eg < ej);
    }

    #[test]
    fn zero_diagonal_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            gauss_seidel_iterate(&a, &[1.0, 1.0], &[0.0, 0.0], 1),
            Err(KrylovError::ZeroDiagonal(0))
        ));
    }
}
