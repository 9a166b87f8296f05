use super::{KrylovError, Preconditioner, Result};
use crate::sparse::CsrMatrix;

/// Zero-fill incomplete LU factors sharing the pattern of `A`: strictly lower
/// part holds `L` (unit diagonal implied), the rest holds `U`.
#[derive(Debug, Clone)]
pub struct Ilu0Factors {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

/// ILU(0) in the IKJ ordering: updates are restricted to the existing pattern.
///
/// Fails with [`KrylovError::ZeroPivot`] when a diagonal is missing or
/// `|u_ii| < 1e-14` times the largest magnitude in row `i` of `A`.
pub fn ilu0(a: &CsrMatrix) -> Result<Ilu0Factors> {
    if !a.is_square() {
        return Err(KrylovError::NotSquare);
    }
    let n = a.n_rows();
    let row_ptr = a.row_ptr().to_vec();
    let col_idx = a.col_idx().to_vec();
    let mut values = a.values().to_vec();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            if col_idx[k] == i {
                diag[i] = k;
            }
        }
    }
    // Column -> position map for the current row.
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        let row_scale = values[start..end].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in start..end {
            pos[col_idx[k]] = k;
        }
        for kk in start..end {
            let k = col_idx[kk];
            if k >= i {
                break;
            }
            let lik = values[kk] / values[diag[k]];
            values[kk] = lik;
            for jj in diag[k] + 1..row_ptr[k + 1] {
                let p = pos[col_idx[jj]];
                if p != usize::MAX {
                    values[p] -= lik * values[jj];
                }
            }
        }
        for k in start..end {
            pos[col_idx[k]] = usize::MAX;
        }
        if diag[i] == usize::MAX || !(values[diag[i]].abs() >= 1e-14 * row_scale) || values[diag[i]] == 0.0 {
            return Err(KrylovError::ZeroPivot(i));
        }
    }
    Ok(Ilu0Factors {
        n,
        row_ptr,
        col_idx,
        values,
        diag,
    })
}

impl Ilu0Factors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L U z = r`.
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        self.solve_into(r, &mut z);
        z
    }

    /// Unit lower factor `L` (diagonal stored explicitly).
    pub fn l(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.diag[i] {
                t.push((i, self.col_idx[k], self.values[k]));
            }
            t.push((i, i, 1.0));
        }
        CsrMatrix::from_triplets(self.n, self.n, &t).expect("valid pattern")
    }

    pub fn u(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..self.n {
            for k in self.diag[i]..self.row_ptr[i + 1] {
                t.push((i, self.col_idx[k], self.values[k]));
            }
        }
        CsrMatrix::from_triplets(self.n, self.n, &t).expect("valid pattern")
    }
}

impl Preconditioner for Ilu0Factors {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DenseMatrix;

    #[test]
    fn diagonal_matrix() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, -3.0), (2, 2, 0.5)]).unwrap();
        let f = ilu0(&a).unwrap();
        assert_eq!(f.l(), CsrMatrix::identity(3));
        assert_eq!(f.u(), a);
    }

    #[test]
    fn tridiagonal_is_exact() {
        let n = 12;
        let mut t = vec![];
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64 * 0.1));
            if i > 0 {
                t.push((i, i - 1, -1.0 - 0.05 * i as f64));
            }
            if i + 1 < n {
                t.push((i, i + 1, -2.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let f = ilu0(&a).unwrap();
        let lu = f.l().matmul(&f.u()).unwrap().to_dense();
        let diff = lu.sub(&a.to_dense()).max_abs();
        assert!(diff < 1e-14, "{diff}");
    }

    #[test]
    fn zero_leading_pivot() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]), 0.0);
        assert!(matches!(ilu0(&a), Err(KrylovError::ZeroPivot(0))));
    }

    #[test]
    fn pattern_is_preserved() {
        // 2d five-point Laplacian on a 4x4 grid: ILU(0) discards fill.
        let m = 4;
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = vec![];
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(16, 16, &t).unwrap();
        let f = ilu0(&a).unwrap();
        let (l, u) = (f.l(), f.u());
        for i in 0..16 {
            for &j in l.row(i).0.iter().chain(u.row(i).0) {
                assert!(a.get(i, j) != 0.0);
            }
        }
        // L U agrees with A on the pattern of A.
        let lu = l.matmul(&u).unwrap();
        for i in 0..16 {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                assert!((lu.get(i, j) - v).abs() < 1e-13);
            }
        }
    }
}
