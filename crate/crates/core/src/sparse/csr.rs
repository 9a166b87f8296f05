use super::{DenseMatrix, Result, SparseError, COMPACTION_TOL};

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// The four blocks of a matrix reordered as (fine, coarse).
#[derive(Debug, Clone)]
pub struct BlockSplit {
    pub ff: CsrMatrix,
    pub fc: CsrMatrix,
    pub cf: CsrMatrix,
    pub cc: CsrMatrix,
}

impl CsrMatrix {
    /// Builds a matrix from raw arrays, validating the CSR invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from per-row entry lists. Entries within a row are
    /// sorted, duplicates summed, and values with
    /// `|v| <= COMPACTION_TOL * max_row |v|` dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                if j >= n_cols {
                    return Err(SparseError::IndexOutOfRange {
                        row: i,
                        col: j,
                        n_rows,
                        n_cols,
                    });
                }
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            let row_max = merged.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
            let cutoff = COMPACTION_TOL * row_max;
            for (j, v) in merged {
                if v.abs() > cutoff {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            if i >= n_rows {
                return Err(SparseError::IndexOutOfRange {
                    row: i,
                    col: j,
                    n_rows,
                    n_cols,
                });
            }
            rows[i].push((j, v));
        }
        Self::from_rows(n_cols, rows)
    }

    /// Converts a dense matrix, keeping entries with `|v| > drop_tol`.
    pub fn from_dense(d: &DenseMatrix, drop_tol: f64) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.n_rows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: d.n_rows(),
            n_cols: d.n_cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Checks every structural invariant, including the absence of stored zeros.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SparseError::InvalidStructure(m));
        if self.row_ptr.len() != self.n_rows + 1 {
            return bad(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.n_rows + 1
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] != 0".into());
        }
        if self.row_ptr[self.n_rows] != self.col_idx.len() || self.col_idx.len() != self.values.len()
        {
            return bad("row_ptr[n_rows] does not match nnz".into());
        }
        for i in 0..self.n_rows {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if s > e {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            for k in s..e {
                if self.col_idx[k] >= self.n_cols {
                    return bad(format!("column {} out of range in row {i}", self.col_idx[k]));
                }
                if k > s && self.col_idx[k] <= self.col_idx[k - 1] {
                    return bad(format!("columns not strictly increasing in row {i}"));
                }
                if !self.values[k].is_finite() {
                    return bad(format!("non-finite value in row {i}"));
                }
                if self.values[k] == 0.0 {
                    return bad(format!("explicit zero stored in row {i}"));
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `y = A x`, summing each row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.mul_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = A x` for inner solver loops.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `r = b - A x`
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_rows];
        self.mul_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in s..e {
                let j = self.col_idx[k];
                let dst = next[j];
                col_idx[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse product `A B` (row-wise Gustavson). Exact cancellations are dropped.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(SparseError::DimensionMismatch {
                expected: self.n_cols,
                got: other.n_rows,
            });
        }
        let n = other.n_cols;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut pattern: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            pattern.clear();
            let (ac, av) = self.row(i);
            for (&k, &a_ik) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &b_kj) in bc.iter().zip(bv) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a_ik * b_kj;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Submatrix with the given rows and columns, in the given orders.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &i in rows {
            buf.clear();
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let nj = col_map[j];
                if nj != usize::MAX {
                    buf.push((nj, a));
                }
            }
            buf.sort_unstable_by_key(|&(j, _)| j);
            for &(j, a) in &buf {
                col_idx.push(j);
                values.push(a);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Splits a square matrix into `A_FF, A_FC, A_CF, A_CC` for a partition of
    /// its indices into fine and coarse sets.
    pub fn extract_blocks(&self, fine: &[usize], coarse: &[usize]) -> Result<BlockSplit> {
        if !self.is_square() {
            return Err(SparseError::InvalidSplit("matrix is not square".into()));
        }
        let n = self.n_rows;
        if fine.len() + coarse.len() != n {
            return Err(SparseError::InvalidSplit(format!(
                "|F| + |C| = {} but n = {n}",
                fine.len() + coarse.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in fine.iter().chain(coarse) {
            if i >= n || seen[i] {
                return Err(SparseError::InvalidSplit(format!(
                    "index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        Ok(BlockSplit {
            ff: self.submatrix(fine, fine),
            fc: self.submatrix(fine, coarse),
            cf: self.submatrix(coarse, fine),
            cc: self.submatrix(coarse, coarse),
        })
    }

    /// Symmetric permutation `P A P^T`, where row `k` of the result is row
    /// `order[k]` of `A`.
    pub fn permute(&self, order: &[usize]) -> CsrMatrix {
        self.submatrix(order, order)
    }

    /// Lower triangle including the diagonal.
    pub fn lower_triangle(&self) -> CsrMatrix {
        let rows = (0..self.n_rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&j, _)| j <= i)
                    .map(|(&j, &a)| (j, a))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(self.n_cols, rows).expect("lower triangle of a valid matrix")
    }

    pub fn diagonal_matrix(&self) -> CsrMatrix {
        let rows = self
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| vec![(i, d)])
            .collect();
        CsrMatrix::from_rows(self.n_cols, rows).expect("diagonal of a valid matrix")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                d[(i, j)] = a;
            }
        }
        d
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64, o: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, d)];
                if i > 0 {
                    r.push((i - 1, o));
                }
                if i + 1 < n {
                    r.push((i + 1, o));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows).unwrap()
    }

    #[test]
    fn identity_spmv() {
        let y = CsrMatrix::identity(3).spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn poisson_row_sums() {
        let a = tridiag(3, 32.0, -16.0);
        assert_eq!(a.spmv(&[1.0, 1.0, 1.0]).unwrap(), vec![16.0, 0.0, 16.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            a.spmv(&[1.0, 2.0]),
            Err(SparseError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn from_rows_compacts_and_merges() {
        let a = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0), (2, 1.0), (1, 1e-20)]])
            .unwrap();
        assert_eq!(a.col_idx(), &[0, 2]);
        assert_eq!(a.values(), &[2.0, 2.0]);
        a.validate().unwrap();
    }

    #[test]
    fn validate_rejects_unsorted() {
        let r = CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(r.is_err());
        let r = CsrMatrix::new(1, 3, vec![0, 1], vec![1], vec![0.0]);
        assert!(r.is_err());
    }

    #[test]
    fn blocks_two_by_two() {
        let a = tridiag(2, 2.0, -1.0);
        let b = a.extract_blocks(&[0], &[1]).unwrap();
        assert_eq!(b.ff.to_dense().data(), &[2.0]);
        assert_eq!(b.fc.to_dense().data(), &[-1.0]);
        assert_eq!(b.cf.to_dense().data(), &[-1.0]);
        assert_eq!(b.cc.to_dense().data(), &[2.0]);
    }

    #[test]
    fn blocks_interleaved_match_dense_permutation() {
        let a = tridiag(4, 2.0, -1.0);
        let (f, c) = ([0, 2], [1, 3]);
        let b = a.extract_blocks(&f, &c).unwrap();
        let order: Vec<usize> = f.iter().chain(&c).copied().collect();
        // Dense P A P^T, built entry by entry.
        let d = a.to_dense();
        let mut pap = DenseMatrix::zeros(4, 4);
        for (r, &i) in order.iter().enumerate() {
            for (s, &j) in order.iter().enumerate() {
                pap[(r, s)] = d[(i, j)];
            }
        }
        for r in 0..4 {
            for s in 0..4 {
                let v = match (r < 2, s < 2) {
                    (true, true) => b.ff.get(r, s),
                    (true, false) => b.fc.get(r, s - 2),
                    (false, true) => b.cf.get(r - 2, s),
                    (false, false) => b.cc.get(r - 2, s - 2),
                };
                assert_eq!(v, pap[(r, s)]);
            }
        }
        assert_eq!(a.permute(&order).to_dense(), pap);
    }

    #[test]
    fn blocks_all_fine() {
        let a = tridiag(3, 2.0, -1.0);
        let b = a.extract_blocks(&[0, 1, 2], &[]).unwrap();
        assert_eq!(b.ff, a);
        assert_eq!(b.fc.nnz(), 0);
        assert_eq!(b.cf.n_rows(), 0);
        assert_eq!(b.cc.n_rows(), 0);
    }

    #[test]
    fn blocks_reject_bad_split() {
        let a = tridiag(3, 2.0, -1.0);
        assert!(a.extract_blocks(&[0, 1], &[1]).is_err());
        assert!(a.extract_blocks(&[0], &[1]).is_err());
    }

    #[test]
    fn transpose_and_matmul_match_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, -1.0), (2, 0, 3.0)],
        )
        .unwrap();
        let at = a.transpose();
        at.validate().unwrap();
        assert_eq!(at.to_dense(), a.to_dense().transpose());
        let p = a.matmul(&at).unwrap();
        assert_eq!(p.to_dense(), a.to_dense().matmul(&at.to_dense()));
    }
}
