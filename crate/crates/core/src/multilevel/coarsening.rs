use std::cmp::Reverse;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MultilevelError, Result};
use crate::sparse::CsrMatrix;

/// Strength threshold used when none is given.
pub const DEFAULT_THETA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CfLabel {
    Coarse,
    Fine,
}

/// Partition of the unknowns into fine and coarse sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfSplitting {
    labels: Vec<CfLabel>,
    fine: Vec<usize>,
    coarse: Vec<usize>,
    theta: Option<f64>,
    fallback: bool,
}

impl CfSplitting {
    /// Builds a splitting from labels; both sets must be non-empty when
    /// `n >= 2`.
    pub fn from_labels(labels: Vec<CfLabel>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(MultilevelError::TooSmall(n));
        }
        let coarse: Vec<usize> = (0..n).filter(|&i| labels[i] == CfLabel::Coarse).collect();
        let fine: Vec<usize> = (0..n).filter(|&i| labels[i] == CfLabel::Fine).collect();
        if coarse.is_empty() || fine.is_empty() {
            return Err(MultilevelError::InvalidSplitting(format!(
                "|C| = {}, |F| = {}",
                coarse.len(),
                fine.len()
            )));
        }
        Ok(Self {
            labels,
            fine,
            coarse,
            theta: None,
            fallback: false,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[CfLabel] {
        &self.labels
    }

    pub fn fine(&self) -> &[usize] {
        &self.fine
    }

    pub fn coarse(&self) -> &[usize] {
        &self.coarse
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.labels[i] == CfLabel::Coarse
    }

    /// `perm[k]` is the original index placed at position `k` of the
    /// (F first, C second) ordering.
    pub fn permutation(&self) -> Vec<usize> {
        self.fine.iter().chain(&self.coarse).copied().collect()
    }

    /// Strength threshold, for Ruge-Stueben splittings.
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// The greedy pass produced no usable splitting and the default rule
    /// was substituted.
    pub fn fell_back(&self) -> bool {
        self.fallback
    }
}

/// First `ceil(n/2)` unknowns coarse, the rest fine.
pub fn default_coarsening(n: usize) -> Result<CfSplitting> {
    if n < 2 {
        return Err(MultilevelError::TooSmall(n));
    }
    let nc = n.div_ceil(2);
    let labels = (0..n)
        .map(|i| if i < nc { CfLabel::Coarse } else { CfLabel::Fine })
        .collect();
    CfSplitting::from_labels(labels)
}

/// `S_i`: the `j` with `-a_ij >= theta * max_{k != i} (-a_ik)`. Positive
/// off-diagonals are never strong.
pub fn strong_connections(a: &CsrMatrix, theta: f64) -> Vec<Vec<usize>> {
    (0..a.n_rows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let max_neg = cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| j != i)
                .map(|(_, &v)| -v)
                .fold(0.0f64, f64::max);
            if max_neg <= 0.0 {
                return vec![];
            }
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| j != i && -v >= theta * max_neg)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect()
}

fn transpose_graph(s: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut t = vec![Vec::new(); s.len()];
    for (i, row) in s.iter().enumerate() {
        for &j in row {
            t[j].push(i);
        }
    }
    t
}

/// Classical first-pass Ruge-Stueben splitting: repeatedly make the
/// undecided point with the largest measure coarse (lowest index on ties) and
/// every undecided point that strongly depends on it fine.
pub fn ruge_stueben_coarsening(a: &CsrMatrix, theta: f64) -> Result<CfSplitting> {
    ruge_stueben_masked(a, theta, &vec![false; a.n_rows()])
}

/// Ruge-Stueben splitting in which `decoupled` points are fixed to F and
/// dropped from the strength graph.
pub(super) fn ruge_stueben_masked(a: &CsrMatrix, theta: f64, decoupled: &[bool]) -> Result<CfSplitting> {
    if !a.is_square() {
        return Err(MultilevelError::NotSquare);
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(MultilevelError::InvalidTheta(theta));
    }
    let n = a.n_rows();
    if n < 2 {
        return Err(MultilevelError::TooSmall(n));
    }
    let mut s = strong_connections(a, theta);
    for row in &mut s {
        row.retain(|&j| !decoupled[j]);
    }
    let st = transpose_graph(&s);

    let mut label: Vec<Option<CfLabel>> =
        decoupled.iter().map(|&d| d.then_some(CfLabel::Fine)).collect();
    let mut lambda: Vec<usize> = st.iter().map(Vec::len).collect();
    let mut queue: BTreeSet<(Reverse<usize>, usize)> =
        (0..n).filter(|&i| lambda[i] > 0 && label[i].is_none()).map(|i| (Reverse(lambda[i]), i)).collect();

    let bump = |queue: &mut BTreeSet<(Reverse<usize>, usize)>, lambda: &mut [usize], k: usize, up: bool| {
        queue.remove(&(Reverse(lambda[k]), k));
        if up {
            lambda[k] += 1;
        } else {
            lambda[k] = lambda[k].saturating_sub(1);
        }
        if lambda[k] > 0 {
            queue.insert((Reverse(lambda[k]), k));
        }
    };

    while let Some((_, i)) = queue.pop_first() {
        label[i] = Some(CfLabel::Coarse);
        for &k in &s[i] {
            if label[k].is_none() {
                bump(&mut queue, &mut lambda, k, false);
            }
        }
        for &j in &st[i] {
            if label[j].is_some() {
                continue;
            }
            queue.remove(&(Reverse(lambda[j]), j));
            label[j] = Some(CfLabel::Fine);
            for &k in &s[j] {
                if label[k].is_none() {
                    bump(&mut queue, &mut lambda, k, true);
                }
            }
        }
    }
    // Points left undecided have no undecided dependants: keep them coarse.
    let labels: Vec<CfLabel> = label.into_iter().map(|l| l.unwrap_or(CfLabel::Coarse)).collect();
    let mut split = match CfSplitting::from_labels(labels) {
        Ok(s) => s,
        Err(MultilevelError::InvalidSplitting(_)) => {
            let mut d = default_coarsening(n)?;
            d.fallback = true;
            d
        }
        Err(e) => return Err(e),
    };
    split.theta = Some(theta);
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn poisson_2d(m: usize) -> CsrMatrix {
        let n = m * m;
        let mut t = vec![];
        for r in 0..m {
            for c in 0..m {
                let i = r * m + c;
                t.push((i, i, 4.0));
                if c > 0 {
                    t.push((i, i - 1, -1.0));
                }
                if c + 1 < m {
                    t.push((i, i + 1, -1.0));
                }
                if r > 0 {
                    t.push((i, i - m, -1.0));
                }
                if r + 1 < m {
                    t.push((i, i + m, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn default_rule() {
        let s = default_coarsening(10).unwrap();
        assert_eq!(s.coarse(), &[0, 1, 2, 3, 4]);
        assert_eq!(s.fine(), &[5, 6, 7, 8, 9]);
        assert_eq!(default_coarsening(3).unwrap().coarse(), &[0, 1]);
        let two = default_coarsening(2).unwrap();
        assert_eq!((two.coarse(), two.fine()), (&[0][..], &[1][..]));
        assert!(matches!(default_coarsening(1), Err(MultilevelError::TooSmall(1))));
    }

    #[test]
    fn permutation_puts_fine_first() {
        let s = default_coarsening(5).unwrap();
        assert_eq!(s.permutation(), vec![3, 4, 0, 1, 2]);
    }

    #[test]
    fn rs_on_1d_poisson_alternates() {
        // Hand-run: interior measures are 2, endpoints 1; index 1 goes first,
        // then 3 and 5 after their measures rise to 3.
        let s = ruge_stueben_coarsening(&poisson_1d(7), 0.25).unwrap();
        assert_eq!(s.coarse(), &[1, 3, 5]);
        assert_eq!(s.fine(), &[0, 2, 4, 6]);
        assert!(!s.fell_back());
        assert_eq!(s.theta(), Some(0.25));
        // Deterministic.
        assert_eq!(ruge_stueben_coarsening(&poisson_1d(7), 0.25).unwrap(), s);
    }

    #[test]
    fn rs_on_diagonal_falls_back() {
        let a = CsrMatrix::identity(6);
        let s = ruge_stueben_coarsening(&a, 0.25).unwrap();
        assert!(s.fell_back());
        assert_eq!(s.coarse(), &[0, 1, 2]);
    }

    #[test]
    fn rs_on_2d_grid() {
        let a = poisson_2d(4);
        let s = ruge_stueben_coarsening(&a, 0.25).unwrap();
        let nc = s.coarse().len();
        assert!((4..=12).contains(&nc), "{nc}");
        // Every fine point has a strong coarse neighbour; C is independent.
        let strong = strong_connections(&a, 0.25);
        for &i in s.fine() {
            assert!(strong[i].iter().any(|&j| s.is_coarse(j)));
        }
        for &i in s.coarse() {
            assert!(strong[i].iter().all(|&j| !s.is_coarse(j)));
        }
    }

    #[test]
    fn positive_offdiagonals_are_weak() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 1, 1.0), (0, 2, -1.0), (1, 1, 1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let s = strong_connections(&a, 0.25);
        assert_eq!(s[0], vec![2]);
        assert!(s[1].is_empty());
    }

    #[test]
    fn invalid_theta() {
        assert!(matches!(
            ruge_stueben_coarsening(&poisson_1d(4), 1.0),
            Err(MultilevelError::InvalidTheta(_))
        ));
    }
}
