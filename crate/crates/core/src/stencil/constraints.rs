use serde::{Deserialize, Serialize};

use super::{Result, StencilError};
use crate::geometry::{NeighborSet, Point};
use crate::sparse::{norm_inf, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Exactness of `sum s_i (u_i - u_0)` for `Laplace(u)` on quadratics.
    Laplace,
    /// Exactness for the outward normal derivative `n . grad u` on linears.
    NeumannDerivative { normal: Point },
}

/// Consistency conditions `V s = b` for one point, with selection weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub kind: ConstraintKind,
    pub dim: usize,
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub v: DenseMatrix,
    pub b: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest neighbour distance.
    pub scale: f64,
    row_degree: Vec<i32>,
}

/// Number of Laplace consistency conditions in `dim` dimensions.
pub fn laplace_rows(dim: usize) -> usize {
    dim * (dim + 3) / 2
}

/// Builds the constraint rows in the order: linear (x, y, z), squares
/// (xx, yy, zz), then mixed (xy, xz, yz). Weights are `distance^-alpha`.
pub fn build_constraints(
    neigh: &NeighborSet,
    kind: ConstraintKind,
    alpha: f64,
) -> Result<ConstraintSystem> {
    let d = neigh.dim;
    let m = neigh.len();
    if m == 0 {
        return Err(StencilError::EmptyNeighborhood);
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(StencilError::InvalidAlpha(alpha));
    }
    if let Some(i) = neigh.distances.iter().position(|&r| !(r > 0.0)) {
        return Err(StencilError::ZeroDistance(neigh.neighbors[i]));
    }
    let offs = &neigh.offsets;
    let (rows, b, row_degree): (Vec<Vec<f64>>, Vec<f64>, Vec<i32>) = match kind {
        ConstraintKind::Laplace => {
            let mut rows = Vec::with_capacity(laplace_rows(d));
            let mut b = Vec::new();
            let mut deg = Vec::new();
            for k in 0..d {
                rows.push(offs.iter().map(|o| o[k]).collect());
                b.push(0.0);
                deg.push(1);
            }
            for k in 0..d {
                rows.push(offs.iter().map(|o| o[k] * o[k]).collect());
                b.push(2.0);
                deg.push(2);
            }
            for p in 0..d {
                for q in p + 1..d {
                    rows.push(offs.iter().map(|o| o[p] * o[q]).collect());
                    b.push(0.0);
                    deg.push(2);
                }
            }
            (rows, b, deg)
        }
        ConstraintKind::NeumannDerivative { normal } => {
            let len: f64 = normal[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
            if (len - 1.0).abs() > 1e-9 || normal[d..].iter().any(|&c| c != 0.0) {
                return Err(StencilError::InvalidNormal);
            }
            let rows = (0..d).map(|k| offs.iter().map(|o| o[k]).collect()).collect();
            (rows, normal[..d].to_vec(), vec![1; d])
        }
    };
    Ok(ConstraintSystem {
        kind,
        dim: d,
        center: neigh.center,
        neighbors: neigh.neighbors.clone(),
        v: DenseMatrix::from_rows(&rows),
        b,
        weights: neigh.distances.iter().map(|r| r.powf(-alpha)).collect(),
        scale: neigh.max_distance(),
        row_degree,
    })
}

impl ConstraintSystem {
    /// Number of constraints.
    pub fn k(&self) -> usize {
        self.b.len()
    }

    /// Number of neighbours.
    pub fn m(&self) -> usize {
        self.neighbors.len()
    }

    /// `||V s - b||_inf`.
    pub fn residual(&self, s: &[f64]) -> f64 {
        let vs = self.v.matvec(s);
        vs.iter()
            .zip(&self.b)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Admissible consistency residual for returned stencils.
    pub fn residual_bound(&self) -> f64 {
        1e-10 * 1f64.max(norm_inf(&self.b)).max(self.scale.powi(3))
    }

    /// The system in units of the neighbourhood radius, with weights
    /// normalised to a maximum of one. A solution `t` of the scaled system
    /// maps back by `s = t * unscale`.
    pub(crate) fn scaled(&self) -> (DenseMatrix, Vec<f64>, f64) {
        let mut v = self.v.clone();
        for r in 0..self.k() {
            let f = self.scale.powi(-self.row_degree[r]);
            for j in 0..self.m() {
                v[(r, j)] *= f;
            }
        }
        let wmax = self.weights.iter().copied().fold(0.0, f64::max);
        let w = self.weights.iter().map(|x| x / wmax).collect();
        let p = match self.kind {
            ConstraintKind::Laplace => 2,
            ConstraintKind::NeumannDerivative { .. } => 1,
        };
        (v, w, self.scale.powi(-p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ns(dim: usize, offs: Vec<Point>) -> NeighborSet {
        NeighborSet::from_offsets(dim, offs)
    }

    #[test]
    fn one_d_laplace() {
        let h = 0.3;
        let sys = build_constraints(&ns(1, vec![[-h, 0.0, 0.0], [h, 0.0, 0.0]]), ConstraintKind::Laplace, 2.0).unwrap();
        assert_eq!(sys.v, DenseMatrix::from_rows(&[vec![-h, h], vec![h * h, h * h]]));
        assert_eq!(sys.b, vec![0.0, 2.0]);
        assert_eq!(sys.k(), 2);
    }

    #[test]
    fn two_d_example_shape() {
        let offs = [0.0f64, 90.0, 180.0, 270.0, 9.0, 18.0]
            .iter()
            .map(|a| [a.to_radians().cos(), a.to_radians().sin(), 0.0])
            .collect();
        let sys = build_constraints(&ns(2, offs), ConstraintKind::Laplace, 2.0).unwrap();
        assert_eq!((sys.v.n_rows(), sys.v.n_cols()), (5, 6));
        assert_eq!(sys.b, vec![0.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(sys.weights.iter().all(|w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn three_d_row_order() {
        let o = [0.5, -0.25, 2.0];
        let sys = build_constraints(&ns(3, vec![o]), ConstraintKind::Laplace, 1.0).unwrap();
        let col = sys.v.column(0);
        assert_eq!(
            col,
            vec![0.5, -0.25, 2.0, 0.25, 0.0625, 4.0, -0.125, 1.0, -0.5]
        );
        assert_eq!(sys.b, vec![0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn neumann_1d() {
        let h = 0.2;
        let sys = build_constraints(
            &ns(1, vec![[-h, 0.0, 0.0]]),
            ConstraintKind::NeumannDerivative { normal: [1.0, 0.0, 0.0] },
            2.0,
        )
        .unwrap();
        assert_eq!(sys.v, DenseMatrix::from_rows(&[vec![-h]]));
        assert_eq!(sys.b, vec![1.0]);
    }

    #[test]
    fn argument_errors() {
        let good = ns(2, vec![[1.0, 0.0, 0.0]]);
        assert_eq!(build_constraints(&good, ConstraintKind::Laplace, 0.5), Err(StencilError::InvalidAlpha(0.5)));
        assert_eq!(build_constraints(&ns(2, vec![]), ConstraintKind::Laplace, 2.0), Err(StencilError::EmptyNeighborhood));
        assert!(matches!(
            build_constraints(&ns(2, vec![[0.0; 3]]), ConstraintKind::Laplace, 2.0),
            Err(StencilError::ZeroDistance(_))
        ));
        assert_eq!(
            build_constraints(&good, ConstraintKind::NeumannDerivative { normal: [1.0, 1.0, 0.0] }, 2.0),
            Err(StencilError::InvalidNormal)
        );
    }
}
