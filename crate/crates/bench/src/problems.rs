//! Manufactured Poisson problems `-Laplace(u) = f` with closed-form data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use mfd_core::geometry::{BcKind, BoxSpec, DiskSpec, DomainSpec, Fill, Point, PointCloud};

use crate::{BenchError, Result};

/// Largest admissible gap between the hand-coded source and a
/// finite-difference Laplacian of the exact solution.
pub const LAPLACIAN_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Unit disk, `u = sin(4x+0.1)/16 + x cos(2y+0.4)/4`, Dirichlet.
    Disk,
    /// Unit disk, `u = x^2 + y^2`, Dirichlet; reproduced exactly by any
    /// consistent stencil.
    Quadratic,
    /// Box `[0,2]x[0,1]x[0,1]`, `u = sin(x) cos(y) e^z`, Dirichlet on the
    /// `x = 2` face and Neumann elsewhere.
    Box3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestProblem {
    pub name: String,
    pub kind: ProblemKind,
}

/// The 2d disk problem with source `f = sin(4x+0.1) + x cos(2y+0.4)`.
pub fn disk_problem() -> TestProblem {
    TestProblem::new(ProblemKind::Disk).expect("disk problem data is consistent")
}

pub fn quadratic_problem() -> TestProblem {
    TestProblem::new(ProblemKind::Quadratic).expect("quadratic problem data is consistent")
}

pub fn box3d_problem() -> TestProblem {
    TestProblem::new(ProblemKind::Box3d).expect("box problem data is consistent")
}

impl TestProblem {
    /// Builds the problem and cross-checks `f` against a finite-difference
    /// Laplacian of `u` at 100 random points.
    pub fn new(kind: ProblemKind) -> Result<Self> {
        let name = match kind {
            ProblemKind::Disk => "disk",
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Box3d => "box3d",
        };
        let p = Self {
            name: name.into(),
            kind,
        };
        let gap = p.laplacian_gap(100, 0x5eed);
        if !(gap <= LAPLACIAN_CHECK_TOL) {
            return Err(BenchError::InconsistentProblem { name: p.name, gap });
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ProblemKind::Disk | ProblemKind::Quadratic => 2,
            ProblemKind::Box3d => 3,
        }
    }

    pub fn exact(&self, p: &Point) -> f64 {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self.kind {
            ProblemKind::Disk => (4.0 * x + 0.1).sin() / 16.0 + x * (2.0 * y + 0.4).cos() / 4.0,
            ProblemKind::Quadratic => x * x + y * y,
            ProblemKind::Box3d => x.sin() * y.cos() * z.exp(),
        }
    }

    /// `f = -Laplace(u)`.
    pub fn source(&self, p: &Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self.kind {
            ProblemKind::Disk => (4.0 * x + 0.1).sin() + x * (2.0 * y + 0.4).cos(),
            ProblemKind::Quadratic => -4.0,
            // u_xx + u_yy + u_zz = (-1 - 1 + 1) u.
            ProblemKind::Box3d => self.exact(p),
        }
    }

    pub fn gradient(&self, p: &Point) -> Point {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self.kind {
            ProblemKind::Disk => [
                (4.0 * x + 0.1).cos() / 4.0 + (2.0 * y + 0.4).cos() / 4.0,
                -x * (2.0 * y + 0.4).sin() / 2.0,
                0.0,
            ],
            ProblemKind::Quadratic => [2.0 * x, 2.0 * y, 0.0],
            ProblemKind::Box3d => {
                let e = z.exp();
                [x.cos() * y.cos() * e, -x.sin() * y.sin() * e, x.sin() * y.cos() * e]
            }
        }
    }

    /// Outward normal derivative `grad(u) . n`.
    pub fn normal_derivative(&self, p: &Point, n: &Point) -> f64 {
        let g = self.gradient(p);
        g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
    }

    /// Domain with `interior` randomly placed interior points.
    pub fn domain(&self, interior: usize, seed: u64) -> DomainSpec {
        match self.kind {
            ProblemKind::Disk | ProblemKind::Quadratic => DomainSpec::Disk(DiskSpec::with_interior(interior, seed)),
            ProblemKind::Box3d => {
                let mut faces = vec![BcKind::Neumann; 6];
                faces[1] = BcKind::Dirichlet;
                DomainSpec::Box(BoxSpec {
                    dim: 3,
                    lo: [0.0; 3],
                    hi: [2.0, 1.0, 1.0],
                    fill: Fill::Count { interior },
                    faces,
                    seed,
                })
            }
        }
    }

    /// Point cloud carrying this problem's boundary data.
    pub fn cloud(&self, interior: usize, seed: u64) -> Result<PointCloud> {
        self.cloud_for(&self.domain(interior, seed))
    }

    pub fn cloud_for(&self, domain: &DomainSpec) -> Result<PointCloud> {
        Ok(domain
            .generate()?
            .with_boundary_data(|p| self.exact(p), |p, n| self.normal_derivative(p, n)))
    }

    /// Largest `|f + Laplace_h(u)|` over `samples` random points of the
    /// bounding box, with a Richardson-extrapolated central difference.
    pub fn laplacian_gap(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = match self.kind {
            ProblemKind::Disk | ProblemKind::Quadratic => ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
            ProblemKind::Box3d => ([0.0; 3], [2.0, 1.0, 1.0]),
        };
        let d = self.dim();
        let lap = |p: &Point, h: f64| {
            let mut s = 0.0;
            for k in 0..d {
                let (mut a, mut b) = (*p, *p);
                a[k] += h;
                b[k] -= h;
                s += (self.exact(&a) - 2.0 * self.exact(p) + self.exact(&b)) / (h * h);
            }
            s
        };
        let h = 1e-2;
        (0..samples)
            .map(|_| {
                let mut p = [0.0; 3];
                for k in 0..d {
                    p[k] = rng.random_range(lo[k]..hi[k]);
                }
                let richardson = (4.0 * lap(&p, h / 2.0) - lap(&p, h)) / 3.0;
                (self.source(&p) + richardson).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_values_at_origin() {
        let p = disk_problem();
        assert!((p.source(&[0.0; 3]) - 0.0998334).abs() < 5e-8);
        assert!((p.exact(&[0.0; 3]) - 0.00623959).abs() < 5e-9);
    }

    #[test]
    fn constructors_pass_their_own_check() {
        for p in [disk_problem(), quadratic_problem(), box3d_problem()] {
            assert!(p.laplacian_gap(100, 1) <= LAPLACIAN_CHECK_TOL, "{}", p.name);
        }
    }

    #[test]
    fn box_faces() {
        let p = box3d_problem();
        let c = p.cloud(300, 3).unwrap();
        use mfd_core::geometry::PointKind;
        for i in 0..c.len() {
            let x = c.point(i);
            match c.kind(i) {
                PointKind::Dirichlet => {
                    assert_eq!(x[0], 2.0);
                    assert!((c.bc_value(i) - p.exact(x)).abs() < 1e-15);
                }
                PointKind::Neumann => {
                    let n = c.normal(i).unwrap();
                    assert!((c.bc_value(i) - p.normal_derivative(x, n)).abs() < 1e-15);
                }
                PointKind::Interior => {}
            }
        }
    }
}
