//! Geometric conditions for the existence of positive Laplace stencils.
//!
//! A neighbourhood whose offsets all lie in one closed half-space admits no
//! positive stencil: the linear constraint in the normal direction forces every
//! off-plane coefficient to vanish and the quadratic one cannot then be met.
//! Conversely, if every cone of a fixed opening contains an offset, a positive
//! stencil exists.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{dot3, norm3, GeometryError, NeighborSearch, NeighborSet, Point, PointCloud, PointKind, Result};
use crate::sparse::DenseMatrix;
use crate::stencil::{simplex_solve, LpOutcome};

/// Parameters of the sufficient cone condition in 2d and 3d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeConstants {
    pub dim: usize,
    /// Tangent of the cone half-angle.
    pub beta: f64,
    /// Total opening angle in degrees.
    pub opening_angle_deg: f64,
    /// `r / (h/2)` above which a ball around an interior point is guaranteed
    /// to satisfy the cone condition.
    pub radius_ratio: f64,
}

impl ConeConstants {
    pub fn for_dim(dim: usize) -> Result<Self> {
        let beta = match dim {
            2 => 2f64.sqrt() - 1.0,
            3 => ((3.0 - 6f64.sqrt()) / 6.0).sqrt(),
            d => return Err(GeometryError::UnsupportedDimension(d)),
        };
        Ok(Self {
            dim,
            beta,
            opening_angle_deg: 2.0 * beta.atan().to_degrees(),
            radius_ratio: (1.0 + beta * beta).sqrt() / beta,
        })
    }

    /// Half of the opening angle, in radians.
    pub fn half_angle(&self) -> f64 {
        self.beta.atan()
    }
}

/// Search radius guaranteeing the cone condition for mesh size `h`, with the
/// default 5% safety margin.
pub fn candidate_radius(h: f64, dim: usize) -> Result<f64> {
    candidate_radius_with_margin(h, dim, 0.05)
}

pub fn candidate_radius_with_margin(h: f64, dim: usize, margin: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidArgument(format!("mesh size {h}")));
    }
    Ok(ConeConstants::for_dim(dim)?.radius_ratio * h / 2.0 * (1.0 + margin))
}

/// Radius from the inscribed-ball argument: a ball of radius `h/2` fits
/// inside the cone sector of radius `r` once `r >= (1 + 1/sin(gamma/2)) h/2`,
/// so every sector contains a point. Larger than [`candidate_radius`].
pub fn covering_radius(h: f64, dim: usize) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidArgument(format!("mesh size {h}")));
    }
    Ok((1.0 + ConeConstants::for_dim(dim)?.radius_ratio) * h / 2.0)
}

/// Smallest radius `start * growth^k <= max` at which every interior point
/// of the cloud satisfies the cone criterion, or `None`.
pub fn cloud_cone_radius(cloud: &PointCloud, start: f64, max: f64, growth: f64) -> Result<Option<f64>> {
    if !(growth > 1.0 && start > 0.0) {
        return Err(GeometryError::InvalidArgument(format!("start {start}, growth {growth}")));
    }
    let consts = ConeConstants::for_dim(cloud.dim())?;
    let search = NeighborSearch::for_radius(cloud, max);
    let interior = cloud.indices_of(PointKind::Interior);
    let mut r = start;
    while r <= max * (1.0 + 1e-12) {
        let mut all = true;
        for &i in &interior {
            if !cone_criterion(&search.within(i, r), &consts)? {
                all = false;
                break;
            }
        }
        if all {
            return Ok(Some(r));
        }
        r *= growth;
    }
    Ok(None)
}

/// Sorted polar angles of 2d offsets and the largest gap between neighbours
/// on the circle (including the wrap-around gap).
fn max_angular_gap(offsets: &[Point]) -> f64 {
    let mut angles: Vec<f64> = offsets.iter().map(|o| o[1].atan2(o[0])).collect();
    angles.sort_by(f64::total_cmp);
    let mut gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

/// True iff all offsets lie in one closed half-space through the centre, in
/// which case no positive Laplace stencil exists.
///
/// 1d and 2d are decided exactly (sign check, angular gaps); 3d via a
/// feasibility LP for a strictly positive null-space combination.
pub fn half_space_violation(neigh: &NeighborSet) -> bool {
    let offs = &neigh.offsets;
    if offs.is_empty() {
        return true;
    }
    match neigh.dim {
        1 => !(offs.iter().any(|o| o[0] > 0.0) && offs.iter().any(|o| o[0] < 0.0)),
        2 => max_angular_gap(offs) >= PI - 1e-12,
        _ => !positively_spans(offs, neigh.dim),
    }
}

/// Offsets positively span R^d iff they span it linearly and some strictly
/// positive combination of them vanishes.
fn positively_spans(offs: &[Point], dim: usize) -> bool {
    if offs.len() <= dim || linear_rank(offs, dim) < dim {
        return false;
    }
    // Normalised directions keep the LP well scaled. Substituting
    // lambda = 1 + mu, mu >= 0 turns "lambda >= 1, X lambda = 0" into
    // X mu = -X 1.
    let dirs: Vec<Point> = offs
        .iter()
        .map(|o| {
            let n = norm3(o);
            [o[0] / n, o[1] / n, o[2] / n]
        })
        .collect();
    let m = dirs.len();
    let mut a = DenseMatrix::zeros(dim, m);
    let mut b = vec![0.0; dim];
    for (j, d) in dirs.iter().enumerate() {
        for k in 0..dim {
            a[(k, j)] = d[k];
            b[k] -= d[k];
        }
    }
    match simplex_solve(&a, &b, &vec![1.0; m]) {
        Ok(LpOutcome::Optimal(_)) => true,
        Ok(LpOutcome::Infeasible { .. }) => false,
        // A pivoting defect is not a geometric statement; stay conservative.
        Err(_) => false,
    }
}

/// Numerical rank of the offset vectors (modified Gram-Schmidt).
fn linear_rank(offs: &[Point], dim: usize) -> usize {
    let scale = offs.iter().map(norm3).fold(0.0, f64::max);
    let mut basis: Vec<Point> = Vec::new();
    for o in offs {
        let mut v = *o;
        for q in &basis {
            let c = dot3(&v, q);
            for k in 0..3 {
                v[k] -= c * q[k];
            }
        }
        let n = norm3(&v);
        if n > 1e-10 * scale {
            basis.push([v[0] / n, v[1] / n, v[2] / n]);
            if basis.len() == dim {
                break;
            }
        }
    }
    basis.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeVerdict {
    Satisfied,
    Violated,
    /// 3d sweep result within the safety margin of the threshold.
    Unknown,
}

/// Direction sweep used for the 3d cone condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSweep {
    /// Icosphere subdivision level; `10 * 4^s + 2` directions.
    pub subdivisions: usize,
    /// Half-width of the undecided band around the threshold, in degrees.
    pub margin_deg: f64,
}

impl Default for ConeSweep {
    fn default() -> Self {
        Self {
            subdivisions: 6,
            margin_deg: 1.0,
        }
    }
}

/// Sufficient condition for a positive stencil: every open cone of the given
/// opening, in every direction, contains an offset. `Unknown` counts as false.
pub fn cone_criterion(neigh: &NeighborSet, consts: &ConeConstants) -> Result<bool> {
    Ok(cone_criterion_with(neigh, consts, &ConeSweep::default())? == ConeVerdict::Satisfied)
}

pub fn cone_criterion_with(
    neigh: &NeighborSet,
    consts: &ConeConstants,
    sweep: &ConeSweep,
) -> Result<ConeVerdict> {
    if neigh.dim != consts.dim {
        return Err(GeometryError::InvalidArgument(format!(
            "{}d neighbourhood with {}d cone constants",
            neigh.dim, consts.dim
        )));
    }
    if neigh.is_empty() {
        return Ok(ConeVerdict::Violated);
    }
    let half = consts.half_angle();
    match neigh.dim {
        2 => {
            // An open cone of opening 2*half fits into a gap iff the gap is
            // at least that wide; exact ties are resolved conservatively.
            Ok(if max_angular_gap(&neigh.offsets) < 2.0 * half - 1e-12 {
                ConeVerdict::Satisfied
            } else {
                ConeVerdict::Violated
            })
        }
        3 => {
            let dirs: Vec<Point> = neigh
                .offsets
                .iter()
                .map(|o| {
                    let n = norm3(o);
                    [o[0] / n, o[1] / n, o[2] / n]
                })
                .collect();
            let sphere = icosphere(sweep.subdivisions);
            // Largest angle from a sweep direction to its closest offset
            // direction; cos is decreasing, so track the smallest best-cosine.
            let mut worst_cos = 1.0f64;
            for v in sphere.iter() {
                let best = dirs.iter().map(|d| dot3(v, d)).fold(-1.0, f64::max);
                worst_cos = worst_cos.min(best);
            }
            let worst = worst_cos.clamp(-1.0, 1.0).acos();
            let margin = sweep.margin_deg.to_radians();
            Ok(if worst >= half {
                ConeVerdict::Violated
            } else if worst + margin < half {
                ConeVerdict::Satisfied
            } else {
                ConeVerdict::Unknown
            })
        }
        d => Err(GeometryError::UnsupportedDimension(d)),
    }
}

fn icosphere(level: usize) -> std::borrow::Cow<'static, [Point]> {
    static DEFAULT: OnceLock<Vec<Point>> = OnceLock::new();
    if level == ConeSweep::default().subdivisions {
        std::borrow::Cow::Borrowed(DEFAULT.get_or_init(|| build_icosphere(level)))
    } else {
        std::borrow::Cow::Owned(build_icosphere(level))
    }
}

fn build_icosphere(level: usize) -> Vec<Point> {
    use std::collections::HashMap;
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let unit = |p: Point| {
        let n = norm3(&p);
        [p[0] / n, p[1] / n, p[2] / n]
    };
    for v in verts.iter_mut() {
        *v = unit(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(dim: usize, angles_deg: &[f64]) -> NeighborSet {
        let offs = angles_deg
            .iter()
            .map(|a| {
                let t = a.to_radians();
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
        NeighborSet::from_offsets(dim, offs)
    }

    #[test]
    fn constants() {
        let c2 = ConeConstants::for_dim(2).unwrap();
        assert!((c2.opening_angle_deg - 45.0).abs() < 1e-12);
        assert!((c2.radius_ratio - 2.61).abs() < 0.01);
        assert!((c2.radius_ratio - 1.0 / 22.5f64.to_radians().sin()).abs() < 1e-12);
        let c3 = ConeConstants::for_dim(3).unwrap();
        assert!((c3.opening_angle_deg - 33.7).abs() < 0.1);
        assert!((c3.radius_ratio - 3.45).abs() < 0.01);
        assert!((c3.radius_ratio - 1.0 / (c3.opening_angle_deg / 2.0).to_radians().sin()).abs() < 1e-12);
        assert!(ConeConstants::for_dim(1).is_err());
    }

    #[test]
    fn candidate_radii() {
        assert!((candidate_radius(0.1, 2).unwrap() - 0.1370).abs() < 5e-4);
        assert!((candidate_radius(0.1, 3).unwrap() - 0.1811).abs() < 5e-4);
        assert!(candidate_radius(0.0, 2).is_err());
        // 1 + 1/sin(22.5 deg) = 3.613.
        assert!((covering_radius(2.0, 2).unwrap() - 3.6131).abs() < 1e-4);
    }

    #[test]
    fn cloud_radius_on_grid() {
        // Axis and diagonal neighbours leave 45 degree gaps, which an open
        // 45 degree cone just fits into; the (2,1) neighbours at sqrt(5) h
        // close them.
        let mut pts = vec![];
        for i in -3i32..=3 {
            for j in -3i32..=3 {
                pts.push([0.1 * i as f64, 0.1 * j as f64, 0.0]);
            }
        }
        let n = pts.len();
        let kinds = (0..n)
            .map(|k| if k == n / 2 { PointKind::Interior } else { PointKind::Dirichlet })
            .collect();
        let c = PointCloud::new(2, pts, kinds, vec![None; n], vec![0.0; n]).unwrap();
        let r = cloud_cone_radius(&c, 0.15, 0.5, 1.05).unwrap().unwrap();
        assert!(r > 0.2236 && r < 0.2236 * 1.05 + 1e-9, "{r}");
        assert_eq!(cloud_cone_radius(&c, 0.15, 0.2, 1.05).unwrap(), None);
    }

    #[test]
    fn half_space_examples() {
        let hs = NeighborSet::from_offsets(2, vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        assert!(half_space_violation(&hs));
        let h = 0.1;
        let star = NeighborSet::from_offsets(
            2,
            vec![[h, 0.0, 0.0], [-h, 0.0, 0.0], [0.0, h, 0.0], [0.0, -h, 0.0]],
        );
        assert!(!half_space_violation(&star));
        assert!(!half_space_violation(&ring(2, &[0.0, 90.0, 180.0, 270.0, 9.0, 18.0])));
        // Closed half-space: two opposite points and one to the side.
        assert!(half_space_violation(&ring(2, &[0.0, 180.0, 90.0])));
        assert!(half_space_violation(&NeighborSet::from_offsets(1, vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])));
        assert!(!half_space_violation(&NeighborSet::from_offsets(1, vec![[1.0, 0.0, 0.0], [-2.0, 0.0, 0.0]])));
    }

    #[test]
    fn half_space_3d() {
        let axes: Vec<Point> = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        assert!(!half_space_violation(&NeighborSet::from_offsets(3, axes.clone())));
        // Drop -z: everything in z >= 0.
        assert!(half_space_violation(&NeighborSet::from_offsets(3, axes[..5].to_vec())));
        // Planar set never positively spans space.
        assert!(half_space_violation(&NeighborSet::from_offsets(3, axes[..4].to_vec())));
        // Tetrahedron vertices do.
        let tet = vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        assert!(!half_space_violation(&NeighborSet::from_offsets(3, tet)));
    }

    #[test]
    fn cone_2d_examples() {
        let c = ConeConstants::for_dim(2).unwrap();
        let sixteen: Vec<f64> = (0..16).map(|i| i as f64 * 22.5).collect();
        assert!(cone_criterion(&ring(2, &sixteen), &c).unwrap());
        assert!(!cone_criterion(&ring(2, &[0.0, 90.0, 180.0, 270.0]), &c).unwrap());
        let one_d = NeighborSet::from_offsets(1, vec![[1.0, 0.0, 0.0]]);
        assert!(cone_criterion(&one_d, &c).is_err());
    }

    #[test]
    fn icosphere_sizes() {
        assert_eq!(build_icosphere(0).len(), 12);
        assert_eq!(build_icosphere(4).len(), 2562);
        assert_eq!(icosphere(6).len(), 40962);
    }

    #[test]
    fn cone_3d() {
        let c = ConeConstants::for_dim(3).unwrap();
        let sparse = NeighborSet::from_offsets(3, build_icosphere(0));
        // 12 icosahedron vertices leave holes of about 37 degrees.
        assert_eq!(
            cone_criterion_with(&sparse, &c, &ConeSweep::default()).unwrap(),
            ConeVerdict::Violated
        );
        let dense = NeighborSet::from_offsets(3, build_icosphere(2));
        assert_eq!(
            cone_criterion_with(&dense, &c, &ConeSweep::default()).unwrap(),
            ConeVerdict::Satisfied
        );
    }
}
