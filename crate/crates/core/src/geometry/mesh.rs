use rayon::prelude::*;

use super::cloud::radical_inverse;
use super::{DomainSpec, GeometryError, NeighborSearch, Point, PointCloud, Result};

pub const DEFAULT_MESH_SAMPLES: usize = 128;

const HALTON_BASES: [u64; 3] = [2, 3, 5];

/// Estimates the mesh size: twice the largest distance from a sample of the
/// closed domain to its nearest cloud point.
///
/// The sample is a Halton sequence of `samples_per_dim^d` points in the
/// bounding box plus a nested boundary sample; raising `samples_per_dim` only
/// adds samples, so the estimate never decreases and approaches the true
/// covering diameter from below.
pub fn mesh_size(cloud: &PointCloud, domain: &DomainSpec, samples_per_dim: usize) -> Result<f64> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    if samples_per_dim < 16 {
        return Err(GeometryError::InvalidArgument(format!(
            "samples_per_dim = {samples_per_dim} (need at least 16)"
        )));
    }
    let d = domain.dim();
    if d != cloud.dim() {
        return Err(GeometryError::InvalidArgument(format!(
            "{}d cloud in a {d}d domain",
            cloud.dim()
        )));
    }
    let (lo, hi) = domain.bounds();
    let count = samples_per_dim.pow(d as u32);
    let search = NeighborSearch::for_cloud(cloud);
    let farthest = |p: &Point| search.nearest(p).map_or(0.0, |(dist, _)| dist);

    let interior = (1..=count as u64)
        .into_par_iter()
        .map(|i| {
            let mut p = [0.0; 3];
            for k in 0..d {
                p[k] = lo[k] + radical_inverse(i, HALTON_BASES[k]) * (hi[k] - lo[k]);
            }
            p
        })
        .filter(|p| domain.contains(p))
        .map(|p| farthest(&p))
        .reduce(|| 0.0, f64::max);
    let boundary = domain
        .boundary_samples(samples_per_dim)
        .par_iter()
        .map(farthest)
        .reduce(|| 0.0, f64::max);
    Ok(2.0 * interior.max(boundary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BcKind, BoxSpec, DiskSpec, Fill};

    fn grid(dim: usize, h: f64) -> (PointCloud, DomainSpec) {
        let spec = DomainSpec::Box(BoxSpec::unit(dim, Fill::Spacing { h, jitter: 0.0 }, BcKind::Dirichlet));
        (spec.generate().unwrap(), spec)
    }

    #[test]
    fn interval_spacing() {
        let (c, d) = grid(1, 0.1);
        let h = mesh_size(&c, &d, 4096).unwrap();
        assert!(h <= 0.1 + 1e-12 && h > 0.0995, "{h}");
    }

    #[test]
    fn square_grid_diagonal() {
        let a = 0.25;
        let (c, d) = grid(2, a);
        let h = mesh_size(&c, &d, 128).unwrap();
        // Dense lattice oracle at ten times the resolution.
        let m = 1280;
        let mut worst: f64 = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                let p = [i as f64 / m as f64, j as f64 / m as f64, 0.0];
                let near = c.points().iter().map(|q| super::super::dist(&p, q)).fold(f64::INFINITY, f64::min);
                worst = worst.max(near);
            }
        }
        let oracle = 2.0 * worst;
        assert!((oracle - a * 2f64.sqrt()).abs() < 1e-12);
        assert!(h <= oracle + 1e-12);
        assert!(h > 0.98 * oracle, "{h} vs {oracle}");
    }

    #[test]
    fn single_point_in_disk() {
        let c = PointCloud::from_points(2, vec![[0.0; 3]]).unwrap();
        let d = DomainSpec::Disk(DiskSpec::random(8, 1, 0));
        let h = mesh_size(&c, &d, 16).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_samples() {
        let d = DomainSpec::Disk(DiskSpec::random(48, 300, 4));
        let c = d.generate().unwrap();
        let mut prev = 0.0;
        for s in [16, 24, 32, 48, 64, 96, 128] {
            let h = mesh_size(&c, &d, s).unwrap();
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn rejects_coarse_sampling() {
        let (c, d) = grid(2, 0.5);
        assert!(mesh_size(&c, &d, 8).is_err());
    }
}
