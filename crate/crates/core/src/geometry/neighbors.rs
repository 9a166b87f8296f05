use super::{dist, sub, Point, PointCloud};

/// Neighbourhood of one cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub dim: usize,
    pub center: usize,
    pub neighbors: Vec<usize>,
    /// `x_i - x_center` for each neighbour.
    pub offsets: Vec<Point>,
    pub distances: Vec<f64>,
}

impl NeighborSet {
    /// Builds a neighbourhood directly from offsets, with synthetic neighbour
    /// indices `1..=m` (used for isolated stencil studies).
    pub fn from_offsets(dim: usize, offsets: Vec<Point>) -> Self {
        let distances = offsets.iter().map(super::norm3).collect();
        Self {
            dim,
            center: 0,
            neighbors: (1..=offsets.len()).collect(),
            offsets,
            distances,
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    fn from_sorted(cloud: &PointCloud, center: usize, mut found: Vec<(f64, usize)>) -> Self {
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let x0 = cloud.point(center);
        let offsets = found.iter().map(|&(_, j)| sub(cloud.point(j), x0)).collect();
        Self {
            dim: cloud.dim(),
            center,
            neighbors: found.iter().map(|&(_, j)| j).collect(),
            offsets,
            distances: found.iter().map(|&(d, _)| d).collect(),
        }
    }
}

/// Uniform bucket grid over a point cloud.
#[derive(Debug, Clone)]
pub struct NeighborSearch<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    origin: Point,
    dims: [usize; 3],
    cell_start: Vec<usize>,
    entries: Vec<usize>,
}

impl<'a> NeighborSearch<'a> {
    /// Builds the bucket grid with the given cell size.
    pub fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let d = cloud.dim();
        let (lo, hi) = cloud.bounding_box();
        let mut dims = [1usize; 3];
        for k in 0..d {
            let extent = hi[k] - lo[k];
            // Cap the bucket count so degenerate inputs cannot explode memory.
            dims[k] = ((extent / cell).floor() as usize + 1).min(1 << 12);
        }
        let cell = (0..d)
            .map(|k| (hi[k] - lo[k]) / dims[k] as f64)
            .fold(cell, f64::max);
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; n_cells + 1];
        let keys: Vec<usize> = (0..cloud.len())
            .map(|i| Self::key_of(&dims, &lo, cell, d, cloud.point(i)))
            .collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut entries = vec![0; cloud.len()];
        for (i, &k) in keys.iter().enumerate() {
            entries[next[k]] = i;
            next[k] += 1;
        }
        Self {
            cloud,
            cell,
            origin: lo,
            dims,
            cell_start: counts,
            entries,
        }
    }

    /// Grid sized for radius queries of roughly `radius`.
    pub fn for_radius(cloud: &'a PointCloud, radius: f64) -> Self {
        Self::new(cloud, radius)
    }

    /// Grid sized to the mean point spacing (for nearest queries).
    pub fn for_cloud(cloud: &'a PointCloud) -> Self {
        let d = cloud.dim();
        let (lo, hi) = cloud.bounding_box();
        let vol: f64 = (0..d).map(|k| (hi[k] - lo[k]).max(1e-300)).product();
        let spacing = (vol / cloud.len().max(1) as f64).powf(1.0 / d as f64);
        let spacing = if spacing.is_finite() && spacing > 0.0 {
            spacing
        } else {
            1.0
        };
        Self::new(cloud, spacing)
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    fn key_of(dims: &[usize; 3], lo: &Point, cell: f64, d: usize, p: &Point) -> usize {
        let c = Self::coords_of(dims, lo, cell, d, p);
        (c[2] * dims[1] + c[1]) * dims[0] + c[0]
    }

    fn coords_of(dims: &[usize; 3], lo: &Point, cell: f64, d: usize, p: &Point) -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..d {
            let t = ((p[k] - lo[k]) / cell).floor();
            c[k] = if t <= 0.0 {
                0
            } else {
                (t as usize).min(dims[k] - 1)
            };
        }
        c
    }

    /// Visits all points in cells within `reach` cells (Chebyshev) of `home`.
    fn visit_block(&self, home: [usize; 3], reach: usize, mut f: impl FnMut(usize)) {
        let lo_hi = |k: usize| {
            let lo = home[k].saturating_sub(reach);
            let hi = (home[k] + reach).min(self.dims[k] - 1);
            (lo, hi)
        };
        let (x0, x1) = lo_hi(0);
        let (y0, y1) = lo_hi(1);
        let (z0, z1) = lo_hi(2);
        for z in z0..=z1 {
            for y in y0..=y1 {
                let base = (z * self.dims[1] + y) * self.dims[0];
                for x in x0..=x1 {
                    let c = base + x;
                    for &i in &self.entries[self.cell_start[c]..self.cell_start[c + 1]] {
                        f(i);
                    }
                }
            }
        }
    }

    /// Visits the points in the shell of cells at Chebyshev distance exactly `ring`.
    fn visit_ring(&self, home: [usize; 3], ring: usize, mut f: impl FnMut(usize)) {
        if ring == 0 {
            return self.visit_block(home, 0, f);
        }
        let d = self.cloud.dim();
        let lo_hi = |k: usize| {
            if k >= d {
                return (0isize, 0isize);
            }
            let lo = home[k] as isize - ring as isize;
            let hi = home[k] as isize + ring as isize;
            (lo, hi)
        };
        let (x0, x1) = lo_hi(0);
        let (y0, y1) = lo_hi(1);
        let (z0, z1) = lo_hi(2);
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let on_shell = (d > 0 && (x == x0 || x == x1))
                        || (d > 1 && (y == y0 || y == y1))
                        || (d > 2 && (z == z0 || z == z1));
                    if !on_shell
                        || x < 0
                        || y < 0
                        || z < 0
                        || x as usize >= self.dims[0]
                        || y as usize >= self.dims[1]
                        || z as usize >= self.dims[2]
                    {
                        continue;
                    }
                    let c = (z as usize * self.dims[1] + y as usize) * self.dims[0] + x as usize;
                    for &i in &self.entries[self.cell_start[c]..self.cell_start[c + 1]] {
                        f(i);
                    }
                }
            }
        }
    }

    fn home(&self, p: &Point) -> [usize; 3] {
        Self::coords_of(&self.dims, &self.origin, self.cell, self.cloud.dim(), p)
    }

    /// Cloud points `j` with `0 < |x_j - p| <= radius`, as `(distance, index)`.
    pub fn within_point(&self, p: &Point, radius: f64) -> Vec<(f64, usize)> {
        let reach = (radius / self.cell).ceil() as usize;
        let mut found = Vec::new();
        self.visit_block(self.home(p), reach, |j| {
            let d = dist(self.cloud.point(j), p);
            if d > 0.0 && d <= radius {
                found.push((d, j));
            }
        });
        found
    }

    /// Neighbourhood of `center`: all points at distance in `(0, radius]`,
    /// sorted by distance, ties by index.
    pub fn within(&self, center: usize, radius: f64) -> NeighborSet {
        let found = self.within_point(self.cloud.point(center), radius);
        NeighborSet::from_sorted(self.cloud, center, found)
    }

    /// The `k` nearest points to `center` (excluding itself and coincident points).
    pub fn nearest_k(&self, center: usize, k: usize) -> NeighborSet {
        let p = *self.cloud.point(center);
        let found = self.k_nearest_point(&p, k, Some(center));
        NeighborSet::from_sorted(self.cloud, center, found)
    }

    fn k_nearest_point(&self, p: &Point, k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let home = self.home(p);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        let mut cand: Vec<(f64, usize)> = Vec::new();
        for ring in 0..=max_ring {
            self.visit_ring(home, ring, |j| {
                if Some(j) == exclude {
                    return;
                }
                let d = dist(self.cloud.point(j), p);
                if d > 0.0 || exclude.is_none() {
                    cand.push((d, j));
                }
            });
            if cand.len() >= k {
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                // Everything outside the visited block is at least `ring * cell` away.
                if cand[k - 1].0 < ring as f64 * self.cell {
                    break;
                }
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand
    }

    /// Nearest cloud point to an arbitrary location: `(distance, index)`.
    pub fn nearest(&self, p: &Point) -> Option<(f64, usize)> {
        self.k_nearest_point(p, 1, None).into_iter().next()
    }
}

/// Exhaustive-free neighbourhood query with a bucket grid of cell size `radius`.
pub fn find_neighbors(cloud: &PointCloud, center: usize, radius: f64) -> NeighborSet {
    assert!(radius > 0.0, "radius must be positive");
    NeighborSearch::for_radius(cloud, radius).within(center, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BcKind, BoxSpec, DiskSpec, DomainSpec, Fill};

    fn grid(h: f64) -> PointCloud {
        DomainSpec::Box(BoxSpec::unit(2, Fill::Spacing { h, jitter: 0.0 }, BcKind::Dirichlet))
            .generate()
            .unwrap()
    }

    fn brute(cloud: &PointCloud, c: usize, r: f64) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = (0..cloud.len())
            .filter_map(|j| {
                let d = dist(cloud.point(j), cloud.point(c));
                (d > 0.0 && d <= r).then_some((d, j))
            })
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|x| x.1).collect()
    }

    #[test]
    fn grid_eight_neighbors() {
        let h = 0.125;
        let cloud = grid(h);
        let c = cloud.nearest_index(&[0.5, 0.5, 0.0]);
        let ns = find_neighbors(&cloud, c, 1.5 * h);
        assert_eq!(ns.len(), 8);
        for d in &ns.distances[..4] {
            assert!((d - h).abs() < 1e-12);
        }
        for d in &ns.distances[4..] {
            assert!((d - h * 2f64.sqrt()).abs() < 1e-12);
        }
        assert!(find_neighbors(&cloud, c, 0.5 * h).is_empty());
    }

    #[test]
    fn disk_matches_brute_force() {
        let cloud = DomainSpec::Disk(DiskSpec::random(64, 600, 5)).generate().unwrap();
        let r = 0.17;
        let search = NeighborSearch::for_radius(&cloud, r);
        for c in (0..cloud.len()).step_by(37) {
            let ns = search.within(c, r);
            assert_eq!(ns.neighbors, brute(&cloud, c, r));
            assert!(ns.distances.iter().all(|&d| d <= r));
            assert!(!ns.neighbors.contains(&c));
        }
    }

    #[test]
    fn k_nearest_matches_brute_force() {
        let cloud = DomainSpec::Disk(DiskSpec::random(40, 300, 9)).generate().unwrap();
        let search = NeighborSearch::for_cloud(&cloud);
        for c in (0..cloud.len()).step_by(13) {
            let ns = search.nearest_k(c, 12);
            let all = brute(&cloud, c, 10.0);
            assert_eq!(ns.neighbors, all[..12].to_vec());
        }
    }

    #[test]
    fn offsets_are_exact_differences() {
        let cloud = grid(0.25);
        let ns = find_neighbors(&cloud, 12, 0.3);
        for (j, off) in ns.neighbors.iter().zip(&ns.offsets) {
            assert_eq!(*off, sub(cloud.point(*j), cloud.point(12)));
        }
    }
}
