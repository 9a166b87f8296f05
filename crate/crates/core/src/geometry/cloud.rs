use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{norm3, GeometryError, Point, Result};

/// Classification of a cloud point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    Interior,
    Dirichlet,
    Neumann,
}

/// Boundary condition assigned to a boundary segment of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// How the interior of a domain is populated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fill {
    /// `interior` points placed at random with a minimum separation of 0.7
    /// times the nominal spacing, relaxed in 10% steps if they do not fit.
    Count { interior: usize },
    /// Regular grid of spacing `h`; interior points are displaced by up to
    /// `jitter * h / 2` per coordinate.
    Spacing { h: f64, jitter: f64 },
}

/// The unit disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    /// Number of equidistant boundary points; `None` picks one matching the
    /// interior spacing.
    pub boundary: Option<usize>,
    pub fill: Fill,
    pub bc: BcKind,
    pub seed: u64,
}

impl DiskSpec {
    /// Dirichlet disk with `boundary` points on the circle and `interior`
    /// random points inside.
    pub fn random(boundary: usize, interior: usize, seed: u64) -> Self {
        Self {
            boundary: Some(boundary),
            fill: Fill::Count { interior },
            bc: BcKind::Dirichlet,
            seed,
        }
    }

    /// Dirichlet disk with the boundary count chosen from the interior spacing.
    pub fn with_interior(interior: usize, seed: u64) -> Self {
        Self {
            boundary: None,
            fill: Fill::Count { interior },
            bc: BcKind::Dirichlet,
            seed,
        }
    }
}

/// Axis-aligned box `[lo, hi]` in 1, 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
    pub fill: Fill,
    /// Conditions per face, ordered x-lo, x-hi, y-lo, y-hi, z-lo, z-hi.
    pub faces: Vec<BcKind>,
    pub seed: u64,
}

impl BoxSpec {
    /// `[0,1]^dim` with the same condition on every face.
    pub fn unit(dim: usize, fill: Fill, bc: BcKind) -> Self {
        Self {
            dim,
            lo: [0.0; 3],
            hi: [1.0, if dim > 1 { 1.0 } else { 0.0 }, if dim > 2 { 1.0 } else { 0.0 }],
            fill,
            faces: vec![bc; 2 * dim],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    Disk(DiskSpec),
    Box(BoxSpec),
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Disk(_) => 2,
            DomainSpec::Box(b) => b.dim,
        }
    }

    pub fn bounds(&self) -> (Point, Point) {
        match self {
            DomainSpec::Disk(_) => ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
            DomainSpec::Box(b) => (b.lo, b.hi),
        }
    }

    /// Membership in the closed domain.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            DomainSpec::Disk(_) => p[0] * p[0] + p[1] * p[1] <= 1.0,
            DomainSpec::Box(b) => (0..b.dim).all(|k| p[k] >= b.lo[k] && p[k] <= b.hi[k]),
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            DomainSpec::Disk(_) => std::f64::consts::PI,
            DomainSpec::Box(b) => (0..b.dim).map(|k| b.hi[k] - b.lo[k]).product(),
        }
    }

    /// Deterministic, nested boundary sample: the first `count` points of
    /// the sequence for `count` are a prefix of those for any larger count.
    pub(crate) fn boundary_samples(&self, per_dim: usize) -> Vec<Point> {
        match self {
            DomainSpec::Disk(_) => (0..4 * per_dim)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * radical_inverse(i as u64 + 1, 2);
                    [t.cos(), t.sin(), 0.0]
                })
                .collect(),
            DomainSpec::Box(b) => {
                let d = b.dim;
                let mut out = Vec::new();
                for mask in 0..(1usize << d) {
                    let mut p = [0.0; 3];
                    for k in 0..d {
                        p[k] = if mask >> k & 1 == 1 { b.hi[k] } else { b.lo[k] };
                    }
                    out.push(p);
                }
                if d == 1 {
                    return out;
                }
                let face_count = per_dim.pow(d as u32 - 1);
                for axis in 0..d {
                    let free: Vec<usize> = (0..d).filter(|&k| k != axis).collect();
                    for side in [b.lo[axis], b.hi[axis]] {
                        for i in 0..face_count {
                            let mut p = [0.0; 3];
                            p[axis] = side;
                            for (q, &k) in free.iter().enumerate() {
                                let t = radical_inverse(i as u64 + 1, [2, 3][q]);
                                p[k] = b.lo[k] + t * (b.hi[k] - b.lo[k]);
                            }
                            out.push(p);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn generate(&self) -> Result<PointCloud> {
        match self {
            DomainSpec::Disk(s) => generate_disk(s),
            DomainSpec::Box(s) => generate_box(s),
        }
    }
}

/// van der Corput radical inverse of `i` in `base`.
pub(crate) fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn check_fill(fill: &Fill) -> Result<()> {
    match *fill {
        Fill::Count { .. } => Ok(()),
        Fill::Spacing { h, jitter } => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(GeometryError::InvalidArgument(format!("spacing {h}")));
            }
            if !(0.0..0.5).contains(&jitter) {
                return Err(GeometryError::InvalidJitter(jitter));
            }
            Ok(())
        }
    }
}

/// Hash grid used to enforce a minimum separation while sampling.
struct SeparationGrid {
    cell: f64,
    min_sep: f64,
    cells: HashMap<[i64; 3], Vec<Point>>,
}

impl SeparationGrid {
    fn new(min_sep: f64) -> Self {
        Self {
            cell: min_sep,
            min_sep,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &Point) -> [i64; 3] {
        [
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
            (p[2] / self.cell).floor() as i64,
        ]
    }

    fn is_free(&self, p: &Point) -> bool {
        let k = self.key(p);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(v) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if v.iter().any(|q| super::dist(p, q) < self.min_sep) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: Point) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push(p);
    }
}

/// Rejection sampling into `out` until it holds `target` points, keeping those
/// accepted by `keep` and at least the grid separation away from everything
/// already in `grid`.
fn sample_separated(
    rng: &mut ChaCha8Rng,
    grid: &mut SeparationGrid,
    out: &mut Vec<Point>,
    target: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Point,
    keep: impl Fn(&Point) -> bool,
) -> Result<()> {
    let max_attempts = 100 * target + 10_000;
    let mut attempts = 0;
    while out.len() < target {
        if attempts == max_attempts {
            return Err(GeometryError::TargetUnreachable {
                requested: target,
                achieved: out.len(),
            });
        }
        attempts += 1;
        let p = draw(rng);
        if keep(&p) && grid.is_free(&p) {
            grid.insert(p);
            out.push(p);
        }
    }
    Ok(())
}

/// Separated sampling that shrinks the separation by 10% whenever the target
/// cannot be reached (small or thin domains), keeping the points placed so far.
fn fill_separated(
    rng: &mut ChaCha8Rng,
    fixed: &[Point],
    min_sep: f64,
    target: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Point,
    keep: impl Fn(&Point) -> bool,
) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(target);
    let mut sep = min_sep;
    let mut last = Ok(());
    for _ in 0..8 {
        let mut grid = SeparationGrid::new(sep);
        for p in fixed.iter().chain(&out) {
            grid.insert(*p);
        }
        last = sample_separated(rng, &mut grid, &mut out, target, &mut draw, &keep);
        if last.is_ok() {
            return Ok(out);
        }
        sep *= 0.9;
    }
    last.map(|_| out)
}

fn generate_disk(spec: &DiskSpec) -> Result<PointCloud> {
    check_fill(&spec.fill)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spacing = match spec.fill {
        Fill::Count { interior } => {
            if interior == 0 {
                return Err(GeometryError::EmptyDomain);
            }
            (std::f64::consts::PI / interior as f64).sqrt()
        }
        Fill::Spacing { h, .. } => h,
    };
    let nb = spec
        .boundary
        .unwrap_or_else(|| (1.14 * 2.0 * std::f64::consts::PI / spacing).round() as usize);
    if nb < 3 {
        return Err(GeometryError::InvalidArgument(format!(
            "{nb} boundary points cannot resolve a circle"
        )));
    }
    let mut points = Vec::new();
    let mut kinds = Vec::new();
    let mut normals = Vec::new();
    let bkind = match spec.bc {
        BcKind::Dirichlet => PointKind::Dirichlet,
        BcKind::Neumann => PointKind::Neumann,
    };
    for i in 0..nb {
        let t = 2.0 * std::f64::consts::PI * i as f64 / nb as f64;
        let p = [t.cos(), t.sin(), 0.0];
        points.push(p);
        kinds.push(bkind);
        normals.push((bkind == PointKind::Neumann).then_some(p));
    }
    let interior = match spec.fill {
        Fill::Count { interior } => {
            let rmax = 1.0 - 0.35 * spacing;
            fill_separated(
                &mut rng,
                &points,
                0.7 * spacing,
                interior,
                |r| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), 0.0],
                |p| p[0] * p[0] + p[1] * p[1] <= rmax * rmax,
            )?
        }
        Fill::Spacing { h, jitter } => {
            let n = (1.0 / h).ceil() as i64;
            let rmax = 1.0 - 0.5 * h;
            let mut v = Vec::new();
            for j in -n..=n {
                for i in -n..=n {
                    let mut p = [i as f64 * h, j as f64 * h, 0.0];
                    if p[0] * p[0] + p[1] * p[1] > rmax * rmax {
                        continue;
                    }
                    if jitter > 0.0 {
                        for c in p.iter_mut().take(2) {
                            *c += jitter * h * (rng.random::<f64>() - 0.5);
                        }
                    }
                    v.push(p);
                }
            }
            v
        }
    };
    if interior.is_empty() {
        return Err(GeometryError::EmptyDomain);
    }
    for p in interior {
        points.push(p);
        kinds.push(PointKind::Interior);
        normals.push(None);
    }
    let n = points.len();
    PointCloud::new(2, points, kinds, normals, vec![0.0; n])
}

fn generate_box(spec: &BoxSpec) -> Result<PointCloud> {
    check_fill(&spec.fill)?;
    let d = spec.dim;
    if !(1..=3).contains(&d) {
        return Err(GeometryError::UnsupportedDimension(d));
    }
    if spec.faces.len() != 2 * d {
        return Err(GeometryError::InvalidArgument(format!(
            "expected {} face conditions, got {}",
            2 * d,
            spec.faces.len()
        )));
    }
    let extent: Vec<f64> = (0..d).map(|k| spec.hi[k] - spec.lo[k]).collect();
    if extent.iter().any(|e| !(*e > 0.0)) {
        return Err(GeometryError::EmptyDomain);
    }
    let volume: f64 = extent.iter().product();
    let (h, jitter, random_interior) = match spec.fill {
        Fill::Spacing { h, jitter } => (h, jitter, None),
        Fill::Count { interior } => {
            if interior == 0 {
                return Err(GeometryError::EmptyDomain);
            }
            ((volume / interior as f64).powf(1.0 / d as f64), 0.0, Some(interior))
        }
    };
    let counts: Vec<usize> = extent
        .iter()
        .map(|e| ((e / h).round() as usize).max(1))
        .collect();
    let step: Vec<f64> = (0..d).map(|k| extent[k] / counts[k] as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut points = Vec::new();
    let mut kinds = Vec::new();
    let mut normals = Vec::new();
    let mut idx = [0usize; 3];
    let total: usize = counts.iter().map(|c| c + 1).product();
    for _ in 0..total {
        let mut p = [0.0; 3];
        for k in 0..d {
            p[k] = if idx[k] == counts[k] {
                spec.hi[k]
            } else {
                spec.lo[k] + idx[k] as f64 * step[k]
            };
        }
        // Faces this grid point lies on.
        let mut on_dirichlet = false;
        let mut on_any = false;
        let mut normal = [0.0; 3];
        for k in 0..d {
            for (side, at) in [(0usize, idx[k] == 0), (1, idx[k] == counts[k])] {
                if at {
                    on_any = true;
                    match spec.faces[2 * k + side] {
                        BcKind::Dirichlet => on_dirichlet = true,
                        BcKind::Neumann => normal[k] += if side == 0 { -1.0 } else { 1.0 },
                    }
                }
            }
        }
        if on_any {
            if on_dirichlet {
                kinds.push(PointKind::Dirichlet);
                normals.push(None);
            } else {
                let len = norm3(&normal);
                kinds.push(PointKind::Neumann);
                normals.push(Some([normal[0] / len, normal[1] / len, normal[2] / len]));
            }
            points.push(p);
        } else if random_interior.is_none() {
            if jitter > 0.0 {
                for k in 0..d {
                    p[k] += jitter * step[k] * (rng.random::<f64>() - 0.5);
                }
            }
            points.push(p);
            kinds.push(PointKind::Interior);
            normals.push(None);
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] <= counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    if let Some(target) = random_interior {
        let (lo, hi) = (spec.lo, spec.hi);
        let margin = 0.35 * h;
        let interior = fill_separated(
            &mut rng,
            &points,
            0.7 * h,
            target,
            |r| {
                let mut p = [0.0; 3];
                for k in 0..d {
                    p[k] = r.random_range(lo[k]..hi[k]);
                }
                p
            },
            |p| (0..d).all(|k| p[k] - lo[k] >= margin && hi[k] - p[k] >= margin),
        )?;
        for p in interior {
            points.push(p);
            kinds.push(PointKind::Interior);
            normals.push(None);
        }
    }
    if !kinds.contains(&PointKind::Interior) {
        return Err(GeometryError::EmptyDomain);
    }
    let n = points.len();
    PointCloud::new(d, points, kinds, normals, vec![0.0; n])
}

/// Immutable point cloud with boundary classification.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Point>,
    kinds: Vec<PointKind>,
    normals: Vec<Option<Point>>,
    bc_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CloudFile {
    dim: usize,
    points: Vec<Vec<f64>>,
    kinds: Vec<PointKind>,
    normals: Vec<Option<Vec<f64>>>,
    bc_values: Vec<f64>,
}

impl PointCloud {
    pub fn new(
        dim: usize,
        points: Vec<Point>,
        kinds: Vec<PointKind>,
        normals: Vec<Option<Point>>,
        bc_values: Vec<f64>,
    ) -> Result<Self> {
        let cloud = Self {
            dim,
            points,
            kinds,
            normals,
            bc_values,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Interior-only cloud, convenient for tests.
    pub fn from_points(dim: usize, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(dim, points, vec![PointKind::Interior; n], vec![None; n], vec![0.0; n])
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeometryError::InvalidCloud(m));
        if !(1..=3).contains(&self.dim) {
            return Err(GeometryError::UnsupportedDimension(self.dim));
        }
        let n = self.points.len();
        if n == 0 {
            return Err(GeometryError::EmptyCloud);
        }
        if self.kinds.len() != n || self.normals.len() != n || self.bc_values.len() != n {
            return bad("per-point arrays differ in length".into());
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) || p[self.dim..].iter().any(|&c| c != 0.0) {
                return bad(format!("point {i} has invalid coordinates"));
            }
            match (self.kinds[i], &self.normals[i]) {
                (PointKind::Neumann, Some(nv)) => {
                    if (norm3(nv) - 1.0).abs() > 1e-12 || nv[self.dim..].iter().any(|&c| c != 0.0) {
                        return bad(format!("normal of point {i} is not a unit vector"));
                    }
                }
                (PointKind::Neumann, None) => return bad(format!("point {i} lacks a normal")),
                (_, Some(_)) => return bad(format!("non-Neumann point {i} carries a normal")),
                _ => {}
            }
            if !self.bc_values[i].is_finite() {
                return bad(format!("boundary value of point {i} is not finite"));
            }
        }
        // Any pair closer than 1e-14 is also that close in x.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.points[a][0].total_cmp(&self.points[b][0]));
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if self.points[j][0] - self.points[i][0] > 1e-14 {
                    break;
                }
                if super::dist(&self.points[i], &self.points[j]) <= 1e-14 {
                    return bad(format!("points {i} and {j} coincide"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn kind(&self, i: usize) -> PointKind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[PointKind] {
        &self.kinds
    }

    pub fn normal(&self, i: usize) -> Option<&Point> {
        self.normals[i].as_ref()
    }

    pub fn bc_value(&self, i: usize) -> f64 {
        self.bc_values[i]
    }

    pub fn bc_values(&self) -> &[f64] {
        &self.bc_values
    }

    pub fn count(&self, kind: PointKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn indices_of(&self, kind: PointKind) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kinds[i] == kind).collect()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..self.dim {
            lo[k] = self.points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            hi[k] = self.points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        }
        (lo, hi)
    }

    /// Index of the point closest to `p` (linear scan; ties to the lower index).
    pub fn nearest_index(&self, p: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.points.iter().enumerate() {
            let d = super::dist(p, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Fills boundary values: `dirichlet(x)` at Dirichlet points and
    /// `neumann(x, n)` (outward normal derivative) at Neumann points.
    pub fn with_boundary_data(
        mut self,
        dirichlet: impl Fn(&Point) -> f64,
        neumann: impl Fn(&Point, &Point) -> f64,
    ) -> Self {
        for i in 0..self.len() {
            self.bc_values[i] = match self.kinds[i] {
                PointKind::Interior => 0.0,
                PointKind::Dirichlet => dirichlet(&self.points[i]),
                PointKind::Neumann => neumann(&self.points[i], self.normals[i].as_ref().unwrap()),
            };
        }
        self
    }

    fn to_file(&self) -> CloudFile {
        let d = self.dim;
        CloudFile {
            dim: d,
            points: self.points.iter().map(|p| p[..d].to_vec()).collect(),
            kinds: self.kinds.clone(),
            normals: self
                .normals
                .iter()
                .map(|n| n.map(|v| v[..d].to_vec()))
                .collect(),
            bc_values: self.bc_values.clone(),
        }
    }

    fn from_file(f: CloudFile) -> Result<Self> {
        let lift = |v: &[f64]| -> Result<Point> {
            if v.len() != f.dim {
                return Err(GeometryError::InvalidCloud(format!(
                    "coordinate vector of length {} in a {}d cloud",
                    v.len(),
                    f.dim
                )));
            }
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            Ok(p)
        };
        let points = f.points.iter().map(|p| lift(p)).collect::<Result<_>>()?;
        let normals = f
            .normals
            .iter()
            .map(|n| n.as_deref().map(lift).transpose())
            .collect::<Result<_>>()?;
        Self::new(f.dim, points, f.kinds, normals, f.bc_values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("cloud serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer(w, &self.to_file())?;
        Ok(())
    }

    pub fn read_json(r: impl Read) -> Result<Self> {
        Self::from_file(serde_json::from_reader(r)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_json(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// One row per point: coordinates then kind.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = ["x", "y", "z"][..self.dim].to_vec();
        header.push("kind");
        out.write_record(&header)?;
        for (p, k) in self.points.iter().zip(&self.kinds) {
            let mut rec: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:?}")).collect();
            rec.push(format!("{k:?}"));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_sized_disk() {
        let c = DomainSpec::Disk(DiskSpec::random(256, 4000, 1)).generate().unwrap();
        assert_eq!(c.len(), 4256);
        assert_eq!(c.count(PointKind::Dirichlet), 256);
        for i in c.indices_of(PointKind::Dirichlet) {
            assert!((norm3(c.point(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn automatic_boundary_count() {
        let c = DomainSpec::Disk(DiskSpec::with_interior(4000, 1)).generate().unwrap();
        assert_eq!(c.count(PointKind::Dirichlet), 256);
    }

    #[test]
    fn random_fill_respects_separation() {
        let c = DomainSpec::Disk(DiskSpec::random(64, 500, 2)).generate().unwrap();
        let s = (std::f64::consts::PI / 500.0).sqrt();
        for i in 0..c.len() {
            for j in 0..i {
                if c.kind(i) == PointKind::Interior || c.kind(j) == PointKind::Interior {
                    assert!(super::super::dist(c.point(i), c.point(j)) >= 0.7 * s);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let a = DomainSpec::Disk(DiskSpec::random(40, 300, 7)).generate().unwrap();
        let b = DomainSpec::Disk(DiskSpec::random(40, 300, 7)).generate().unwrap();
        let c = DomainSpec::Disk(DiskSpec::random(40, 300, 8)).generate().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn unreachable_target_reports_achieved() {
        // At most a handful of points with separation 0.5 fit in the unit square.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut grid = SeparationGrid::new(0.5);
        let mut out = vec![];
        let res = sample_separated(
            &mut rng,
            &mut grid,
            &mut out,
            100,
            |r| [r.random::<f64>(), r.random::<f64>(), 0.0],
            |_| true,
        );
        match res {
            Err(GeometryError::TargetUnreachable { requested, achieved }) => {
                assert_eq!(requested, 100);
                assert!((1..=9).contains(&achieved));
                assert_eq!(out.len(), achieved);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Relaxing the separation eventually fits 12 points, but not 1000.
        let pts = fill_separated(&mut rng, &[], 0.5, 12, |r| [r.random::<f64>(), r.random::<f64>(), 0.0], |_| true)
            .unwrap();
        assert_eq!(pts.len(), 12);
        assert!(fill_separated(&mut rng, &[], 0.5, 1000, |r| [r.random::<f64>(), r.random::<f64>(), 0.0], |_| true)
            .is_err());
    }

    #[test]
    fn unit_interval_grid() {
        let c = DomainSpec::Box(BoxSpec::unit(
            1,
            Fill::Spacing { h: 0.25, jitter: 0.0 },
            BcKind::Dirichlet,
        ))
        .generate()
        .unwrap();
        let xs: Vec<f64> = c.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        use PointKind::*;
        assert_eq!(c.kinds(), &[Dirichlet, Interior, Interior, Interior, Dirichlet]);
    }

    #[test]
    fn square_grid_count() {
        for h in [0.5, 0.25, 0.1] {
            let c = DomainSpec::Box(BoxSpec::unit(2, Fill::Spacing { h, jitter: 0.0 }, BcKind::Dirichlet))
                .generate()
                .unwrap();
            let m = (1.0 / h).round() as usize + 1;
            assert_eq!(c.len(), m * m);
        }
    }

    #[test]
    fn jitter_is_validated() {
        let spec = BoxSpec::unit(2, Fill::Spacing { h: 0.1, jitter: 0.5 }, BcKind::Dirichlet);
        assert!(matches!(
            DomainSpec::Box(spec).generate(),
            Err(GeometryError::InvalidJitter(_))
        ));
    }

    #[test]
    fn mixed_faces_and_normals() {
        let mut spec = BoxSpec::unit(3, Fill::Spacing { h: 0.25, jitter: 0.2 }, BcKind::Neumann);
        spec.faces[1] = BcKind::Dirichlet;
        let c = DomainSpec::Box(spec).generate().unwrap();
        assert_eq!(c.count(PointKind::Dirichlet), 25);
        assert_eq!(c.count(PointKind::Interior), 27);
        let corner = c.nearest_index(&[0.0, 0.0, 0.0]);
        let nv = c.normal(corner).unwrap();
        let t = -1.0 / 3f64.sqrt();
        assert!((nv[0] - t).abs() < 1e-15 && (nv[1] - t).abs() < 1e-15 && (nv[2] - t).abs() < 1e-15);
        let face = c.nearest_index(&[0.5, 0.0, 0.5]);
        assert_eq!(c.normal(face), Some(&[0.0, -1.0, 0.0]));
    }

    #[test]
    fn json_round_trip_and_csv() {
        let c = DomainSpec::Box(BoxSpec::unit(2, Fill::Spacing { h: 0.5, jitter: 0.0 }, BcKind::Neumann))
            .generate()
            .unwrap()
            .with_boundary_data(|p| p[0], |_, n| n[0] + 2.0 * n[1]);
        let back = PointCloud::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,kind"));
        assert_eq!(lines.next(), Some("0.0,0.0,Neumann"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn validation_rejects_bad_clouds() {
        let dup = PointCloud::from_points(2, vec![[0.0, 0.0, 0.0], [0.0, 5e-15, 0.0]]);
        assert!(matches!(dup, Err(GeometryError::InvalidCloud(_))));
        let nan = PointCloud::from_points(2, vec![[f64::NAN, 0.0, 0.0]]);
        assert!(nan.is_err());
        let bad_normal = PointCloud::new(
            1,
            vec![[0.0; 3]],
            vec![PointKind::Neumann],
            vec![Some([0.5, 0.0, 0.0])],
            vec![0.0],
        );
        assert!(bad_normal.is_err());
        assert!(matches!(PointCloud::from_points(2, vec![]), Err(GeometryError::EmptyCloud)));
    }
}
