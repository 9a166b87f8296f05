//! Point clouds, neighbourhoods and the geometric predicates that govern the
//! existence of positive Laplace stencils.

mod cloud;
mod feasibility;
mod mesh;
mod neighbors;

pub use cloud::{BcKind, DiskSpec, DomainSpec, BoxSpec, Fill, PointCloud, PointKind};
pub use feasibility::{
    candidate_radius, candidate_radius_with_margin, cloud_cone_radius, cone_criterion, cone_criterion_with,
    covering_radius,
    half_space_violation, ConeConstants, ConeSweep, ConeVerdict,
};
pub use mesh::{mesh_size, DEFAULT_MESH_SAMPLES};
pub use neighbors::{find_neighbors, NeighborSearch, NeighborSet};

use thiserror::Error;

/// Coordinates in up to three dimensions; unused trailing entries are zero.
pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("domain is empty")]
    EmptyDomain,
    #[error("jitter {0} outside [0, 0.5)")]
    InvalidJitter(f64),
    #[error("could only place {achieved} of {requested} interior points")]
    TargetUnreachable { requested: usize, achieved: usize },
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("dimension {0} not supported here")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    norm3(&sub(a, b))
}
