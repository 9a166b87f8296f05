//! Global system assembly and structural certificates.
//!
//! The assembled operator approximates `-Laplace`: an interior row is the
//! negated Laplace stencil, so a positive stencil gives a positive diagonal
//! and nonpositive off-diagonals. Dirichlet unknowns stay in the system as
//! identity rows; Neumann rows carry the sign-normalised derivative stencil.

mod io;
mod structure;

pub use io::SystemMetadata;
pub use structure::{
    discrete_max_principle_check, structure_report, structure_report_for, OracleOutcome,
    StructureReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, NeighborSearch, NeighborSet, Point, PointCloud, PointKind};
use crate::krylov::KrylovError;
use crate::sparse::{CsrMatrix, SparseError};
use crate::stencil::{
    build_constraints, laplace_rows, lp_stencil, lsq_flops, lsq_stencil, ConstraintKind, Stencil, StencilError,
    StencilMethod, DEFAULT_LP_ALPHA, DEFAULT_LSQ_ALPHA,
};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no positive stencil exists at points {0:?}")]
    InfeasibleStencil(Vec<usize>),
    #[error("degenerate neighbourhoods at points {0:?}")]
    RankDeficientStencil(Vec<usize>),
    #[error("empty neighbourhoods at points {0:?}")]
    EmptyNeighborhood(Vec<usize>),
    #[error("stencil at point {point}: {source}")]
    Stencil { point: usize, source: StencilError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AssemblyError>;

/// How neighbourhoods are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NeighborRule {
    /// The `k` closest points.
    Nearest(usize),
    /// All points within a fixed radius.
    Radius(f64),
    /// Radius `factor * mesh_size / 2`; a factor of `radius_ratio * 1.05`
    /// reproduces the candidate radius of the cone theorem.
    MeshSizeFactor { factor: f64, mesh_size: f64 },
}

impl NeighborRule {
    fn radius(&self) -> Option<f64> {
        match *self {
            NeighborRule::Nearest(_) => None,
            NeighborRule::Radius(r) => Some(r),
            NeighborRule::MeshSizeFactor { factor, mesh_size } => Some(factor * mesh_size / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    pub method: StencilMethod,
    pub rule: NeighborRule,
    pub alpha: f64,
    /// Neighbourhood enlargement per retry after a failed stencil.
    pub growth: f64,
    /// Retries per point (0 disables enlargement).
    pub max_retries: usize,
}

impl AssemblyParams {
    pub fn new(method: StencilMethod, rule: NeighborRule) -> Self {
        Self {
            method,
            rule,
            alpha: match method {
                StencilMethod::Lsq => DEFAULT_LSQ_ALPHA,
                StencilMethod::L1 => DEFAULT_LP_ALPHA,
            },
            growth: 1.25,
            max_retries: 0,
        }
    }

    pub fn lsq_nearest(k: usize) -> Self {
        Self::new(StencilMethod::Lsq, NeighborRule::Nearest(k))
    }

    pub fn l1_radius(r: f64) -> Self {
        Self::new(StencilMethod::L1, NeighborRule::Radius(r))
    }

    pub fn with_retries(mut self, max_retries: usize) -> Self {
        self.max_retries = max_retries;
        self
    }
}

/// Per-assembly statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssemblyStats {
    /// Simplex pivots per stencil row (interior and Neumann), in row order.
    pub pivots: Vec<usize>,
    /// Neighbourhood sizes per stencil row.
    pub candidates: Vec<usize>,
    /// Points that needed an enlarged neighbourhood.
    pub enlarged: Vec<usize>,
    /// Sum of least-squares flop estimates.
    pub lsq_flops: u64,
}

impl AssemblyStats {
    pub fn mean_pivots(&self) -> f64 {
        if self.pivots.is_empty() {
            return 0.0;
        }
        self.pivots.iter().sum::<usize>() as f64 / self.pivots.len() as f64
    }

    pub fn mean_candidates(&self) -> f64 {
        if self.candidates.is_empty() {
            return 0.0;
        }
        self.candidates.iter().sum::<usize>() as f64 / self.candidates.len() as f64
    }
}

/// `A u = f` together with its provenance.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: CsrMatrix,
    pub rhs: Vec<f64>,
    pub kinds: Vec<PointKind>,
    pub params: AssemblyParams,
    pub cloud_hash: String,
    pub stats: AssemblyStats,
}

/// Dirichlet unknowns eliminated: `a` acts on the non-Dirichlet unknowns
/// listed in `unknowns`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a: CsrMatrix,
    pub rhs: Vec<f64>,
    pub unknowns: Vec<usize>,
    /// Full-length vector holding the Dirichlet values (zeros elsewhere).
    pub dirichlet: Vec<f64>,
}

impl ReducedSystem {
    /// Scatters a reduced solution back into a full-length vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.dirichlet.clone();
        for (&g, &v) in self.unknowns.iter().zip(x) {
            full[g] = v;
        }
        full
    }
}

impl LinearSystem {
    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn interior_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.kinds[i] == PointKind::Interior).collect()
    }

    pub fn dirichlet_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.kinds[i] == PointKind::Dirichlet).collect()
    }

    /// Mean stored entries per interior row.
    pub fn mean_interior_nnz(&self) -> f64 {
        let rows = self.interior_rows();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|&i| self.a.row_nnz(i)).sum::<usize>() as f64 / rows.len() as f64
    }

    pub fn reduced(&self) -> Result<ReducedSystem> {
        let n = self.n();
        let mut dirichlet = vec![0.0; n];
        let mut map = vec![usize::MAX; n];
        let mut unknowns = Vec::new();
        for i in 0..n {
            if self.kinds[i] == PointKind::Dirichlet {
                dirichlet[i] = self.rhs[i] / self.a.get(i, i);
            } else {
                map[i] = unknowns.len();
                unknowns.push(i);
            }
        }
        let mut rows = Vec::with_capacity(unknowns.len());
        let mut rhs = Vec::with_capacity(unknowns.len());
        for &i in &unknowns {
            let (cols, vals) = self.a.row(i);
            let mut f = self.rhs[i];
            let mut row = Vec::with_capacity(cols.len());
            for (&j, &v) in cols.iter().zip(vals) {
                if map[j] == usize::MAX {
                    f -= v * dirichlet[j];
                } else {
                    row.push((map[j], v));
                }
            }
            rows.push(row);
            rhs.push(f);
        }
        Ok(ReducedSystem {
            a: CsrMatrix::from_rows(unknowns.len(), rows)?,
            rhs,
            unknowns,
            dirichlet,
        })
    }
}

enum RowOutcome {
    Row(Vec<(usize, f64)>, Option<Stencil>, usize, bool),
    Failed(StencilError),
}

fn neighborhood(search: &NeighborSearch, rule: NeighborRule, center: usize, attempt: usize, growth: f64) -> NeighborSet {
    let g = growth.powi(attempt as i32);
    match rule {
        NeighborRule::Nearest(k) => search.nearest_k(center, ((k as f64) * g).round() as usize),
        _ => search.within(center, rule.radius().unwrap() * g),
    }
}

fn stencil_row(
    cloud: &PointCloud,
    search: &NeighborSearch,
    params: &AssemblyParams,
    i: usize,
) -> RowOutcome {
    let kind = match cloud.kind(i) {
        PointKind::Dirichlet => return RowOutcome::Row(vec![(i, 1.0)], None, 0, false),
        PointKind::Interior => ConstraintKind::Laplace,
        PointKind::Neumann => ConstraintKind::NeumannDerivative {
            normal: *cloud.normal(i).expect("Neumann point without normal"),
        },
    };
    let mut last_err = StencilError::EmptyNeighborhood;
    for attempt in 0..=params.max_retries {
        let neigh = neighborhood(search, params.rule, i, attempt, params.growth);
        let candidates = neigh.len();
        let result = build_constraints(&neigh, kind, params.alpha).and_then(|sys| match params.method {
            StencilMethod::Lsq => lsq_stencil(&sys),
            StencilMethod::L1 => lp_stencil(&sys),
        });
        match result {
            Ok(st) => {
                // Interior rows approximate -Laplace; derivative rows are used
                // as they are (outward derivative = h).
                let sign = if kind == ConstraintKind::Laplace { -1.0 } else { 1.0 };
                let mut row = Vec::with_capacity(st.neighbors.len() + 1);
                row.push((i, sign * st.center_coeff));
                for (&j, &s) in st.neighbors.iter().zip(&st.coeffs) {
                    if s != 0.0 {
                        row.push((j, sign * s));
                    }
                }
                return RowOutcome::Row(row, Some(st), candidates, attempt > 0);
            }
            Err(e @ (StencilError::Infeasible { .. } | StencilError::RankDeficient { .. } | StencilError::EmptyNeighborhood)) => {
                last_err = e;
            }
            Err(e) => return RowOutcome::Failed(e),
        }
    }
    RowOutcome::Failed(last_err)
}

/// Assembles `A u = f` on the cloud: interior rows from Laplace stencils with
/// right-hand side `source(x)`, Dirichlet identity rows and Neumann
/// derivative rows with the cloud's boundary values.
pub fn assemble(
    cloud: &PointCloud,
    params: &AssemblyParams,
    source: impl Fn(&Point) -> f64 + Sync,
) -> Result<LinearSystem> {
    let search = match params.rule.radius() {
        Some(r) => NeighborSearch::for_radius(cloud, r),
        None => NeighborSearch::for_cloud(cloud),
    };
    let n = cloud.len();
    let outcomes: Vec<RowOutcome> = (0..n)
        .into_par_iter()
        .map(|i| stencil_row(cloud, &search, params, i))
        .collect();

    let (mut empty, mut rank, mut infeasible) = (vec![], vec![], vec![]);
    let mut rows = Vec::with_capacity(n);
    let mut stats = AssemblyStats::default();
    for (i, out) in outcomes.into_iter().enumerate() {
        match out {
            RowOutcome::Row(row, st, candidates, enlarged) => {
                if let Some(st) = st {
                    stats.pivots.push(st.pivot_count);
                    stats.candidates.push(candidates);
                    if params.method == StencilMethod::Lsq {
                        let k = match cloud.kind(i) {
                            PointKind::Neumann => cloud.dim(),
                            _ => laplace_rows(cloud.dim()),
                        };
                        stats.lsq_flops += lsq_flops(k as u64, st.neighbors.len() as u64);
                    }
                }
                if enlarged {
                    stats.enlarged.push(i);
                }
                rows.push(row);
            }
            RowOutcome::Failed(StencilError::EmptyNeighborhood) => empty.push(i),
            RowOutcome::Failed(StencilError::RankDeficient { .. }) => rank.push(i),
            RowOutcome::Failed(StencilError::Infeasible { .. }) => infeasible.push(i),
            RowOutcome::Failed(source) => return Err(AssemblyError::Stencil { point: i, source }),
        }
    }
    if !empty.is_empty() {
        return Err(AssemblyError::EmptyNeighborhood(empty));
    }
    if !rank.is_empty() {
        return Err(AssemblyError::RankDeficientStencil(rank));
    }
    if !infeasible.is_empty() {
        return Err(AssemblyError::InfeasibleStencil(infeasible));
    }
    let rhs = (0..n)
        .map(|i| match cloud.kind(i) {
            PointKind::Interior => source(cloud.point(i)),
            _ => cloud.bc_value(i),
        })
        .collect();
    Ok(LinearSystem {
        a: CsrMatrix::from_rows(n, rows)?,
        rhs,
        kinds: cloud.kinds().to_vec(),
        params: *params,
        cloud_hash: cloud.content_hash(),
        stats,
    })
}
