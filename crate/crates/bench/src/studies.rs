//! Convergence, sparsity and solver studies over the test problems.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use mfd_core::assembly::{assemble, AssemblyParams, LinearSystem, NeighborRule};
use mfd_core::geometry::PointKind;
use mfd_core::stencil::StencilMethod;

use crate::problems::{box3d_problem, disk_problem, quadratic_problem, TestProblem};
use crate::report::{BenchReport, RunRecord, SparsityRatio};
use crate::solvers::{solve, SolverSpec};
use crate::{BenchError, Result};

/// Relative residual for the convergence-order solves.
pub const CONVERGENCE_TOL: f64 = 1e-11;
/// Relative residual for solver comparisons and scaling runs.
pub const SOLVER_TOL: f64 = 1e-8;
/// Interior counts of the 2d resolution ladder.
pub const DISK_RESOLUTIONS: [usize; 4] = [250, 1000, 4000, 16000];
/// Default cloud seed of the studies.
pub const DEFAULT_SEED: u64 = 7;

/// Stencil selector with a nearest-neighbour candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: StencilMethod,
    pub neighbors: usize,
    /// Enlargements (x1.25 each) of a neighbourhood that admits no stencil.
    pub retries: usize,
}

impl MethodSpec {
    /// L1 stencils from 20 (2d) or 30 (3d) candidates.
    pub fn l1(dim: usize) -> Self {
        Self {
            method: StencilMethod::L1,
            neighbors: if dim == 3 { 30 } else { 20 },
            retries: 3,
        }
    }

    pub fn lsq(neighbors: usize) -> Self {
        Self {
            method: StencilMethod::Lsq,
            neighbors,
            retries: 3,
        }
    }

    pub fn label(&self) -> String {
        match self.method {
            StencilMethod::L1 => "L1".into(),
            StencilMethod::Lsq => format!("LSQ{}", self.neighbors),
        }
    }

    pub fn params(&self) -> AssemblyParams {
        AssemblyParams::new(self.method, NeighborRule::Nearest(self.neighbors)).with_retries(self.retries)
    }
}

fn nominal_spacing(problem: &TestProblem, interior: usize, seed: u64) -> f64 {
    let measure = problem.domain(interior, seed).measure();
    (measure / interior as f64).powf(1.0 / problem.dim() as f64)
}

/// Fills the assembly columns of a record.
fn describe_system(rec: &mut RunRecord, sys: &LinearSystem) {
    rec.n = Some(sys.n());
    rec.nnz = Some(sys.a.nnz());
    rec.nnz_per_interior_row = Some(sys.mean_interior_nnz());
    rec.mean_pivots = Some(sys.stats.mean_pivots());
    rec.lsq_flops = Some(sys.stats.lsq_flops);
    rec.enlarged_points = Some(sys.stats.enlarged.len());
}

/// `max |(A u*)_i - f_i|` over interior rows.
pub fn truncation_error(sys: &LinearSystem, exact: &[f64]) -> f64 {
    let r = sys.a.residual(&sys.rhs, exact);
    sys.interior_rows().iter().map(|&i| r[i].abs()).fold(0.0, f64::max)
}

pub fn assemble_problem(problem: &TestProblem, method: &MethodSpec, interior: usize, seed: u64) -> Result<LinearSystem> {
    let cloud = problem.cloud(interior, seed)?;
    Ok(assemble(&cloud, &method.params(), |p| problem.source(p))?)
}

/// One resolution: cloud, assembly, optional solve. Failures end up in
/// `failure`.
pub fn run_cell(
    problem: &TestProblem,
    method: &MethodSpec,
    interior: usize,
    seed: u64,
    solver: Option<SolverSpec>,
    tol: f64,
) -> RunRecord {
    let mut rec = RunRecord {
        problem: problem.name.clone(),
        method: method.label(),
        interior,
        h: nominal_spacing(problem, interior, seed),
        solver: solver.map_or_else(String::new, |s| s.to_string()),
        ..RunRecord::default()
    };
    let cloud = match problem.cloud(interior, seed) {
        Ok(c) => c,
        Err(e) => {
            rec.failure = Some(format!("cloud: {e}"));
            return rec;
        }
    };
    let start = Instant::now();
    let sys = match assemble(&cloud, &method.params(), |p| problem.source(p)) {
        Ok(s) => s,
        Err(e) => {
            rec.failure = Some(format!("assembly: {e}"));
            return rec;
        }
    };
    rec.assembly_time = Some(start.elapsed().as_secs_f64());
    describe_system(&mut rec, &sys);
    let exact: Vec<f64> = cloud.points().iter().map(|p| problem.exact(p)).collect();
    rec.truncation_error = Some(truncation_error(&sys, &exact));
    let Some(spec) = solver else {
        return rec;
    };
    let out = solve(&sys.a, &sys.rhs, spec, tol);
    rec.setup_time = Some(out.setup_time);
    rec.converged = out.converged();
    rec.failure = out.failure.clone();
    if let Some(r) = &out.report {
        rec.iterations = Some(r.iterations);
        rec.relres = Some(r.final_relres());
        rec.solve_time = Some(r.wall_time);
    }
    if let (Some(x), true) = (&out.x, rec.converged) {
        let err = (0..cloud.len())
            .filter(|&i| cloud.kind(i) == PointKind::Interior)
            .map(|i| (x[i] - exact[i]).abs())
            .fold(0.0, f64::max);
        rec.max_error = Some(err);
    }
    rec
}

/// Runs `method` on every resolution (in parallel) and fits the error order.
pub fn resolution_study(
    study: &str,
    problem: &TestProblem,
    method: &MethodSpec,
    resolutions: &[usize],
    solver: SolverSpec,
    tol: f64,
    seed: u64,
) -> BenchReport {
    let config = json!({
        "problem": problem, "method": method, "resolutions": resolutions,
        "solver": solver, "tol": tol,
    });
    let mut rep = BenchReport::new(study, seed, config);
    rep.records = resolutions
        .par_iter()
        .map(|&ni| run_cell(problem, method, ni, seed, Some(solver), tol))
        .collect();
    rep.fit_orders();
    rep
}

/// Error-versus-resolution study solved to [`CONVERGENCE_TOL`].
pub fn convergence_study(
    problem: &TestProblem,
    method: &MethodSpec,
    resolutions: &[usize],
    solver: SolverSpec,
    seed: u64,
) -> Result<BenchReport> {
    if resolutions.len() < 3 {
        return Err(BenchError::InvalidArgument(format!(
            "an order fit needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    Ok(resolution_study("convergence", problem, method, resolutions, solver, CONVERGENCE_TOL, seed))
}

/// Nonzero counts of systems assembled on one cloud and their pairwise
/// ratios (earlier system over later one).
pub fn sparsity_report(systems: &[(String, &LinearSystem)], seed: u64) -> Result<BenchReport> {
    if systems.len() < 2 {
        return Err(BenchError::InvalidArgument("sparsity report needs at least 2 systems".into()));
    }
    if systems.iter().any(|(_, s)| s.cloud_hash != systems[0].1.cloud_hash) {
        return Err(BenchError::InvalidArgument("systems were assembled on different clouds".into()));
    }
    let labels: Vec<&String> = systems.iter().map(|(l, _)| l).collect();
    let mut rep = BenchReport::new(
        "sparsity",
        seed,
        json!({ "cloud": systems[0].1.cloud_hash, "methods": labels }),
    );
    for (label, sys) in systems {
        let mut rec = RunRecord {
            method: label.clone(),
            interior: sys.interior_rows().len(),
            ..RunRecord::default()
        };
        describe_system(&mut rec, sys);
        rep.records.push(rec);
    }
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            let (a, b) = (systems[i].1, systems[j].1);
            rep.sparsity_ratios.push(SparsityRatio {
                numerator: systems[i].0.clone(),
                denominator: systems[j].0.clone(),
                nnz_ratio: a.a.nnz() as f64 / b.a.nnz() as f64,
                interior_row_ratio: a.mean_interior_nnz() / b.mean_interior_nnz(),
            });
        }
    }
    Ok(rep)
}

/// Every method against every solver on one cloud. Assembly and solver
/// failures are recorded, never propagated.
pub fn solver_matrix(
    problem: &TestProblem,
    methods: &[MethodSpec],
    solvers: &[SolverSpec],
    interior: usize,
    seed: u64,
    tol: f64,
) -> BenchReport {
    let config = json!({
        "problem": problem, "methods": methods, "solvers": solvers,
        "interior": interior, "tol": tol,
    });
    let mut rep = BenchReport::new("solvers", seed, config);
    let h = nominal_spacing(problem, interior, seed);
    let cloud = problem.cloud(interior, seed);
    for method in methods {
        let base = RunRecord {
            problem: problem.name.clone(),
            method: method.label(),
            interior,
            h,
            ..RunRecord::default()
        };
        let sys = match &cloud {
            Ok(c) => {
                let start = Instant::now();
                assemble(c, &method.params(), |p| problem.source(p))
                    .map(|s| (s, start.elapsed().as_secs_f64()))
                    .map_err(|e| format!("assembly: {e}"))
            }
            Err(e) => Err(format!("cloud: {e}")),
        };
        let (sys, assembly_time) = match sys {
            Ok(s) => s,
            Err(e) => {
                for s in solvers {
                    rep.records.push(RunRecord {
                        solver: s.to_string(),
                        failure: Some(e.clone()),
                        ..base.clone()
                    });
                }
                continue;
            }
        };
        let cloud = cloud.as_ref().expect("assembled on a generated cloud");
        let exact: Vec<f64> = cloud.points().iter().map(|p| problem.exact(p)).collect();
        let mut base = base;
        describe_system(&mut base, &sys);
        base.assembly_time = Some(assembly_time);
        base.truncation_error = Some(truncation_error(&sys, &exact));
        let rows: Vec<RunRecord> = solvers
            .par_iter()
            .map(|&spec| {
                let out = solve(&sys.a, &sys.rhs, spec, tol);
                let mut rec = RunRecord {
                    solver: spec.to_string(),
                    setup_time: Some(out.setup_time),
                    converged: out.converged(),
                    failure: out.failure.clone(),
                    ..base.clone()
                };
                if let Some(r) = &out.report {
                    rec.iterations = Some(r.iterations);
                    rec.relres = Some(r.final_relres());
                    rec.solve_time = Some(r.wall_time);
                }
                if let (Some(x), true) = (&out.x, rec.converged) {
                    rec.max_error = Some(
                        sys.interior_rows().iter().map(|&i| (x[i] - exact[i]).abs()).fold(0.0, f64::max),
                    );
                }
                rec
            })
            .collect();
        rep.records.extend(rows);
    }
    rep
}

pub const STUDY_NAMES: [&str; 5] = ["convergence", "consistency", "sparsity", "solvers", "scaling"];

/// Runs a named study with its default configuration. `quick` shrinks the
/// resolutions for smoke runs.
pub fn named_study(name: &str, seed: u64, quick: bool) -> Result<Vec<BenchReport>> {
    let disk = disk_problem();
    let ladder: Vec<usize> = if quick { vec![250, 500, 1000] } else { DISK_RESOLUTIONS.to_vec() };
    match name {
        "convergence" => [MethodSpec::l1(2), MethodSpec::lsq(12)]
            .iter()
            .map(|m| convergence_study(&disk, m, &ladder, SolverSpec::AmgBicgstab, seed))
            .map(|r| {
                r.map(|mut r| {
                    r.study = format!("convergence-{}", r.records[0].method.to_lowercase());
                    r
                })
            })
            .collect(),
        "consistency" => {
            let quad = quadratic_problem();
            Ok([MethodSpec::l1(2), MethodSpec::lsq(12)]
                .iter()
                .map(|m| {
                    let mut r = resolution_study("consistency", &quad, m, &ladder, SolverSpec::AmgBicgstab, CONVERGENCE_TOL, seed);
                    r.study = format!("consistency-{}", m.label().to_lowercase());
                    r
                })
                .collect())
        }
        "sparsity" => {
            let ni = if quick { 1000 } else { 4000 };
            let l1 = assemble_problem(&disk, &MethodSpec::l1(2), ni, seed)?;
            let lsq = assemble_problem(&disk, &MethodSpec::lsq(12), ni, seed)?;
            let mut r2 = sparsity_report(&[("L1".into(), &l1), ("LSQ12".into(), &lsq)], seed)?;
            r2.study = "sparsity-2d".into();
            let bx = box3d_problem();
            let ni3 = if quick { 1000 } else { 8000 };
            let l1 = assemble_problem(&bx, &MethodSpec::l1(3), ni3, seed)?;
            let lsq = assemble_problem(&bx, &MethodSpec::lsq(40), ni3, seed)?;
            let mut r3 = sparsity_report(&[("L1".into(), &l1), ("LSQ40".into(), &lsq)], seed)?;
            r3.study = "sparsity-3d".into();
            Ok(vec![r2, r3])
        }
        "solvers" => {
            let methods = [MethodSpec::l1(2), MethodSpec::lsq(5), MethodSpec::lsq(12), MethodSpec::lsq(36)];
            let ni = if quick { 250 } else { 4000 };
            Ok(vec![solver_matrix(&disk, &methods, &SolverSpec::full_grid(), ni, seed, SOLVER_TOL)])
        }
        "scaling" => {
            let ladder: Vec<usize> = if quick { vec![250, 1000] } else { vec![1000, 4000, 16000] };
            Ok(vec![resolution_study(
                "scaling",
                &disk,
                &MethodSpec::l1(2),
                &ladder,
                SolverSpec::AmgBicgstab,
                SOLVER_TOL,
                seed,
            )])
        }
        other => Err(BenchError::UnknownStudy(other.into())),
    }
}
