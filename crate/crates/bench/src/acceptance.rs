//! The acceptance suite: twelve end-to-end checks, each reported as one
//! pass/fail line.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mfd_core::assembly::{
    assemble, discrete_max_principle_check, structure_report, AssemblyParams, LinearSystem, NeighborRule,
};
use mfd_core::geometry::{
    candidate_radius, cloud_cone_radius, cone_criterion, covering_radius, half_space_violation, mesh_size, BcKind,
    BoxSpec, ConeConstants, DiskSpec, DomainSpec, Fill, NeighborSet, Point, DEFAULT_MESH_SAMPLES,
};
use mfd_core::multilevel::{AmliVariant, FineKind, TwoGridOperator};
use mfd_core::sparse::{CsrMatrix, DenseMatrix, DEFAULT_ORACLE_CAP};
use mfd_core::stencil::{
    build_constraints, lp_stencil, lsq_stencil, ConstraintKind, StencilError, StencilMethod, DEFAULT_LP_ALPHA,
    DEFAULT_LSQ_ALPHA,
};

use crate::problems::{box3d_problem, disk_problem, quadratic_problem};
use crate::solvers::{Coarsening, SolverSpec};
use crate::studies::{
    assemble_problem, convergence_study, resolution_study, solver_matrix, sparsity_report, MethodSpec,
    CONVERGENCE_TOL, DISK_RESOLUTIONS, SOLVER_TOL,
};
use crate::Result;

pub const CRITERIA: [&str; 12] = [
    "example stencil reproduction",
    "regular-grid exactness",
    "M-matrix guarantee",
    "feasibility theorems",
    "AMLI convergence",
    "Jacobi/Gauss-Seidel convergence",
    "discrete maximum principle",
    "convergence order",
    "sparsity ratios",
    "simplex cost",
    "AMG-BiCGstab scaling",
    "LSQ(5) AMLI failures",
];

/// Seed of the disk clouds in the studies.
const STUDY_SEED: u64 = 7;
/// Seed of the 3d box cloud.
const BOX_SEED: u64 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_secs
        )
    }
}

/// Runs criterion `id` (1-based). `seed` drives the randomized corpora
/// (criteria 3-7); the studies use fixed clouds.
pub fn run_criterion(id: usize, seed: u64) -> Option<CriterionResult> {
    let name = *CRITERIA.get(id.checked_sub(1)?)?;
    let start = Instant::now();
    let outcome = match id {
        1 => example_stencil(),
        2 => regular_grids(),
        3 => m_matrix_guarantee(seed),
        4 => feasibility_theorems(seed),
        5 => amli_convergence(seed),
        6 => stationary_convergence(seed),
        7 => max_principle(seed),
        8 => convergence_order(),
        9 => sparsity_ratios(),
        10 => simplex_cost(),
        11 => amg_scaling(),
        _ => lsq5_failures(),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=CRITERIA.len()).filter_map(|id| run_criterion(id, seed)).collect()
}

type Outcome = Result<(bool, String)>;

fn polar(deg: f64, r: f64) -> Point {
    let a = deg.to_radians();
    [r * a.cos(), r * a.sin(), 0.0]
}

fn example_stencil() -> Outcome {
    let offs: Vec<Point> = [0.0, 90.0, 180.0, 270.0, 9.0, 18.0].iter().map(|&a| polar(a, 1.0)).collect();
    let neigh = NeighborSet::from_offsets(2, offs);
    let want = [0.846, 1.005, 0.998, 1.003, 0.312, -0.164];
    let run = || -> Result<_> {
        let lsq = lsq_stencil(&build_constraints(&neigh, ConstraintKind::Laplace, DEFAULT_LSQ_ALPHA)?)?;
        let sys = build_constraints(&neigh, ConstraintKind::Laplace, DEFAULT_LP_ALPHA)?;
        let lp = lp_stencil(&sys)?;
        Ok((lsq, sys, lp))
    };
    let (lsq, sys, lp) = run()?;
    // Best of repeated runs, to keep scheduler noise out of the timing.
    let mut best = f64::INFINITY;
    for _ in 0..50 {
        let t = Instant::now();
        run()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    let lsq_dev = lsq.coeffs.iter().zip(want).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
    let axis = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
    let lp_dev = lp.coeffs.iter().zip(axis).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
    let reference: f64 = axis.iter().zip(&sys.weights).map(|(s, w)| s / w).sum();
    let feasible = sys.residual(&lp.coeffs) <= 1e-9 && lp.positive;
    let lp_ok = feasible && (lp_dev <= 1e-9 || (lp.objective - reference).abs() <= 1e-9);
    Ok((
        lsq_dev <= 1e-3 && lp_ok && best < 1e-3,
        format!(
            "LSQ max dev {lsq_dev:.1e}, LP support {:?} dev {lp_dev:.1e} objective {:.12} vs {reference:.12}, best time {:.1} us",
            lp.coeffs.iter().map(|s| (*s != 0.0) as u8).collect::<Vec<_>>(),
            lp.objective,
            best * 1e6
        ),
    ))
}

/// Interior rows must be `2d/h^2` on the diagonal and `-1/h^2` at the `2d`
/// axis neighbours.
fn classical_rows(sys: &LinearSystem, points: &[Point], dim: usize, h: f64) -> (usize, f64) {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    let scale = 1.0 / (h * h);
    for i in sys.interior_rows() {
        let (cols, vals) = sys.a.row(i);
        let mut ok = cols.len() == 2 * dim + 1;
        for (&j, &v) in cols.iter().zip(vals) {
            let want = if j == i {
                2.0 * dim as f64 * scale
            } else {
                let d: Vec<f64> = (0..dim).map(|k| (points[j][k] - points[i][k]).abs()).collect();
                let on_axis = d.iter().filter(|&&c| (c - h).abs() < 1e-9 * h).count() == 1
                    && d.iter().filter(|&&c| c < 1e-9 * h).count() == dim - 1;
                if !on_axis {
                    ok = false;
                }
                -scale
            };
            worst = worst.max((v - want).abs() / (2.0 * dim as f64 * scale));
        }
        if !ok {
            bad += 1;
        }
    }
    (bad, worst)
}

fn regular_grids() -> Outcome {
    let mut detail = vec![];
    let mut passed = true;
    for (dim, k, h) in [(2, 8, 0.05), (3, 26, 0.1)] {
        let cloud = DomainSpec::Box(BoxSpec::unit(dim, Fill::Spacing { h, jitter: 0.0 }, BcKind::Dirichlet)).generate()?;
        let sys = assemble(&cloud, &AssemblyParams::new(StencilMethod::L1, NeighborRule::Nearest(k)), |_| 0.0)?;
        let rows = sys.interior_rows().len();
        let (bad, worst) = classical_rows(&sys, cloud.points(), dim, h);
        passed &= rows > 0 && bad == 0 && worst <= 1e-12;
        detail.push(format!("{dim}d: {rows} rows, {bad} non-classical, max rel dev {worst:.1e}"));
    }
    Ok((passed, detail.join("; ")))
}

fn m_matrix_guarantee(seed: u64) -> Outcome {
    const WANTED: usize = 20;
    let mut certified = 0;
    let mut tried = 0;
    let mut failures = vec![];
    let mut worst_min = f64::INFINITY;
    let mut max_factor: f64 = 0.0;
    while certified + failures.len() < WANTED && tried < 3 * WANTED {
        let s = seed.wrapping_add(tried as u64);
        tried += 1;
        let domain = DomainSpec::Disk(DiskSpec::random(200, 250, s));
        let cloud = domain.generate()?;
        let h = mesh_size(&cloud, &domain, DEFAULT_MESH_SAMPLES)?;
        let start = candidate_radius(h, 2)?;
        // Smallest radius (from the theorem's upward) at which every interior
        // point passes the cone criterion.
        let Some(r) = cloud_cone_radius(&cloud, start, covering_radius(h, 2)?, 1.02)? else {
            continue;
        };
        max_factor = max_factor.max(r / start);
        let sys = assemble(&cloud, &AssemblyParams::l1_radius(r), |_| 1.0)?;
        let rep = structure_report(&sys, false);
        let min_inv = if sys.n() <= DEFAULT_ORACLE_CAP {
            sys.a.to_dense().inverse()?.min_entry()
        } else {
            f64::NEG_INFINITY
        };
        worst_min = worst_min.min(min_inv);
        if rep.is_l && rep.essentially_irreducible && rep.essentially_dd && min_inv >= -1e-10 {
            certified += 1;
        } else {
            failures.push(s);
        }
    }
    let total = certified + failures.len();
    Ok((
        total >= WANTED && failures.is_empty(),
        format!(
            "{certified}/{total} clouds certified ({tried} generated), min(A^-1) {worst_min:.2e}, radius <= {max_factor:.3} x theorem radius, failing seeds {failures:?}"
        ),
    ))
}

fn lp_feasible(dim: usize, offs: Vec<Point>) -> Result<bool> {
    let sys = build_constraints(&NeighborSet::from_offsets(dim, offs), ConstraintKind::Laplace, DEFAULT_LP_ALPHA)?;
    match lp_stencil(&sys) {
        Ok(_) => Ok(true),
        Err(StencilError::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

fn unit_dir(theta: f64, z: f64) -> Point {
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * theta.cos(), s * theta.sin(), z]
}

/// Directions in a closed half-plane (2d) or half-space (3d).
fn half_space_config(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Point> {
    let m = rng.random_range(1..if dim == 2 { 14 } else { 24 });
    if dim == 2 {
        let start = rng.random_range(0.0..360.0);
        return (0..m).map(|_| polar(start + rng.random_range(0.0..=180.0), rng.random_range(0.05..1.0))).collect();
    }
    let n = unit_dir(rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0));
    (0..m)
        .map(|_| {
            let mut d = unit_dir(rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0));
            let along: f64 = (0..3).map(|k| d[k] * n[k]).sum();
            if along < 0.0 {
                for k in 0..3 {
                    d[k] -= 2.0 * along * n[k];
                }
            }
            let r = rng.random_range(0.05..1.0);
            [r * d[0], r * d[1], r * d[2]]
        })
        .collect()
}

/// Jittered ring (2d) or Fibonacci sphere (3d), dense enough for the cone
/// criterion.
fn cone_config(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Point> {
    if dim == 2 {
        let m = rng.random_range(9..20);
        let rot = rng.random_range(0.0..360.0);
        let step = 360.0 / m as f64;
        return (0..m)
            .map(|i| polar(rot + step * (i as f64 + rng.random_range(-0.06..0.06)), rng.random_range(0.05..1.0)))
            .collect();
    }
    let m = 200;
    let golden = PI * (3.0 - 5f64.sqrt());
    let rot = rng.random_range(0.0..2.0 * PI);
    (0..m)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
            let d = unit_dir(rot + golden * i as f64, z);
            let r = rng.random_range(0.05..1.0);
            [r * d[0], r * d[1], r * d[2]]
        })
        .collect()
}

fn random_config(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let m = rng.random_range(1..16);
    (0..m).map(|_| polar(rng.random_range(0.0..360.0), rng.random_range(0.05..1.0))).collect()
}

fn feasibility_theorems(seed: u64) -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfea5);
    let (mut premise_a, mut counter_a) = (0, 0);
    for i in 0..CASES {
        let (dim, offs) = match i % 3 {
            0 => (2, half_space_config(&mut rng, 2)),
            1 => (3, half_space_config(&mut rng, 3)),
            _ => (2, random_config(&mut rng)),
        };
        if half_space_violation(&NeighborSet::from_offsets(dim, offs.clone())) {
            premise_a += 1;
            counter_a += lp_feasible(dim, offs)? as usize;
        }
    }
    let (mut premise_b, mut counter_b) = (0, 0);
    for i in 0..CASES {
        let (dim, offs) = match i % 3 {
            0 => (2, cone_config(&mut rng, 2)),
            1 => (3, cone_config(&mut rng, 3)),
            _ => (2, random_config(&mut rng)),
        };
        let consts = ConeConstants::for_dim(dim)?;
        if cone_criterion(&NeighborSet::from_offsets(dim, offs.clone()), &consts)? {
            premise_b += 1;
            counter_b += !lp_feasible(dim, offs)? as usize;
        }
    }
    Ok((
        counter_a == 0 && counter_b == 0 && premise_a > 0 && premise_b > 0,
        format!(
            "half-space => infeasible: {counter_a} counterexamples ({premise_a}/{CASES} premises); \
             cone => feasible: {counter_b} counterexamples ({premise_b}/{CASES} premises)"
        ),
    ))
}

/// Certified L1 disk systems with at most 300 unknowns.
fn corpus(seed: u64) -> Result<Vec<CsrMatrix>> {
    let mut out = vec![];
    for (k, interior) in [40, 70, 100, 130, 160, 190, 220].into_iter().enumerate() {
        let domain = DomainSpec::Disk(DiskSpec::with_interior(interior, seed.wrapping_add(k as u64)));
        let cloud = domain.generate()?;
        let sys = assemble(&cloud, &MethodSpec::l1(2).params(), |_| 1.0)?;
        if sys.n() > 300 {
            continue;
        }
        let rep = structure_report(&sys, true);
        if rep.m_matrix_by_sufficient_condition && rep.m_matrix_by_oracle.is_true() {
            out.push(sys.a);
        }
    }
    Ok(out)
}

fn amli_convergence(seed: u64) -> Outcome {
    let mats = corpus(seed)?;
    let cap = DEFAULT_ORACLE_CAP;
    let (mut checks, mut bad) = (0, vec![]);
    let (mut worst_min, mut worst_rho) = (f64::INFINITY, 0.0f64);
    for (m, a) in mats.iter().enumerate() {
        for coarsening in [Coarsening::RugeStueben, Coarsening::Default] {
            let split = coarsening.split(a)?;
            for fine in [FineKind::Jacobi, FineKind::GaussSeidel, FineKind::Ilu0] {
                let base = TwoGridOperator::new(a, &split, fine, AmliVariant::Amli)?;
                let mut rho = [0.0; 4];
                for (k, v) in AmliVariant::ALL.into_iter().enumerate() {
                    let op = base.with_variant(v);
                    let t = op.iteration_matrix(cap)?;
                    // The coarse-first ordering carries its sign structure in
                    // the (similar) residual propagator.
                    let nonneg = match v {
                        AmliVariant::Rmamli => op.residual_propagator(cap)?,
                        _ => t.clone(),
                    };
                    rho[k] = t.spectral_radius(cap)?;
                    worst_min = worst_min.min(nonneg.min_entry());
                    worst_rho = worst_rho.max(rho[k]);
                    checks += 1;
                    if nonneg.min_entry() < -1e-12 || rho[k] > 1.0 - 1e-6 {
                        bad.push(format!("#{m} {coarsening:?}/{fine:?}/{v:?}"));
                    }
                }
                let [amli, mamli, _, smamli] = rho;
                if !(smamli <= mamli + 1e-10 && mamli + 1e-10 <= amli + 2e-10) {
                    bad.push(format!("#{m} {coarsening:?}/{fine:?} ordering {rho:?}"));
                }
            }
        }
    }
    Ok((
        !mats.is_empty() && bad.is_empty(),
        format!(
            "{} matrices, {checks} operators, min T entry {worst_min:.1e}, max rho {worst_rho:.4}, violations {bad:?}",
            mats.len()
        ),
    ))
}

fn stationary_convergence(seed: u64) -> Outcome {
    let mats = corpus(seed)?;
    let (mut jac, mut gs): (f64, f64) = (0.0, 0.0);
    for a in &mats {
        let d = a.to_dense();
        let n = d.n_rows();
        let mut tj = DenseMatrix::zeros(n, n);
        let mut lower = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                tj[(i, j)] = if i == j { 0.0 } else { -d[(i, j)] / d[(i, i)] };
                if j <= i {
                    lower[(i, j)] = d[(i, j)];
                }
            }
        }
        jac = jac.max(tj.spectral_radius(DEFAULT_ORACLE_CAP)?);
        // I - L^-1 A, column by column.
        let lu = lower.lu()?;
        let mut cols = vec![];
        for j in 0..n {
            let mut c = lu.solve(&d.column(j));
            c.iter_mut().for_each(|v| *v = -*v);
            c[j] += 1.0;
            cols.push(c);
        }
        gs = gs.max(DenseMatrix::from_columns(n, &cols).spectral_radius(DEFAULT_ORACLE_CAP)?);
    }
    Ok((
        !mats.is_empty() && jac <= 1.0 - 1e-8 && gs <= 1.0 - 1e-8,
        format!("{} matrices, max rho Jacobi {jac:.6}, max rho Gauss-Seidel {gs:.6}", mats.len()),
    ))
}

fn max_principle(seed: u64) -> Outcome {
    let mats = corpus(seed)?;
    let mut passed = 0;
    for (k, a) in mats.iter().enumerate() {
        passed += discrete_max_principle_check(a, 20, seed.wrapping_add(k as u64))? as usize;
    }
    Ok((
        !mats.is_empty() && passed == mats.len(),
        format!("{passed}/{} systems pass 20 random y <= 0 each", mats.len()),
    ))
}

fn convergence_order() -> Outcome {
    let disk = disk_problem();
    let mut passed = true;
    let mut detail = vec![];
    for m in [MethodSpec::l1(2), MethodSpec::lsq(12)] {
        let rep = convergence_study(&disk, &m, &DISK_RESOLUTIONS, SolverSpec::AmgBicgstab, STUDY_SEED)?;
        let failures = rep.failures().count();
        let order = rep.orders.get(&m.label()).copied();
        passed &= failures == 0 && order.is_some_and(|o| (1.5..=2.5).contains(&o));
        detail.push(format!("{} order {:.3}", m.label(), order.unwrap_or(f64::NAN)));
    }
    let quad = quadratic_problem();
    let mut worst: f64 = 0.0;
    for m in [MethodSpec::l1(2), MethodSpec::lsq(12)] {
        let rep =
            resolution_study("consistency", &quad, &m, &DISK_RESOLUTIONS, SolverSpec::AmgBicgstab, CONVERGENCE_TOL, STUDY_SEED);
        for r in &rep.records {
            match (r.truncation_error, r.max_error) {
                (Some(t), Some(e)) => worst = worst.max(t).max(e),
                _ => worst = f64::INFINITY,
            }
        }
    }
    passed &= worst <= 1e-9;
    detail.push(format!("quadratic max consistency/solution error {worst:.1e}"));
    Ok((passed, detail.join(", ")))
}

fn sparsity_ratios() -> Outcome {
    let disk = disk_problem();
    let l1 = assemble_problem(&disk, &MethodSpec::l1(2), 4000, STUDY_SEED)?;
    let lsq = assemble_problem(&disk, &MethodSpec::lsq(12), 4000, STUDY_SEED)?;
    let r2 = sparsity_report(&[("L1".into(), &l1), ("LSQ12".into(), &lsq)], STUDY_SEED)?.sparsity_ratios[0].nnz_ratio;
    let bx = box3d_problem();
    let l1 = assemble_problem(&bx, &MethodSpec::l1(3), 8000, BOX_SEED)?;
    let lsq = assemble_problem(&bx, &MethodSpec::lsq(40), 8000, BOX_SEED)?;
    let r3 = sparsity_report(&[("L1".into(), &l1), ("LSQ40".into(), &lsq)], BOX_SEED)?.sparsity_ratios[0].nnz_ratio;
    Ok((
        (0.4..=0.6).contains(&r2) && (0.15..=0.35).contains(&r3),
        format!("nnz(L1)/nnz(LSQ12) = {r2:.3} (2d disk), nnz(L1)/nnz(LSQ40) = {r3:.3} (3d box)"),
    ))
}

fn simplex_cost() -> Outcome {
    let sys = assemble_problem(&disk_problem(), &MethodSpec::l1(2), 4000, STUDY_SEED)?;
    let mean = sys.stats.mean_pivots();
    let max = sys.stats.pivots.iter().max().copied().unwrap_or(0);
    Ok((mean <= 15.0, format!("mean pivots {mean:.2} (k = 5, bound 15), max {max}")))
}

fn amg_scaling() -> Outcome {
    let rep = resolution_study(
        "scaling",
        &disk_problem(),
        &MethodSpec::l1(2),
        &[1000, 4000, 16000],
        SolverSpec::AmgBicgstab,
        SOLVER_TOL,
        STUDY_SEED,
    );
    let its: Vec<Option<usize>> = rep.records.iter().map(|r| r.converged.then_some(r.iterations).flatten()).collect();
    let [Some(a), Some(b), Some(c)] = its[..] else {
        return Ok((false, format!("unconverged runs: {its:?}")));
    };
    let (r1, r2, r16) = (b as f64 / a as f64, c as f64 / b as f64, c as f64 / a as f64);
    Ok((
        r1 <= 1.5 && r2 <= 1.5 && r16 <= 2.0,
        format!("iterations {a}/{b}/{c} at ni = 1000/4000/16000; 4x ratios {r1:.2}, {r2:.2}; 16x ratio {r16:.2}"),
    ))
}

fn lsq5_failures() -> Outcome {
    let solvers = SolverSpec::amli_grid();
    let rep = solver_matrix(&disk_problem(), &[MethodSpec::lsq(5)], &solvers, 4000, STUDY_SEED, SOLVER_TOL);
    let (mut diverged, mut capped, mut setup, mut converged) = (0, 0, 0, 0);
    for r in &rep.records {
        match r.failure.as_deref() {
            None => converged += 1,
            Some(f) if f.starts_with("diverged") => diverged += 1,
            Some(f) if f.starts_with("no convergence") => capped += 1,
            Some(_) => setup += 1,
        }
    }
    Ok((
        rep.records.len() == solvers.len() && converged == 0,
        format!(
            "{} AMLI runs recorded: {diverged} diverged, {capped} hit the cap, {setup} broke down in setup, {converged} converged",
            rep.records.len()
        ),
    ))
}
