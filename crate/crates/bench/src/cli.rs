//! The `mfd` command line.
//!
//! Exit codes: 0 success, 1 numerical failure (infeasible stencils,
//! non-convergence, failed acceptance criteria), 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mfd_core::assembly::{assemble, structure_report, AssemblyError, AssemblyParams, LinearSystem, NeighborRule};
use mfd_core::geometry::{mesh_size, BcKind, BoxSpec, DiskSpec, DomainSpec, Fill, PointCloud, DEFAULT_MESH_SAMPLES};
use mfd_core::multilevel::{AmliVariant, FineKind};
use mfd_core::stencil::StencilMethod;

use crate::acceptance::{run_criterion, CRITERIA};
use crate::problems::{ProblemKind, TestProblem};
use crate::solvers::{solve, Coarsening, SolverSpec};
use crate::studies::{named_study, MethodSpec, DEFAULT_SEED, STUDY_NAMES};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "mfd", version, about = "Meshfree finite-difference Poisson toolkit")]
struct Cli {
    /// Seed for random clouds and corpora.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the command's JSON result to this file.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
    /// Print nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a point cloud and write it as JSON (or CSV for a .csv path).
    Cloud {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble a linear system and export `<out>.mtx`, `<out>.rhs`, `<out>.json`.
    Assemble {
        #[command(flatten)]
        cloud: CloudArgs,
        /// Read the cloud from a JSON file instead of generating it.
        #[arg(long)]
        cloud_file: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Nearest-neighbour candidate count.
        #[arg(long, conflicts_with = "radius_factor")]
        neighbors: Option<usize>,
        /// Candidate radius as a multiple of half the mesh size.
        #[arg(long)]
        radius_factor: Option<f64>,
        /// Distance weight exponent (defaults: 2 for lsq, 4 for l1).
        #[arg(long)]
        alpha: Option<f64>,
        /// Neighbourhood enlargements for points without a stencil.
        #[arg(long, default_value_t = 3)]
        retries: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Structure report (M-matrix certificates) of an exported system.
    Check {
        /// Prefix given to `assemble --out`.
        system: PathBuf,
        /// Skip the dense inverse oracle.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Solve an exported system.
    Solve {
        system: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Bicgstab)]
        solver: SolverArg,
        #[arg(long, value_enum, default_value_t = VariantArg::Amli)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value_t = CoarseningArg::Default)]
        coarsening: CoarseningArg,
        #[arg(long, value_enum, default_value_t = FineArg::Jacobi)]
        fine: FineArg,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the solution, one value per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named study and write `<study>_<seed>.{json,csv}`.
    Bench {
        /// convergence, consistency, sparsity, solvers, scaling or all.
        study: String,
        /// Smaller resolutions, for smoke runs.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "bench-results")]
        out_dir: PathBuf,
    },
    /// Run the acceptance suite.
    Verify {
        /// Run only these criteria (1-12).
        #[arg(long)]
        criterion: Vec<usize>,
    },
}

#[derive(Debug, Args)]
struct CloudArgs {
    #[arg(long, value_enum, default_value_t = DomainArg::Disk)]
    domain: DomainArg,
    /// Random interior points.
    #[arg(long, default_value_t = 1000, conflicts_with = "spacing")]
    interior: usize,
    /// Grid spacing instead of random interior points.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Points on the circle (disk only).
    #[arg(long)]
    boundary: Option<usize>,
    #[arg(long, value_enum, default_value_t = BcArg::Dirichlet)]
    bc: BcArg,
    /// Source of f and boundary data (default: by domain).
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    /// Unit disk.
    Disk,
    /// Unit square.
    Square,
    /// Unit cube.
    Cube,
    /// [0,2]x[0,1]x[0,1], Dirichlet at x = 2, Neumann elsewhere.
    Box,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BcArg {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemArg {
    Disk,
    Quadratic,
    Box3d,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Lsq,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum SolverArg {
    /// BiCGstab preconditioned by ILU(0).
    Bicgstab,
    /// BiCGstab preconditioned by an AMG V-cycle.
    Amg,
    /// Stationary two-grid AMLI iteration.
    Amli,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Amli,
    Mamli,
    Rmamli,
    Smamli,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CoarseningArg {
    Default,
    Rs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FineArg {
    Jacobi,
    Gs,
    Ilu0,
}

enum Failure {
    Numerical(String),
    Usage(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let numerical = match &e {
            BenchError::Assembly(a) => !matches!(
                a,
                AssemblyError::Io(_) | AssemblyError::Json(_) | AssemblyError::Geometry(_) | AssemblyError::Sparse(_)
            ),
            BenchError::Krylov(_) | BenchError::Multilevel(_) | BenchError::Stencil(_) => true,
            _ => false,
        };
        if numerical {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<AssemblyError> for Failure {
    fn from(e: AssemblyError) -> Self {
        BenchError::from(e).into()
    }
}

impl From<mfd_core::geometry::GeometryError> for Failure {
    fn from(e: mfd_core::geometry::GeometryError) -> Self {
        BenchError::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Command result: JSON payload, human-readable text and success flag.
struct Output {
    json: serde_json::Value,
    text: String,
    ok: bool,
}

impl CloudArgs {
    fn problem(&self) -> TestProblem {
        let kind = match (self.problem, self.domain) {
            (Some(ProblemArg::Disk), _) | (None, DomainArg::Disk) => ProblemKind::Disk,
            (Some(ProblemArg::Box3d), _) | (None, DomainArg::Box) => ProblemKind::Box3d,
            _ => ProblemKind::Quadratic,
        };
        TestProblem::new(kind).expect("built-in problems are consistent")
    }

    fn domain(&self, seed: u64) -> DomainSpec {
        let fill = match self.spacing {
            Some(h) => Fill::Spacing { h, jitter: self.jitter },
            None => Fill::Count { interior: self.interior },
        };
        let bc = match self.bc {
            BcArg::Dirichlet => BcKind::Dirichlet,
            BcArg::Neumann => BcKind::Neumann,
        };
        match self.domain {
            DomainArg::Disk => DomainSpec::Disk(DiskSpec {
                boundary: self.boundary,
                fill,
                bc,
                seed,
            }),
            DomainArg::Square | DomainArg::Cube => {
                let dim = if matches!(self.domain, DomainArg::Square) { 2 } else { 3 };
                DomainSpec::Box(BoxSpec {
                    seed,
                    ..BoxSpec::unit(dim, fill, bc)
                })
            }
            DomainArg::Box => {
                let mut d = TestProblem::new(ProblemKind::Box3d).unwrap().domain(self.interior, seed);
                if let DomainSpec::Box(b) = &mut d {
                    b.fill = fill;
                }
                d
            }
        }
    }

    fn generate(&self, seed: u64) -> Result<PointCloud, Failure> {
        Ok(self.problem().cloud_for(&self.domain(seed))?)
    }
}

fn write_lines(path: &Path, values: &[f64]) -> std::io::Result<()> {
    let text: String = values.iter().map(|v| format!("{v:.16e}\n")).collect();
    std::fs::write(path, text)
}

fn run_command(cli: &Cli) -> Result<Output, Failure> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Cloud { cloud, out } => {
            let c = cloud.generate(seed)?;
            if out.extension().is_some_and(|e| e == "csv") {
                c.write_csv(std::fs::File::create(out)?)?;
            } else {
                c.save_json(out)?;
            }
            let json = json!({ "points": c.len(), "dim": c.dim(), "hash": c.content_hash(), "out": out });
            Ok(Output {
                text: format!("{} points ({}d) written to {}", c.len(), c.dim(), out.display()),
                json,
                ok: true,
            })
        }
        Command::Assemble {
            cloud,
            cloud_file,
            method,
            neighbors,
            radius_factor,
            alpha,
            retries,
            out,
        } => {
            let problem = cloud.problem();
            let domain = cloud.domain(seed);
            let c = match cloud_file {
                Some(p) => PointCloud::load_json(p)?,
                None => cloud.generate(seed)?,
            };
            let method = match method {
                MethodArg::Lsq => StencilMethod::Lsq,
                MethodArg::L1 => StencilMethod::L1,
            };
            let rule = match (neighbors, radius_factor) {
                (_, Some(f)) => {
                    if !(*f > 0.0) {
                        return Err(Failure::Usage(format!("radius factor must be positive, got {f}")));
                    }
                    let h = mesh_size(&c, &domain, DEFAULT_MESH_SAMPLES)?;
                    NeighborRule::MeshSizeFactor { factor: *f, mesh_size: h }
                }
                (Some(k), None) => NeighborRule::Nearest(*k),
                (None, None) => NeighborRule::Nearest(match method {
                    StencilMethod::L1 => MethodSpec::l1(c.dim()).neighbors,
                    StencilMethod::Lsq => 12,
                }),
            };
            let mut params = AssemblyParams::new(method, rule).with_retries(*retries);
            if let Some(a) = alpha {
                params.alpha = *a;
            }
            let sys = assemble(&c, &params, |p| problem.source(p))?;
            sys.export(out)?;
            let meta = sys.metadata();
            let text = format!(
                "n = {}, nnz = {}, mean interior row nnz = {:.2}, mean pivots = {:.2}; written to {}.{{mtx,rhs,json}}",
                meta.n,
                meta.nnz,
                meta.mean_interior_nnz,
                meta.mean_pivots,
                out.display()
            );
            let mut json = serde_json::to_value(&meta)?;
            if let Some(obj) = json.as_object_mut() {
                obj.remove("kinds");
                obj.insert("enlarged_points".into(), sys.stats.enlarged.len().into());
            }
            Ok(Output { json, text, ok: true })
        }
        Command::Check { system, no_oracle } => {
            let sys = LinearSystem::import(system)?;
            let rep = structure_report(&sys, !no_oracle);
            let json: serde_json::Value = serde_json::from_str(&rep.to_json())?;
            Ok(Output {
                text: serde_json::to_string_pretty(&json)?,
                json,
                ok: true,
            })
        }
        Command::Solve {
            system,
            solver,
            variant,
            coarsening,
            fine,
            tol,
            out,
        } => {
            if !(*tol > 0.0 && *tol < 1.0) {
                return Err(Failure::Usage(format!("tolerance must lie in (0, 1), got {tol}")));
            }
            let sys = LinearSystem::import(system)?;
            let spec = match solver {
                SolverArg::Bicgstab => SolverSpec::BicgstabIlu0,
                SolverArg::Amg => SolverSpec::AmgBicgstab,
                SolverArg::Amli => SolverSpec::Amli {
                    variant: match variant {
                        VariantArg::Amli => AmliVariant::Amli,
                        VariantArg::Mamli => AmliVariant::Mamli,
                        VariantArg::Rmamli => AmliVariant::Rmamli,
                        VariantArg::Smamli => AmliVariant::Smamli,
                    },
                    coarsening: match coarsening {
                        CoarseningArg::Default => Coarsening::Default,
                        CoarseningArg::Rs => Coarsening::RugeStueben,
                    },
                    fine: match fine {
                        FineArg::Jacobi => FineKind::Jacobi,
                        FineArg::Gs => FineKind::GaussSeidel,
                        FineArg::Ilu0 => FineKind::Ilu0,
                    },
                },
            };
            let res = solve(&sys.a, &sys.rhs, spec, *tol);
            if let (Some(path), Some(x)) = (out, &res.x) {
                write_lines(path, x)?;
            }
            let ok = res.converged();
            let json = json!({
                "solver": spec.to_string(),
                "converged": ok,
                "failure": res.failure,
                "setup_time": res.setup_time,
                "iterations": res.report.as_ref().map(|r| r.iterations),
                "relres": res.report.as_ref().map(|r| r.final_relres()),
                "report": res.report,
            });
            let text = match (&res.failure, &res.report) {
                (None, Some(r)) => format!("{spec}: converged in {} iterations, relres {:.2e}", r.iterations, r.final_relres()),
                (Some(f), _) => format!("{spec}: FAILED ({f})"),
                (None, None) => format!("{spec}: no report"),
            };
            Ok(Output { json, text, ok })
        }
        Command::Bench { study, quick, out_dir } => {
            let names: Vec<&str> = if study == "all" {
                STUDY_NAMES.to_vec()
            } else if STUDY_NAMES.contains(&study.as_str()) {
                vec![study.as_str()]
            } else {
                return Err(Failure::Usage(format!(
                    "unknown study {study:?}; expected one of {STUDY_NAMES:?} or all"
                )));
            };
            let mut files = vec![];
            let mut text = vec![];
            for name in names {
                for rep in named_study(name, seed, *quick)? {
                    let (j, c) = rep.write_files(out_dir).map_err(Failure::from)?;
                    text.push(format!(
                        "{}: {} runs, {} failures, orders {:?} -> {}",
                        rep.study,
                        rep.records.len(),
                        rep.failures().count(),
                        rep.orders,
                        j.display()
                    ));
                    files.push(json!({ "study": rep.study, "json": j, "csv": c, "config_hash": rep.config_hash }));
                }
            }
            Ok(Output {
                json: json!({ "reports": files }),
                text: text.join("\n"),
                ok: true,
            })
        }
        Command::Verify { criterion } => {
            let ids: Vec<usize> = if criterion.is_empty() { (1..=CRITERIA.len()).collect() } else { criterion.clone() };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA.len()) {
                return Err(Failure::Usage(format!("no criterion {bad}; expected 1-{}", CRITERIA.len())));
            }
            let corpus_seed = cli.seed.unwrap_or(0);
            let results: Vec<_> = ids.iter().filter_map(|&i| run_criterion(i, corpus_seed)).collect();
            let ok = results.iter().all(|r| r.passed);
            let passed = results.iter().filter(|r| r.passed).count();
            let mut text: Vec<String> = results.iter().map(|r| r.to_string()).collect();
            text.push(format!("{passed}/{} criteria passed", results.len()));
            Ok(Output {
                json: serde_json::to_value(&results)?,
                text: text.join("\n"),
                ok,
            })
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (code, json) = match run_command(&cli) {
        Ok(out) => {
            if !cli.quiet {
                // A closed pipe (e.g. `| head`) is not an error.
                let _ = writeln!(std::io::stdout(), "{}", out.text);
            }
            (if out.ok { 0 } else { 1 }, out.json)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            (1, json!({ "error": msg }))
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            (2, json!({ "error": msg }))
        }
    };
    if let Some(path) = &cli.json_out {
        let text = serde_json::to_string_pretty(&json).expect("JSON value serializes");
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return 2;
        }
    }
    code
}
