use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabfem::adapt::{solve_level, AdaptOptions, LevelOutcome};
use stabfem::bench::{metrics_csv, run_experiment_with, Overrides, RunMetrics, CSV_HEADER};
use stabfem::checks::run_checks;
use stabfem::mesh::io::{write_mesh, write_vtk, MeshData};
use stabfem::mesh::{delaunay_report, GridMode};
use stabfem::problem::{builtin_problem, ProblemKind};
use stabfem::solver::SolverMode;
use stabfem::stabilization::Method;
use stabfem::{Error, Result};

#[derive(Parser)]
#[command(name = "stabfem", version, about = "Algebraically stabilized P1 finite elements on adaptive grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full adaptive experiment.
    Run(RunArgs),
    /// One solve on a uniformly refined (or given) mesh.
    Solve(RunArgs),
    /// Refine, inspect and convert meshes.
    Mesh(MeshArgs),
    /// Invariant suite.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, default_value = "boundary-layer")]
    problem: ProblemKind,
    /// Diffusion coefficient; hemker always uses 1e-4.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mesh_in: Option<PathBuf>,
    #[arg(long, default_value = "conforming")]
    grid: GridMode,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "bjk")]
    method: Method,
    /// Stopping tolerance of the fixed-point iteration [default: 1e-10, 1e-8 for hemker].
    #[arg(long)]
    eps_thresh: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Stop after the first level with at least this many vertices.
    #[arg(long)]
    max_dof: Option<usize>,
    /// Cap on accepted plus rejected fixed-point steps.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value = "direct")]
    solver: SolverMode,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write solution and indicator fields per level.
    #[arg(long)]
    vtk: bool,
    /// Unused by the deterministic solver path; accepted for reproducible
    /// invocations.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct MeshArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of uniform refinements.
    #[arg(long, default_value_t = 0)]
    refine: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    vtk: bool,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn write_level(out: &Path, level: &LevelOutcome) -> Result<()> {
    let l = level.metrics.level;
    write_vtk(
        &out.join(format!("solution_{l}.vtk")),
        &level.mesh,
        &[("u", &level.solution)],
        &[],
    )?;
    write_vtk(
        &out.join(format!("indicators_{l}.vtk")),
        &level.mesh,
        &[],
        &[("eta", &level.local), ("eta_cell", &level.indicators.cells)],
    )
}

fn overrides(args: &RunArgs) -> Overrides {
    Overrides {
        epsilon: args.problem.eps,
        eps_thresh: args.eps_thresh,
        theta: Some(args.theta),
        budget: args.max_dof,
        mesh_in: args.problem.mesh_in.clone(),
        solver: Some(args.solver),
        max_steps: args.max_iter,
    }
}

fn finish(out: &Path, rows: &[RunMetrics]) -> Result<()> {
    fs::write(out.join("metrics.csv"), metrics_csv(rows))?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    println!("{CSV_HEADER}");
    let rows = run_experiment_with(
        args.problem.problem,
        args.method,
        args.problem.grid,
        &overrides(args),
        |level| {
            println!("{}", level.metrics.csv_row());
            if args.vtk {
                write_level(&args.out, level)?;
            }
            Ok(())
        },
    )?;
    finish(&args.out, &rows)
}

fn solve(args: &RunArgs) -> Result<()> {
    let p = &args.problem;
    let setup = builtin_problem(p.problem, p.eps, p.mesh_in.as_deref())?;
    let mut opts = AdaptOptions::for_setup(&setup, args.method, p.grid);
    opts.theta = args.theta;
    opts.solver = args.solver;
    if let Some(v) = args.eps_thresh {
        opts.eps_thresh = v;
    }
    if let Some(v) = args.max_iter {
        opts.max_steps = v;
    }
    let mut hier = setup.hierarchy;
    while hier.level() < setup.schedule.start_level {
        hier.refine_uniform(p.grid)?;
    }
    if let Some(target) = args.max_dof {
        while hier.num_vertices() < target {
            hier.refine_uniform(p.grid)?;
        }
    }
    let level = solve_level(hier.triangulation()?, &setup.spec, &opts)?;
    fs::create_dir_all(&args.out)?;
    println!("{CSV_HEADER}\n{}", level.metrics.csv_row());
    if args.vtk {
        write_level(&args.out, &level)?;
    }
    finish(&args.out, &[level.metrics])
}

fn mesh(args: &MeshArgs) -> Result<()> {
    let p = &args.problem;
    let setup = builtin_problem(p.problem, p.eps, p.mesh_in.as_deref())?;
    let mut hier = setup.hierarchy;
    for _ in 0..args.refine {
        hier.refine_uniform(p.grid)?;
    }
    let mesh = hier.triangulation()?;
    mesh.validate().map_err(config)?;
    println!(
        "level {}: {} vertices ({} hanging), {} cells, {} facets, area {:.12}, {} non-Delaunay edges",
        mesh.level,
        mesh.num_vertices(),
        mesh.hanging.len(),
        mesh.num_cells(),
        mesh.facets.len(),
        mesh.total_area(),
        delaunay_report(&mesh).count()
    );
    fs::create_dir_all(&args.out)?;
    write_mesh(&args.out.join("mesh.mesh"), &MeshData::from_triangulation(&mesh))?;
    if args.vtk {
        write_vtk(&args.out.join("mesh.vtk"), &mesh, &[], &[])?;
    }
    Ok(())
}

fn check(seed: u64) -> bool {
    let results = run_checks(seed);
    for c in &results {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    results.iter().all(|c| c.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Solve(a) => solve(a),
        Command::Mesh(a) => mesh(a),
        Command::Check { seed } => {
            return if check(*seed) { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 3 } else { 2 })
        }
    }
}
