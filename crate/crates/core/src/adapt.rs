//! Solve, estimate, mark and refine.

use crate::assembly::{discretize, error_norms, Discretization};
use crate::bench::{osc_max, smear_int, Cut, RunMetrics};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate, localize_for_marking, AfcData, EstimatorConstants, EstimatorVariant, IndicatorField,
};
use crate::mesh::{delaunay_report, GridMode, Triangulation};
use crate::problem::{ProblemSpec, Schedule, Setup};
use crate::solver::{fixed_point_solve, FixedPointOptions, SolveReport, SolverMode, MAX_STEPS};
use crate::stabilization::{bjk_geometry, Method, Stabilizer};

/// Maximum strategy: cells with indicator at least `theta` times the
/// largest one. All-zero indicators mark nothing.
pub fn mark_cells(indicators: &[f64], theta: f64) -> Vec<usize> {
    let max = indicators.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let t = theta * max;
    (0..indicators.len()).filter(|&c| indicators[c] >= t && indicators[c] > 0.0).collect()
}

#[derive(Clone, Debug)]
pub struct AdaptOptions {
    pub method: Method,
    pub grid: GridMode,
    /// Stop once a level has at least this many vertices.
    pub budget: usize,
    pub theta: f64,
    pub eps_thresh: f64,
    pub solver: SolverMode,
    pub max_steps: usize,
    pub schedule: Schedule,
    pub constants: EstimatorConstants,
    /// Cut and thresholds for the smearing metric.
    pub cut: Option<Cut>,
}

impl AdaptOptions {
    pub fn for_setup(setup: &Setup, method: Method, grid: GridMode) -> Self {
        Self {
            method,
            grid,
            budget: setup.default_budget,
            theta: 0.5,
            eps_thresh: setup.default_eps_thresh,
            solver: SolverMode::Direct,
            max_steps: MAX_STEPS,
            schedule: setup.schedule,
            constants: EstimatorConstants::default(),
            cut: Cut::for_problem(setup.kind),
        }
    }

    pub fn variant(&self) -> EstimatorVariant {
        if self.method.is_afc() {
            EstimatorVariant::AfcEnergy
        } else {
            EstimatorVariant::MuasIndicator
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.eps_thresh > 0.0) {
            return Err(Error::Config(format!("eps_thresh must be positive, got {}", self.eps_thresh)));
        }
        if self.schedule.uniform_until < self.schedule.start_level {
            return Err(Error::Config("uniform phase ends before the start level".into()));
        }
        Ok(())
    }
}

/// Everything computed on one level.
#[derive(Debug)]
pub struct LevelOutcome {
    pub mesh: Triangulation,
    pub disc: Discretization,
    /// Values at all vertices.
    pub solution: Vec<f64>,
    pub report: SolveReport,
    pub indicators: IndicatorField,
    /// Per-cell marking indicators.
    pub local: Vec<f64>,
    pub metrics: RunMetrics,
}

/// Discretizes, solves and estimates on one mesh.
pub fn solve_level(mesh: Triangulation, spec: &ProblemSpec, opts: &AdaptOptions) -> Result<LevelOutcome> {
    let disc = discretize(&mesh, spec)?;
    let a = disc.reduced.system.matrix.clone();
    let mask = disc.dirichlet_mask();
    let geometry = match opts.method {
        Method::Bjk => Some(bjk_geometry(&a, &disc.coords, &mask, &disc.on_boundary)?),
        _ => None,
    };
    let st = Stabilizer::new(opts.method, a, mask, geometry)?;
    let fp = FixedPointOptions {
        max_steps: opts.max_steps,
        mode: opts.solver,
        ..FixedPointOptions::new(opts.eps_thresh, disc.n_full)
    };
    let (u, report) = fixed_point_solve(&st, &disc.reduced.system.rhs, &disc.dirichlet, disc.initial_guess(), fp)?;
    if !report.converged {
        log::warn!(
            "level {}: fixed point stopped after {} steps at residual {:e}",
            mesh.level,
            report.steps(),
            report.final_residual
        );
    }
    let solution = disc.expand(&u)?;
    let alpha = st.limiters(&u)?;
    let afc = AfcData {
        to_reduced: &disc.reduced.to_reduced,
        alpha: &alpha,
        d: &st.d,
    };
    let indicators = estimate(&mesh, &solution, spec, Some(afc), opts.variant(), &opts.constants)?;
    let local = localize_for_marking(&mesh, &indicators);

    let norms = match spec.exact {
        Some(_) => Some(error_norms(&mesh, &solution, spec)?),
        None => None,
    };
    let smear = match &opts.cut {
        Some(cut) => Some(smear_int(&mesh, &solution, cut, (0.1, 0.9))?),
        None => None,
    };
    let metrics = RunMetrics {
        level: mesh.level,
        dof: mesh.num_vertices(),
        l2: norms.map(|n| n.l2),
        h1: norms.map(|n| n.h1_semi),
        eta: indicators.eta,
        osc_max: spec.bounds.map(|b| osc_max(&solution, b)),
        smear: smear.map(|s| s.value),
        smear_monotone: smear.map(|s| s.monotone),
        iterations: report.iterations,
        rejections: report.rejections,
        converged: report.converged,
        non_delaunay: delaunay_report(&mesh).count(),
        final_residual: report.final_residual,
    };
    Ok(LevelOutcome {
        mesh,
        disc,
        solution,
        report,
        indicators,
        local,
        metrics,
    })
}

/// Runs the adaptive loop from the level-0 hierarchy of `setup`. Levels below
/// the schedule's start are refined uniformly without solving; levels up to
/// `uniform_until` are solved and refined uniformly; later ones adaptively.
/// Stops once a solved level reaches the budget or nothing is marked.
pub fn adaptive_loop(
    setup: Setup,
    opts: &AdaptOptions,
    mut observe: impl FnMut(&LevelOutcome) -> Result<()>,
) -> Result<Vec<RunMetrics>> {
    opts.validate()?;
    let mut hier = setup.hierarchy;
    while hier.level() < opts.schedule.start_level {
        hier.refine_uniform(opts.grid)?;
    }
    let mut rows = Vec::new();
    loop {
        let mesh = hier.triangulation()?;
        let level = solve_level(mesh, &setup.spec, opts)?;
        log::info!(
            "level {} dof {} eta {:e} steps {}",
            level.metrics.level,
            level.metrics.dof,
            level.metrics.eta,
            level.report.steps()
        );
        observe(&level)?;
        rows.push(level.metrics.clone());
        if level.metrics.dof >= opts.budget {
            break;
        }
        if hier.level() < opts.schedule.uniform_until {
            hier.refine_uniform(opts.grid)?;
            continue;
        }
        let marked: Vec<usize> = mark_cells(&level.local, opts.theta)
            .into_iter()
            .map(|c| level.mesh.cells[c].source)
            .collect();
        if marked.is_empty() {
            break;
        }
        hier.refine(&marked, opts.grid)?;
    }
    Ok(rows)
}
