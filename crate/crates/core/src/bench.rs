//! Benchmark metrics and experiment drivers.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::adapt::{adaptive_loop, AdaptOptions, LevelOutcome};
use crate::error::Result;
use crate::mesh::{GridMode, Point, PointLocator, Triangulation};
use crate::problem::{builtin_problem, ProblemKind};
use crate::solver::SolverMode;
use crate::stabilization::Method;

/// Samples per cut line (100000 intervals).
pub const CUT_SAMPLES: usize = 100_001;
pub const CSV_SCHEMA: &str = "#schema=1";
pub const CSV_HEADER: &str =
    "level,dof,l2,h1,eta,osc_max,smear,iterations,rejections,converged,non_delaunay";

/// Undershoot plus overshoot: `(max u - hi) - (min u - lo)`, with extrema
/// over the vertex values.
pub fn osc_max(u: &[f64], bounds: (f64, f64)) -> f64 {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    max - bounds.1 - min + bounds.0
}

/// Straight cut with one coordinate fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    /// Index of the fixed coordinate.
    pub fixed_axis: usize,
    pub value: f64,
    pub range: (f64, f64),
}

impl Cut {
    /// `y = value`, `x` running over `range`.
    pub fn horizontal(value: f64, range: (f64, f64)) -> Self {
        Self { fixed_axis: 1, value, range }
    }

    /// `x = value`, `y` running over `range`.
    pub fn vertical(value: f64, range: (f64, f64)) -> Self {
        Self { fixed_axis: 0, value, range }
    }

    pub fn point(&self, s: f64) -> Point {
        if self.fixed_axis == 0 {
            [self.value, s]
        } else {
            [s, self.value]
        }
    }

    pub fn length(&self) -> f64 {
        self.range.1 - self.range.0
    }

    /// Cut the smearing of a problem is measured on.
    pub fn for_problem(kind: ProblemKind) -> Option<Self> {
        match kind {
            ProblemKind::BoundaryLayer => None,
            ProblemKind::Hmm86 => Some(Self::horizontal(0.25, (0.0, 1.0))),
            ProblemKind::Hemker => Some(Self::vertical(4.0, (0.2, 2.0))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smear {
    /// `|s_2 - s_1|`, infinite if a threshold is never crossed.
    pub value: f64,
    /// Whether the sampled profile is monotone.
    pub monotone: bool,
}

/// First crossing of `level` scanning forward, linearly interpolated.
fn first_crossing(s: &[f64], v: &[f64], level: f64) -> Option<f64> {
    if v.first() == Some(&level) {
        return Some(s[0]);
    }
    (1..v.len()).find_map(|k| {
        let (a, b) = (v[k - 1] - level, v[k] - level);
        if a == 0.0 {
            Some(s[k - 1])
        } else if a * b <= 0.0 {
            Some(s[k - 1] + (s[k] - s[k - 1]) * a / (a - b))
        } else {
            None
        }
    })
}

/// Smearing width from sampled values along a cut.
pub fn smear_from_samples(s: &[f64], v: &[f64], thresholds: (f64, f64)) -> Smear {
    let up = v.windows(2).all(|w| w[1] >= w[0]);
    let down = v.windows(2).all(|w| w[1] <= w[0]);
    let value = match (first_crossing(s, v, thresholds.0), first_crossing(s, v, thresholds.1)) {
        (Some(a), Some(b)) => (b - a).abs(),
        _ => f64::INFINITY,
    };
    Smear {
        value,
        monotone: up || down,
    }
}

/// Width of the layer along `cut` between the `thresholds` levels, from
/// [`CUT_SAMPLES`] equidistant samples.
pub fn smear_int(mesh: &Triangulation, u: &[f64], cut: &Cut, thresholds: (f64, f64)) -> Result<Smear> {
    let locator = PointLocator::new(mesh);
    let n = CUT_SAMPLES - 1;
    let s: Vec<f64> = (0..=n)
        .map(|k| cut.range.0 + cut.length() * k as f64 / n as f64)
        .collect();
    let v = s
        .iter()
        .map(|&si| {
            let p = cut.point(si);
            locator
                .evaluate(u, p)
                .ok_or(crate::error::Error::OutsideDomain(p[0], p[1]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(smear_from_samples(&s, &v, thresholds))
}

/// One row of the per-level table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub level: usize,
    /// All vertices, hanging and Dirichlet ones included.
    pub dof: usize,
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub eta: f64,
    pub osc_max: Option<f64>,
    pub smear: Option<f64>,
    pub smear_monotone: Option<bool>,
    pub iterations: usize,
    pub rejections: usize,
    pub converged: bool,
    pub non_delaunay: usize,
    pub final_residual: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl RunMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{},{},{},{},{},{}",
            self.level,
            self.dof,
            opt(self.l2),
            opt(self.h1),
            self.eta,
            opt(self.osc_max),
            opt(self.smear),
            self.iterations,
            self.rejections,
            self.converged,
            self.non_delaunay
        )
    }
}

pub fn metrics_csv(rows: &[RunMetrics]) -> String {
    let mut out = format!("{CSV_SCHEMA}\n{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Changes to a builtin experiment's defaults.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub eps_thresh: Option<f64>,
    pub theta: Option<f64>,
    pub budget: Option<usize>,
    pub mesh_in: Option<PathBuf>,
    pub solver: Option<SolverMode>,
    pub max_steps: Option<usize>,
}

/// Runs a builtin experiment; `observe` sees every level before it is
/// dropped.
pub fn run_experiment_with(
    kind: ProblemKind,
    method: Method,
    grid: GridMode,
    overrides: &Overrides,
    observe: impl FnMut(&LevelOutcome) -> Result<()>,
) -> Result<Vec<RunMetrics>> {
    let setup = builtin_problem(kind, overrides.epsilon, overrides.mesh_in.as_deref())?;
    let mut opts = AdaptOptions::for_setup(&setup, method, grid);
    if let Some(v) = overrides.eps_thresh {
        opts.eps_thresh = v;
    }
    if let Some(v) = overrides.theta {
        opts.theta = v;
    }
    if let Some(v) = overrides.budget {
        opts.budget = v;
    }
    if let Some(v) = overrides.solver {
        opts.solver = v;
    }
    if let Some(v) = overrides.max_steps {
        opts.max_steps = v;
    }
    adaptive_loop(setup, &opts, observe)
}

pub fn run_experiment(
    kind: ProblemKind,
    method: Method,
    grid: GridMode,
    overrides: &Overrides,
) -> Result<Vec<RunMetrics>> {
    run_experiment_with(kind, method, grid, overrides, |_| Ok(()))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::mesh::BoundaryTag;

    #[test]
    fn osc_examples() {
        assert_eq!(osc_max(&[0.0, 0.3, 1.0], (0.0, 1.0)), 0.0);
        assert!((osc_max(&[1.01, 0.5, -0.02], (0.0, 1.0)) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn osc_translation_covariant() {
        let u = [0.2, -0.1, 1.3, 0.7];
        let shifted: Vec<f64> = u.iter().map(|x| x + 5.0).collect();
        assert!((osc_max(&u, (0.0, 1.0)) - osc_max(&shifted, (5.0, 6.0))).abs() < 1e-14);
    }

    fn samples(f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let n = CUT_SAMPLES - 1;
        let s: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let v = s.iter().map(|&x| f(x)).collect();
        (s, v)
    }

    #[test]
    fn linear_ramp() {
        let (s, v) = samples(|x| ((x - 0.4) / 0.2).clamp(0.0, 1.0));
        let m = smear_from_samples(&s, &v, (0.1, 0.9));
        assert!((m.value - 0.16).abs() < 1e-12, "{}", m.value);
        assert!(m.monotone);
        let narrow = smear_from_samples(&s, &v, (0.2, 0.8));
        assert!(narrow.value <= m.value);
    }

    #[test]
    fn jump_between_samples() {
        let (s, v) = samples(|x| if x > 0.500_003 { 1.0 } else { 0.0 });
        let m = smear_from_samples(&s, &v, (0.1, 0.9));
        assert!(m.value <= 0.8 / 100_000.0 + 1e-15);
    }

    #[test]
    fn unresolved_layer_is_infinite() {
        let (s, v) = samples(|x| 0.5 * x);
        assert!(smear_from_samples(&s, &v, (0.1, 0.9)).value.is_infinite());
    }

    #[test]
    fn decreasing_profile() {
        let (s, v) = samples(|x| 1.0 - ((x - 0.4) / 0.2).clamp(0.0, 1.0));
        assert!((smear_from_samples(&s, &v, (0.1, 0.9)).value - 0.16).abs() < 1e-12);
    }

    #[test]
    fn smear_on_a_mesh() {
        let n = 10;
        let mut coords = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                coords.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = j * (n + 1) + i;
                cells.push([v, v + 1, v + n + 2]);
                cells.push([v, v + n + 2, v + n + 1]);
            }
        }
        let mesh = Triangulation::from_cells(coords, &cells, |_, _| Some(BoundaryTag::Dirichlet)).unwrap();
        let u: Vec<f64> = mesh.vertices.iter().map(|v| ((v.coords[0] - 0.4) / 0.2).clamp(0.0, 1.0)).collect();
        let m = smear_int(&mesh, &u, &Cut::horizontal(0.25, (0.0, 1.0)), (0.1, 0.9)).unwrap();
        assert!((m.value - 0.16).abs() < 1e-9);
        assert!(smear_int(&mesh, &u, &Cut::horizontal(1.5, (0.0, 1.0)), (0.1, 0.9)).is_err());
    }

    #[test]
    fn vertex_extrema_are_global_extrema() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mesh = crate::mesh::single_hanging_patch();
        let mut u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        u[0] = 0.5 * (u[1] + u[3]);
        let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        for _ in 0..1000 {
            let c = rng.gen_range(0..mesh.num_cells());
            let mut l = [rng.gen::<f64>(), rng.gen::<f64>(), 0.0];
            if l[0] + l[1] > 1.0 {
                l = [1.0 - l[0], 1.0 - l[1], 0.0];
            }
            l[2] = 1.0 - l[0] - l[1];
            let p = crate::quadrature::to_cartesian(&mesh.cell_points(c), l);
            let v = mesh.eval_in_cell(c, &u, p);
            assert!(v >= lo - 1e-14 && v <= hi + 1e-14);
        }
    }

    #[test]
    fn csv_layout() {
        let row = RunMetrics {
            level: 2,
            dof: 25,
            l2: Some(0.5),
            eta: 1.0,
            smear: Some(f64::INFINITY),
            converged: true,
            ..RunMetrics::default()
        };
        let csv = metrics_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "#schema=1");
        assert_eq!(lines[1].split(',').count(), 11);
        assert_eq!(lines[2], "2,25,5e-1,,1e0,,inf,0,0,true,0");
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (10f64.powi(k), 3.0 * 10f64.powf(-0.5 * k as f64))).collect();
        assert!((loglog_slope(&pts) + 0.5).abs() < 1e-12);
    }
}
