//! Invariant suite run by `stabfem check` and reused by the integration
//! tests.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapt::{solve_level, AdaptOptions};
use crate::error::Result;
use crate::estimator::{compensated_sum, localize_for_marking};
use crate::mesh::io::{format_mesh, parse_mesh, MeshData};
use crate::mesh::{hanging_constraints, single_hanging_patch, BoundaryTag, ConstraintSet, GridHierarchy, GridMode, Triangulation};
use crate::problem::{builtin_problem, ProblemKind, HEMKER_MESH};
use crate::solver::dirichlet_residual;
use crate::sparse::CsrMatrix;
use crate::stabilization::{BjkGeometry, LimiterField, Method, Stabilizer};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// Random matrix with a structurally symmetric pattern, a positive diagonal
/// and off-diagonals of both signs.
pub fn random_matrix(rng: &mut impl Rng, n: usize, density: f64) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, rng.gen_range(0.5..4.0)));
        for j in i + 1..n {
            if rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
                t.push((j, i, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Worst violation of the structural limiter and stabilization properties
/// for one system: limiters in `[0, 1]`, symmetric AFC limiters, and a
/// symmetric `B` with zero row sums and nonpositive off-diagonals. Returns
/// a description of the first failure.
pub fn limiter_properties(st: &Stabilizer<f64>, alpha: &LimiterField<f64>) -> std::result::Result<(), String> {
    let a = &st.a;
    let tr = st.transpose();
    let n = a.nrows();
    for (k, &v) in alpha.values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("limiter {v} at position {k} outside [0, 1]"));
        }
        if st.method.is_afc() && v != alpha.values[tr[k]] {
            return Err(format!("AFC limiter not symmetric at position {k}"));
        }
    }
    let b = st.stabilization_matrix(alpha).map_err(|e| e.to_string())?;
    let bv = b.values();
    for i in 0..n {
        let mut sum = 0.0;
        let mut scale = 0.0f64;
        for k in b.row_range(i) {
            let j = b.col_idx()[k];
            sum += bv[k];
            scale = scale.max(bv[k].abs());
            if j != i && bv[k] > 0.0 {
                return Err(format!("B({i},{j}) = {} is positive", bv[k]));
            }
            if bv[k] != bv[tr[k]] {
                return Err(format!("B not symmetric at ({i},{j})"));
            }
        }
        if sum.abs() > 1e-14 * scale.max(1.0) {
            return Err(format!("row {i} of B sums to {sum:e}"));
        }
    }
    Ok(())
}

/// Limiter behaviour under constant and shifted states: `alpha` is 1 for a
/// constant `u`, unchanged (up to `1e-12`) when `u` is shifted, and for MUAS
/// `A + D + B` has nonpositive off-diagonals.
pub fn limiter_invariances(st: &Stabilizer<f64>, u: &[f64]) -> std::result::Result<(), String> {
    let err = |e: crate::Error| e.to_string();
    let flat = st.limiters(&vec![0.3; u.len()]).map_err(err)?;
    if let Some(k) = flat.values.iter().position(|&v| v != 1.0) {
        return Err(format!("limiter {} at position {k} for constant u", flat.values[k]));
    }
    let alpha = st.limiters(u).map_err(err)?;
    let shifted: Vec<f64> = u.iter().map(|v| v + 0.375).collect();
    let moved = st.limiters(&shifted).map_err(err)?;
    for (k, (a, b)) in alpha.values.iter().zip(&moved.values).enumerate() {
        if (a - b).abs() > 1e-12 {
            return Err(format!("shift changes the limiter at position {k}: {a} vs {b}"));
        }
    }
    if st.method == Method::Muas {
        let b = st.stabilization_matrix(&alpha).map_err(err)?;
        let total = st.a.add(&st.d).add(&b);
        for i in 0..total.nrows() {
            if let Some((j, v)) = total.row(i).find(|&(j, v)| j != i && v > 0.0) {
                return Err(format!("(A+D+B)({i},{j}) = {v} is positive"));
            }
        }
    }
    Ok(())
}

/// `count` random systems of size `n` for each method.
pub fn check_random_limiters(seed: u64, count: usize, n: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..count {
        let a = random_matrix(&mut rng, n, 0.35);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gamma: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
        for method in Method::ALL {
            let st = match Stabilizer::new(method, a.clone(), vec![false; n], Some(BjkGeometry { gamma: gamma.clone() })) {
                Ok(st) => st,
                Err(e) => return CheckOutcome::new("limiter properties", false, e.to_string()),
            };
            let res = st
                .limiters(&u)
                .map_err(|e| e.to_string())
                .and_then(|al| limiter_properties(&st, &al))
                .and_then(|()| limiter_invariances(&st, &u));
            if let Err(e) = res {
                return CheckOutcome::new("limiter properties", false, format!("system {t}, {method}: {e}"));
            }
        }
    }
    CheckOutcome::new("limiter properties", true, format!("{count} systems of size {n}, all methods"))
}

/// Unit square hierarchy with random local hanging refinement.
pub fn random_hanging_grid(rng: &mut impl Rng, steps: usize) -> Result<Triangulation> {
    let boundary = [(0, 1), (1, 2), (2, 3), (3, 0)]
        .into_iter()
        .map(|e| (e, BoundaryTag::Dirichlet))
        .collect();
    let mut h = GridHierarchy::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        &[[0, 1, 2], [0, 2, 3]],
        boundary,
        None,
    )?;
    h.refine_uniform(GridMode::Hanging)?;
    for _ in 0..steps {
        let t = h.triangulation()?;
        let centre = [rng.gen::<f64>(), rng.gen::<f64>()];
        let radius = rng.gen_range(0.1..0.4);
        let pick: Vec<usize> = t
            .cells
            .iter()
            .filter(|c| {
                let p = t.cell_points(c.id);
                let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
                let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
                (cx - centre[0]).hypot(cy - centre[1]) < radius
            })
            .map(|c| c.source)
            .collect();
        h.refine(&pick, GridMode::Hanging)?;
    }
    h.triangulation()
}

/// Largest jump of the P1 function `u` across facets, sampled at `per_edge`
/// random points of every interior facet.
pub fn continuity_defect(mesh: &Triangulation, u: &[f64], rng: &mut impl Rng, per_edge: usize) -> f64 {
    let mut worst = 0.0f64;
    for f in mesh.facets.iter().filter(|f| f.cells.len() == 2) {
        let (pa, pb) = (mesh.coords(f.vertices[0]), mesh.coords(f.vertices[1]));
        for _ in 0..per_edge {
            let t: f64 = rng.gen();
            let p = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let v0 = mesh.eval_in_cell(f.cells[0], u, p);
            let v1 = mesh.eval_in_cell(f.cells[1], u, p);
            worst = worst.max((v0 - v1).abs());
        }
    }
    worst
}

fn check_constraints() -> CheckOutcome {
    let name = "hanging constraints";
    let patch = single_hanging_patch();
    let cs: ConstraintSet<Rational64> = match hanging_constraints(&patch) {
        Ok(cs) => cs,
        Err(e) => return CheckOutcome::new(name, false, e.to_string()),
    };
    let half = Rational64::new(1, 2);
    if cs.row(0) != Some(&[(1, half), (3, half)][..]) {
        return CheckOutcome::new(name, false, format!("patch row {:?}", cs.row(0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let mesh = match random_hanging_grid(&mut rng, 4) {
            Ok(m) => m,
            Err(e) => return CheckOutcome::new(name, false, e.to_string()),
        };
        if let Err(e) = mesh.validate() {
            return CheckOutcome::new(name, false, e);
        }
        let cs: ConstraintSet<Rational64> = match hanging_constraints(&mesh) {
            Ok(cs) => cs,
            Err(e) => return CheckOutcome::new(name, false, e.to_string()),
        };
        for (q, row) in cs.iter() {
            let sum: Rational64 = row.iter().map(|&(_, a)| a).sum();
            if sum != Rational64::from_integer(1) || row.iter().any(|&(p, _)| mesh.is_hanging(p)) {
                return CheckOutcome::new(name, false, format!("row of vertex {q}"));
            }
        }
    }
    CheckOutcome::new(name, true, "exact halves on the patch, partition of unity on random grids")
}

fn check_mesh_roundtrip() -> CheckOutcome {
    let name = "mesh file round trip";
    let result = parse_mesh(HEMKER_MESH).and_then(|data| {
        let again = parse_mesh(&format_mesh(&data))?;
        let mesh = data.clone().into_hierarchy(None)?.triangulation()?;
        let back = MeshData::from_triangulation(&mesh);
        Ok(again.coords == data.coords && again.cells == data.cells && back.boundary.len() == data.boundary.len())
    });
    match result {
        Ok(ok) => CheckOutcome::new(name, ok, "shipped obstacle mesh"),
        Err(e) => CheckOutcome::new(name, false, e.to_string()),
    }
}

/// Solves hmm86 on a small adaptive hanging grid with every method and checks
/// the solver contract, the discrete maximum principle, continuity and
/// estimator conservation.
fn check_small_runs(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut contract = Ok(());
    let mut dmp = Ok(());
    let mut cont = Ok(());
    let mut conservation = Ok(());
    for grid in [GridMode::Conforming, GridMode::Hanging] {
        for method in Method::ALL {
            let mut run = || -> Result<()> {
                let setup = builtin_problem(ProblemKind::Hmm86, None, None)?;
                let opts = AdaptOptions::for_setup(&setup, method, grid);
                let mut hier = setup.hierarchy;
                for _ in 0..3 {
                    hier.refine_uniform(grid)?;
                }
                let mesh = hier.triangulation()?;
                let cells: Vec<usize> = mesh.cells.iter().filter(|_| rng.gen_bool(0.3)).map(|c| c.source).collect();
                hier.refine(&cells, grid)?;
                let level = solve_level(hier.triangulation()?, &setup.spec, &opts)?;
                let tag = format!("{method} {grid}");
                let st = {
                    let a = level.disc.reduced.system.matrix.clone();
                    let mask = level.disc.dirichlet_mask();
                    let geometry = (method == Method::Bjk).then(|| {
                        crate::stabilization::bjk_geometry(&a, &level.disc.coords, &mask, &level.disc.on_boundary)
                    });
                    Stabilizer::new(method, a, mask, geometry.transpose()?)?
                };
                let u: Vec<f64> = level.disc.reduced.to_full.iter().map(|&v| level.solution[v]).collect();
                let res = dirichlet_residual(&st, &level.disc.reduced.system.rhs, &level.disc.dirichlet, &u)?;
                // A capped solve is reported, not a contract violation.
                let over = level.report.converged && !(res <= level.report.threshold);
                if over || level.report.max_offdiag > 0.0 {
                    contract = Err(format!("{tag}: residual {res:e}, threshold {:e}", level.report.threshold));
                }
                if method != Method::Kuzmin || grid == GridMode::Conforming {
                    let osc = level.metrics.osc_max.unwrap_or(f64::NAN);
                    if !(osc <= 1e-8) {
                        dmp = Err(format!("{tag}: osc_max {osc:e}"));
                    }
                }
                let jump = continuity_defect(&level.mesh, &level.solution, &mut rng, 3);
                if jump > 1e-12 {
                    cont = Err(format!("{tag}: jump {jump:e}"));
                }
                let total = compensated_sum(&localize_for_marking(&level.mesh, &level.indicators));
                let eta2 = level.indicators.eta.powi(2);
                if (total - eta2).abs() > 1e-13 * eta2 {
                    conservation = Err(format!("{tag}: {total:e} vs {eta2:e}"));
                }
                Ok(())
            };
            if let Err(e) = run() {
                contract = Err(format!("{method} {grid}: {e}"));
            }
        }
    }
    let done = |name, r: std::result::Result<(), String>, ok: &str| match r {
        Ok(()) => CheckOutcome::new(name, true, ok.to_string()),
        Err(e) => CheckOutcome::new(name, false, e),
    };
    out.push(done("solver contract", contract, "residual and M-matrix left operator"));
    out.push(done("discrete maximum principle", dmp, "osc_max <= 1e-8"));
    out.push(done("hanging continuity", cont, "jumps <= 1e-12"));
    out.push(done("estimator conservation", conservation, "localized sum equals eta^2"));
    out
}

/// Runs every check; randomized instances are drawn from `seed`.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = vec![
        check_random_limiters(seed, 50, 15),
        check_constraints(),
        check_mesh_roundtrip(),
    ];
    out.extend(check_small_runs(seed));
    out
}
