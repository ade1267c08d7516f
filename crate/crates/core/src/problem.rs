//! PDE data and the builtin benchmark problems.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::io::{parse_mesh, read_mesh, MeshData};
use crate::mesh::{edge_key, BoundaryCurve, BoundaryTag, GridHierarchy, Point, GEOM_TOL};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
/// Value and gradient of a closed-form solution.
pub type ExactField = Arc<dyn Fn(Point) -> (f64, [f64; 2]) + Send + Sync>;

/// Data of `-eps Δu + b·∇u + c u = f` with Dirichlet data `u_b` and Neumann
/// data `g` (for `eps ∇u·n = g`).
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub epsilon: f64,
    pub convection: VectorField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    pub neumann: ScalarField,
    /// Lower bound of `c - div(b)/2`; zero selects the diffusive branch of
    /// every estimator weight.
    pub sigma0: f64,
    pub exact: Option<ExactField>,
    /// Range the continuous solution is known to lie in.
    pub bounds: Option<(f64, f64)>,
    pub inside: Arc<dyn Fn(Point) -> bool + Send + Sync>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("sigma0", &self.sigma0)
            .field("exact", &self.exact.is_some())
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

fn constant(v: f64) -> ScalarField {
    Arc::new(move |_| v)
}

impl ProblemSpec {
    /// Problem with constant coefficients, zero data and no exact solution;
    /// a starting point for tests.
    pub fn constant(epsilon: f64, b: [f64; 2], c: f64, f: f64) -> Self {
        Self {
            name: "constant".into(),
            epsilon,
            convection: Arc::new(move |_| b),
            reaction: constant(c),
            source: constant(f),
            dirichlet: constant(0.0),
            neumann: constant(0.0),
            sigma0: c.max(0.0),
            exact: None,
            bounds: None,
            inside: Arc::new(|_| true),
        }
    }

    /// Values and gradients of the exact solution.
    pub fn evaluate_exact(&self, points: &[Point]) -> Result<Vec<(f64, [f64; 2])>> {
        let exact = self.exact.as_ref().ok_or(Error::NoExactSolution)?;
        points
            .iter()
            .map(|&p| {
                if (self.inside)(p) {
                    Ok(exact(p))
                } else {
                    Err(Error::OutsideDomain(p[0], p[1]))
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    BoundaryLayer,
    Hmm86,
    Hemker,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BoundaryLayer => "boundary-layer",
            Self::Hmm86 => "hmm86",
            Self::Hemker => "hemker",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary-layer" | "boundary_layer" => Ok(Self::BoundaryLayer),
            "hmm86" => Ok(Self::Hmm86),
            "hemker" => Ok(Self::Hemker),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

/// Levels at which the adaptive loop starts solving and stops refining
/// uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub start_level: usize,
    pub uniform_until: usize,
}

#[derive(Clone, Debug)]
pub struct Setup {
    pub kind: ProblemKind,
    pub spec: ProblemSpec,
    /// Level-0 hierarchy.
    pub hierarchy: GridHierarchy,
    pub schedule: Schedule,
    pub default_eps_thresh: f64,
    pub default_budget: usize,
}

fn inside_unit_square(p: Point) -> bool {
    (-GEOM_TOL..=1.0 + GEOM_TOL).contains(&p[0]) && (-GEOM_TOL..=1.0 + GEOM_TOL).contains(&p[1])
}

/// Closed-form solution of the boundary layer problem with value, gradient
/// and Laplacian.
pub fn boundary_layer_exact(eps: f64, p: Point) -> (f64, [f64; 2], f64) {
    let [x, y] = p;
    let e1 = (2.0 * (x - 1.0) / eps).exp();
    let e2 = (3.0 * (y - 1.0) / eps).exp();
    let e3 = e1 * e2;
    let u = x * y * y - y * y * e1 - x * e2 + e3;
    let ux = y * y - 2.0 / eps * y * y * e1 - e2 + 2.0 / eps * e3;
    let uy = 2.0 * x * y - 2.0 * y * e1 - 3.0 / eps * x * e2 + 3.0 / eps * e3;
    let uxx = -4.0 / (eps * eps) * y * y * e1 + 4.0 / (eps * eps) * e3;
    let uyy = 2.0 * x - 2.0 * e1 - 9.0 / (eps * eps) * x * e2 + 9.0 / (eps * eps) * e3;
    (u, [ux, uy], uxx + uyy)
}

pub fn boundary_layer(eps: f64) -> ProblemSpec {
    let b = [2.0, 3.0];
    ProblemSpec {
        name: ProblemKind::BoundaryLayer.name().into(),
        epsilon: eps,
        convection: Arc::new(move |_| b),
        reaction: constant(1.0),
        source: Arc::new(move |p| {
            let (u, g, lap) = boundary_layer_exact(eps, p);
            -eps * lap + b[0] * g[0] + b[1] * g[1] + u
        }),
        dirichlet: Arc::new(move |p| boundary_layer_exact(eps, p).0),
        neumann: constant(0.0),
        sigma0: 1.0,
        exact: Some(Arc::new(move |p| {
            let (u, g, _) = boundary_layer_exact(eps, p);
            (u, g)
        })),
        bounds: None,
        inside: Arc::new(inside_unit_square),
    }
}

pub fn hmm86(eps: f64) -> ProblemSpec {
    let angle = -PI / 3.0;
    let b = [angle.cos(), angle.sin()];
    ProblemSpec {
        name: ProblemKind::Hmm86.name().into(),
        epsilon: eps,
        convection: Arc::new(move |_| b),
        reaction: constant(0.0),
        source: constant(0.0),
        dirichlet: Arc::new(|[x, y]| {
            let top = (y - 1.0).abs() <= GEOM_TOL && x > GEOM_TOL;
            let left = x.abs() <= GEOM_TOL && y > 0.7 + GEOM_TOL;
            if top || left {
                1.0
            } else {
                0.0
            }
        }),
        neumann: constant(0.0),
        sigma0: 0.0,
        exact: None,
        bounds: Some((0.0, 1.0)),
        inside: Arc::new(inside_unit_square),
    }
}

pub const HEMKER_EPSILON: f64 = 1e-4;

pub fn hemker() -> ProblemSpec {
    ProblemSpec {
        name: ProblemKind::Hemker.name().into(),
        epsilon: HEMKER_EPSILON,
        convection: Arc::new(|_| [1.0, 0.0]),
        reaction: constant(0.0),
        source: constant(0.0),
        dirichlet: Arc::new(|p| {
            if p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-9 {
                1.0
            } else {
                0.0
            }
        }),
        neumann: constant(0.0),
        sigma0: 0.0,
        exact: None,
        bounds: Some((0.0, 1.0)),
        inside: Arc::new(|[x, y]| {
            (-3.0 - GEOM_TOL..=9.0 + GEOM_TOL).contains(&x)
                && (-3.0 - GEOM_TOL..=3.0 + GEOM_TOL).contains(&y)
                && x * x + y * y >= 1.0 - 1e-9
        }),
    }
}

fn unit_square(diagonal_from_origin: bool) -> Result<GridHierarchy> {
    let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let cells = if diagonal_from_origin {
        [[0, 1, 2], [0, 2, 3]]
    } else {
        [[0, 1, 3], [1, 2, 3]]
    };
    let boundary = [(0, 1), (1, 2), (2, 3), (3, 0)]
        .into_iter()
        .map(|e| (e, BoundaryTag::Dirichlet))
        .collect();
    GridHierarchy::new(coords, &cells, boundary, None)
}

/// Initial grid for the Hemker problem: graded rings between the unit circle
/// and the square `[-2, 2]^2`, and a tensor grid on the rest of the channel.
pub fn hemker_initial_mesh() -> MeshData {
    const N: usize = 24;
    const FRACS: [f64; 4] = [0.0, 0.3, 0.65, 1.0];
    let mut coords: Vec<Point> = Vec::new();
    fn add(coords: &mut Vec<Point>, p: Point) -> usize {
        if let Some(i) = coords
            .iter()
            .position(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9)
        {
            return i;
        }
        coords.push(p);
        coords.len() - 1
    }
    let mut cells: Vec<[usize; 3]> = Vec::new();

    let mut ring = vec![[0usize; N]; FRACS.len()];
    for (k, &s) in FRACS.iter().enumerate() {
        for (i, slot) in ring[k].iter_mut().enumerate() {
            let t = 2.0 * PI * i as f64 / N as f64;
            let (c, d) = (t.cos(), t.sin());
            let scale = 2.0 / c.abs().max(d.abs());
            let (cx, cy) = if i == 0 { (1.0, 0.0) } else { (c, d) };
            let sq = [cx * scale, cy * scale];
            let p = [(1.0 - s) * cx + s * sq[0], (1.0 - s) * cy + s * sq[1]];
            // Snap square points so they coincide with the tensor grid.
            let p = p.map(|v| if (v.abs() - 2.0).abs() < 1e-12 { 2.0 * v.signum() } else { v });
            *slot = add(&mut coords, p);
        }
    }
    for k in 0..FRACS.len() - 1 {
        for i in 0..N {
            let j = (i + 1) % N;
            let (a, b, c, d) = (ring[k][i], ring[k][j], ring[k + 1][j], ring[k + 1][i]);
            let len = |u: usize, v: usize| {
                let (p, q) = (coords[u], coords[v]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            };
            // Split along the shorter diagonal.
            if len(a, c) <= len(b, d) {
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            } else {
                cells.push([a, b, d]);
                cells.push([b, c, d]);
            }
        }
    }

    let side: Vec<f64> = (-3..=3)
        .map(|i| 2.0 * (PI / 12.0 * i as f64).tan())
        .collect();
    let mut xs = vec![-3.0];
    xs.extend(&side);
    xs.extend([3.0, 4.5, 6.5, 9.0]);
    let mut ys = vec![-3.0];
    ys.extend(&side);
    ys.push(3.0);
    for w in xs.windows(2) {
        for h in ys.windows(2) {
            let (cx, cy) = (0.5 * (w[0] + w[1]), 0.5 * (h[0] + h[1]));
            if cx.abs() < 2.0 && cy.abs() < 2.0 {
                continue;
            }
            let v00 = add(&mut coords, [w[0], h[0]]);
            let v10 = add(&mut coords, [w[1], h[0]]);
            let v11 = add(&mut coords, [w[1], h[1]]);
            let v01 = add(&mut coords, [w[0], h[1]]);
            if cy > 0.0 {
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            } else {
                cells.push([v00, v10, v01]);
                cells.push([v10, v11, v01]);
            }
        }
    }

    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for c in &cells {
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
            *count.entry(edge_key(a, b)).or_default() += 1;
        }
    }
    let on_circle = |p: Point| (p[0].hypot(p[1]) - 1.0).abs() < 1e-9;
    let boundary = count
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|((a, b), _)| {
            let (p, q) = (coords[a], coords[b]);
            let dirichlet = (on_circle(p) && on_circle(q))
                || ((p[0] + 3.0).abs() < 1e-12 && (q[0] + 3.0).abs() < 1e-12);
            let tag = if dirichlet {
                BoundaryTag::Dirichlet
            } else {
                BoundaryTag::Neumann
            };
            ((a, b), tag)
        })
        .collect();
    MeshData {
        coords,
        cells,
        boundary,
    }
}

/// Initial grid of the obstacle problem in the mesh file format.
pub const HEMKER_MESH: &str = include_str!("../data/hemker.mesh");

/// Builtin problem with its level-0 grid. `epsilon` overrides the default
/// diffusion (ignored for Hemker). `mesh_in` replaces the builtin initial
/// grid; a user grid on the unit square is solved as given, without the
/// uniform start phase.
pub fn builtin_problem(
    kind: ProblemKind,
    epsilon: Option<f64>,
    mesh_in: Option<&Path>,
) -> Result<Setup> {
    let uniform = Schedule {
        start_level: 2,
        uniform_until: 5,
    };
    let as_given = Schedule {
        start_level: 0,
        uniform_until: 0,
    };
    let square = |diagonal_from_origin| -> Result<(GridHierarchy, Schedule)> {
        match mesh_in {
            Some(path) => Ok((read_mesh(path)?.into_hierarchy(None)?, as_given)),
            None => Ok((unit_square(diagonal_from_origin)?, uniform)),
        }
    };
    Ok(match kind {
        ProblemKind::BoundaryLayer => {
            let (hierarchy, schedule) = square(true)?;
            Setup {
                kind,
                spec: boundary_layer(epsilon.unwrap_or(1e-2)),
                hierarchy,
                schedule,
                default_eps_thresh: 1e-10,
                default_budget: 250_000,
            }
        }
        ProblemKind::Hmm86 => {
            let (hierarchy, schedule) = square(false)?;
            Setup {
                kind,
                spec: hmm86(epsilon.unwrap_or(1e-6)),
                hierarchy,
                schedule,
                default_eps_thresh: 1e-10,
                default_budget: 250_000,
            }
        }
        ProblemKind::Hemker => {
            let data = match mesh_in {
                Some(path) => read_mesh(path)?,
                None => parse_mesh(HEMKER_MESH)?,
            };
            Setup {
                kind,
                spec: hemker(),
                hierarchy: data.into_hierarchy(Some(BoundaryCurve::unit_circle()))?,
                schedule: as_given,
                default_eps_thresh: 1e-8,
                default_budget: 500_000,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    #[test]
    fn boundary_layer_values() {
        let s = boundary_layer(1e-2);
        let v = s.evaluate_exact(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(v[0].0.abs() < 1e-15);
        // e^{-500} underflows to a subnormal-free zero neighbourhood.
        assert!((v[1].0 - (-500f64).exp()).abs() < 1e-300);
        assert!(matches!(
            s.evaluate_exact(&[[1.5, 0.5]]),
            Err(Error::OutsideDomain(..))
        ));
        assert!(matches!(
            hmm86(1e-6).evaluate_exact(&[[0.5, 0.5]]),
            Err(Error::NoExactSolution)
        ));
    }

    fn fd_gradient(eps: f64, p: Point, h: f64) -> [f64; 2] {
        let u = |q: Point| boundary_layer_exact(eps, q).0;
        [
            (u([p[0] + h, p[1]]) - u([p[0] - h, p[1]])) / (2.0 * h),
            (u([p[0], p[1] + h]) - u([p[0], p[1] - h])) / (2.0 * h),
        ]
    }

    fn fd_laplacian(eps: f64, p: Point, h: f64) -> f64 {
        let u = |q: Point| boundary_layer_exact(eps, q).0;
        (u([p[0] + h, p[1]]) + u([p[0] - h, p[1]]) + u([p[0], p[1] + h]) + u([p[0], p[1] - h])
            - 4.0 * u(p))
            / (h * h)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn boundary_layer_gradient_matches_finite_differences() {
        let p = [0.5, 0.5];
        let (_, g, _) = boundary_layer_exact(1e-2, p);
        let fd = fd_gradient(1e-2, p, 1e-6);
        assert!(rel(g[0], fd[0]) < 1e-6 && rel(g[1], fd[1]) < 1e-6);
    }

    #[test]
    fn boundary_layer_source_matches_finite_differences() {
        let eps = 1e-2;
        let s = boundary_layer(eps);
        let check = |p: Point, tol: f64| {
            let (u, _, _) = boundary_layer_exact(eps, p);
            let g = fd_gradient(eps, p, 1e-6);
            let fd = -eps * fd_laplacian(eps, p, 1e-4) + 2.0 * g[0] + 3.0 * g[1] + u;
            let f = (s.source)(p);
            assert!(rel(f, fd) < tol, "at {p:?}: {f} vs {fd}");
        };
        check([0.3, 0.7], 1e-6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            check([rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)], 1e-5);
        }
    }

    #[test]
    fn hmm86_boundary_values() {
        let s = hmm86(1e-6);
        let ub = |p| (s.dirichlet)(p);
        assert_eq!(ub([0.5, 1.0]), 1.0);
        assert_eq!(ub([0.5, 0.0]), 0.0);
        assert_eq!(ub([0.0, 0.8]), 1.0);
        assert_eq!(ub([0.0, 0.7]), 0.0);
        assert_eq!(ub([0.0, 1.0]), 1.0);
        assert_eq!(ub([1.0, 0.5]), 0.0);
    }

    #[test]
    fn hemker_mesh_is_valid_and_shipped() {
        let data = hemker_initial_mesh();
        let h = data.clone().into_hierarchy(Some(BoundaryCurve::unit_circle())).unwrap();
        let t = h.triangulation().unwrap();
        t.validate().unwrap();
        assert!(t.is_conforming());
        let area = 12.0 * 6.0 - PI;
        // The polygonal hole is inscribed in the circle.
        assert!(t.total_area() > area && t.total_area() < area + 0.05);
        assert!((140..=170).contains(&t.num_vertices()), "{}", t.num_vertices());
        assert_eq!(parse_mesh(HEMKER_MESH).unwrap(), data);
    }

    #[test]
    fn builtin_problems_construct() {
        for kind in [ProblemKind::BoundaryLayer, ProblemKind::Hmm86, ProblemKind::Hemker] {
            let s = builtin_problem(kind, None, None).unwrap();
            assert_eq!(kind.name().parse::<ProblemKind>().unwrap(), kind);
            assert!(s.spec.epsilon > 0.0);
        }
        assert!(matches!(
            builtin_problem(ProblemKind::Hemker, None, Some(Path::new("/no/such.mesh"))),
            Err(Error::MeshFileMissing(_))
        ));
        assert!(matches!("foo".parse::<ProblemKind>(), Err(Error::UnknownProblem(_))));
    }

    /// Rewrites `data/hemker.mesh` from the generator.
    #[test]
    #[ignore]
    fn regenerate_hemker_mesh() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/hemker.mesh");
        crate::mesh::io::write_mesh(&path, &hemker_initial_mesh()).unwrap();
    }
}
