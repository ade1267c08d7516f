//! Galerkin P1 assembly, Dirichlet rows and error norms.

use crate::constraints::{
    expand_solution, reduce_nonhanging, to_conforming_ansatz, to_conforming_test, ReducedSystem,
};
use crate::error::{Error, Result};
use crate::mesh::{hanging_constraints, BoundaryTag, ConstraintSet, Point, Triangulation};
use crate::problem::ProblemSpec;
use crate::quadrature::{DEGREE4, DEGREE5, GAUSS3};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, SparseSystem};

/// Element matrix and load vector of cell `c`.
pub fn local_system(mesh: &Triangulation, c: usize, spec: &ProblemSpec) -> Result<([[f64; 3]; 3], [f64; 3])> {
    let area = mesh.cell_area(c);
    if area < 1e-14 {
        return Err(Error::DegenerateCell { cell: c, area });
    }
    let pts = mesh.cell_points(c);
    let g = mesh.barycentric_gradients(c);
    let mut m = [[0.0; 3]; 3];
    let mut f = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = spec.epsilon * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    for &(lambda, w) in DEGREE4.points {
        let x = crate::quadrature::to_cartesian(&pts, lambda);
        let b = (spec.convection)(x);
        let r = (spec.reaction)(x);
        let s = (spec.source)(x);
        for i in 0..3 {
            for j in 0..3 {
                let conv = b[0] * g[j][0] + b[1] * g[j][1];
                m[i][j] += area * w * (conv + r * lambda[j]) * lambda[i];
            }
            f[i] += area * w * s * lambda[i];
        }
    }
    Ok((m, f))
}

/// Stiffness matrix and load vector over all vertices (hanging ones
/// included) in Neumann form, assembled cellwise over the non-conforming
/// nodal basis.
pub fn assemble_galerkin(mesh: &Triangulation, spec: &ProblemSpec) -> Result<SparseSystem<f64>> {
    let n = mesh.num_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.num_cells());
    let mut rhs = vec![0.0; n];
    for c in 0..mesh.num_cells() {
        let (m, f) = local_system(mesh, c, spec)?;
        let ids = mesh.cells[c].vertex_ids;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((ids[i], ids[j], m[i][j]));
            }
            rhs[ids[i]] += f[i];
        }
    }
    for (k, facet) in mesh.facets.iter().enumerate() {
        if facet.boundary_tag != BoundaryTag::Neumann {
            continue;
        }
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.coords(a), mesh.coords(b));
        let len = mesh.facet_length(k);
        for &(t, w) in &GAUSS3 {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let g = (spec.neumann)(x);
            rhs[a] += len * w * g * (1.0 - t);
            rhs[b] += len * w * g * t;
        }
    }
    SparseSystem::new(CsrMatrix::from_triplets(n, n, &triplets), rhs)
}

/// Dirichlet vertices with their boundary values.
pub fn dirichlet_values(mesh: &Triangulation, spec: &ProblemSpec) -> Vec<(usize, f64)> {
    mesh.dirichlet_vertices()
        .into_iter()
        .map(|v| (v, (spec.dirichlet)(mesh.coords(v))))
        .collect()
}

/// Replaces each listed row by the identity row (keeping the pattern with
/// explicit zeros) and sets its right-hand side to the boundary value.
pub fn apply_dirichlet<T: Scalar>(system: &SparseSystem<T>, rows: &[(usize, T)]) -> SparseSystem<T> {
    let mut out = system.clone();
    for &(i, value) in rows {
        for k in out.matrix.row_range(i) {
            let j = out.matrix.col_idx()[k];
            out.matrix.values_mut()[k] = if j == i { T::one() } else { T::zero() };
        }
        out.rhs[i] = value;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// `||u - u_h||_0` and `|u - u_h|_1` with a degree-5 rule per cell.
pub fn error_norms(mesh: &Triangulation, u: &[f64], spec: &ProblemSpec) -> Result<ErrorNorms> {
    let exact = spec.exact.as_ref().ok_or(Error::NoExactSolution)?;
    if u.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: u.len(),
        });
    }
    let (mut l2, mut h1) = (0.0, 0.0);
    for c in 0..mesh.num_cells() {
        let pts = mesh.cell_points(c);
        let area = mesh.cell_area(c);
        let ids = mesh.cells[c].vertex_ids;
        let grad = mesh.cell_gradient(c, u);
        l2 += DEGREE5.integrate(&pts, area, |lambda, x| {
            let uh: f64 = (0..3).map(|k| lambda[k] * u[ids[k]]).sum();
            let (v, _) = exact(x);
            (v - uh) * (v - uh)
        });
        h1 += DEGREE5.integrate(&pts, area, |_, x| {
            let (_, g) = exact(x);
            (g[0] - grad[0]).powi(2) + (g[1] - grad[1]).powi(2)
        });
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

/// Discrete problem on the non-hanging vertices, ready for stabilization.
#[derive(Clone, Debug)]
pub struct Discretization {
    /// Number of vertices including hanging ones.
    pub n_full: usize,
    pub constraints: ConstraintSet<f64>,
    /// Neumann-form system in conforming test and ansatz functions.
    pub reduced: ReducedSystem<f64>,
    /// Dirichlet rows of the reduced system with their values.
    pub dirichlet: Vec<(usize, f64)>,
    pub coords: Vec<Point>,
    pub on_boundary: Vec<bool>,
}

impl Discretization {
    pub fn dim(&self) -> usize {
        self.reduced.to_full.len()
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.dim()];
        for &(i, _) in &self.dirichlet {
            mask[i] = true;
        }
        mask
    }

    /// Zero vector with the boundary values injected.
    pub fn initial_guess(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.dim()];
        for &(i, v) in &self.dirichlet {
            u[i] = v;
        }
        u
    }

    /// Values at all vertices.
    pub fn expand(&self, u: &[f64]) -> Result<Vec<f64>> {
        expand_solution(u, &self.reduced.to_full, self.n_full, &self.constraints)
    }
}

/// Assembles, eliminates hanging vertices and records boundary data.
pub fn discretize(mesh: &Triangulation, spec: &ProblemSpec) -> Result<Discretization> {
    let system = assemble_galerkin(mesh, spec)?;
    let constraints: ConstraintSet<f64> = hanging_constraints(mesh)?;
    let ansatz = to_conforming_ansatz(&to_conforming_test(&system, &constraints)?, &constraints)?;
    let reduced = reduce_nonhanging(&ansatz, &constraints)?;
    let to_reduced = &reduced.to_reduced;
    let dirichlet = dirichlet_values(mesh, spec)
        .into_iter()
        .filter_map(|(v, value)| to_reduced[v].map(|i| (i, value)))
        .collect();
    let coords = reduced.to_full.iter().map(|&v| mesh.coords(v)).collect();
    let on_boundary = reduced
        .to_full
        .iter()
        .map(|&v| mesh.vertices[v].boundary_tag != BoundaryTag::Interior)
        .collect();
    Ok(Discretization {
        n_full: mesh.num_vertices(),
        constraints,
        reduced,
        dirichlet,
        coords,
        on_boundary,
    })
}
