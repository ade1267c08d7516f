//! Two-dimensional triangulations with hanging vertices.
//!
//! [`GridHierarchy`] owns the refinement history (parent/child links, edge
//! midpoints, boundary tags) and is the only mutable structure. Every solve
//! works on a frozen [`Triangulation`] snapshot of the active leaf cells.

mod boundary;
mod hanging;
mod hierarchy;
pub mod io;
mod locate;
mod quality;

use std::collections::HashMap;

pub use boundary::{project_boundary, BoundaryCurve};
pub use hanging::{hanging_constraints, ConstraintSet};
pub use hierarchy::{GridHierarchy, GridMode};
pub use locate::PointLocator;
pub use quality::{delaunay_report, DelaunayReport};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Absolute tolerance for coincidence tests.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Regular,
    Hanging,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellOrigin {
    Initial,
    Regular,
    Closure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub coords: Point,
    pub kind: VertexKind,
    pub boundary_tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshCell {
    pub id: usize,
    /// Counter-clockwise.
    pub vertex_ids: [usize; 3],
    /// Parent cell in the owning hierarchy, if any.
    pub parent: Option<usize>,
    /// Index of this cell in the owning hierarchy (equals `id` for
    /// stand-alone triangulations).
    pub source: usize,
    pub origin: CellOrigin,
}

/// An edge of the active mesh. On an edge carrying a hanging vertex the two
/// halves are separate facets, each with the fine cell and the coarse cell
/// as neighbors; `carrier` then holds the coarse edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub cells: Vec<usize>,
    pub boundary_tag: BoundaryTag,
    pub carrier: Option<[usize; 2]>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.boundary_tag != BoundaryTag::Interior
    }
}

/// Frozen active mesh.
#[derive(Clone, Debug)]
pub struct Triangulation {
    pub vertices: Vec<Vertex>,
    pub cells: Vec<MeshCell>,
    pub facets: Vec<Facet>,
    /// Sorted ids of hanging vertices.
    pub hanging: Vec<usize>,
    /// Hanging vertex -> the coarse edge it subdivides.
    pub carriers: HashMap<usize, [usize; 2]>,
    pub level: usize,
}

pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parameter `t` of `p = a + t (b - a)` when `p` lies strictly inside the
/// segment `ab`, `None` otherwise.
pub(crate) fn inside_segment(a: Point, b: Point, p: Point) -> Option<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let w = [p[0] - a[0], p[1] - a[1]];
    let cross = d[0] * w[1] - d[1] * w[0];
    if cross.abs() > GEOM_TOL * len2.max(1.0) {
        return None;
    }
    let t = (d[0] * w[0] + d[1] * w[1]) / len2;
    let eps = GEOM_TOL / len2.sqrt().max(GEOM_TOL);
    (t > eps && t < 1.0 - eps).then_some(t)
}

/// Input cell for [`Triangulation::build`].
#[derive(Clone, Copy, Debug)]
pub struct CellSpec {
    pub vertex_ids: [usize; 3],
    pub parent: Option<usize>,
    pub source: usize,
    pub origin: CellOrigin,
}

impl Triangulation {
    /// Builds a triangulation from raw cells. Cells are reoriented
    /// counter-clockwise. Hanging vertices are detected from the edge graph:
    /// `m` hangs on edge `ab` of cell `K` when `am` and `mb` are edges of
    /// other cells and `m` lies strictly inside `ab`. Boundary facets take
    /// their tag from `boundary_tag(a, b)`; sub-facets of a boundary edge
    /// inherit from the full edge.
    pub fn build(
        coords: Vec<Point>,
        cells: Vec<CellSpec>,
        level: usize,
        boundary_tag: impl Fn(usize, usize) -> Option<BoundaryTag>,
    ) -> Result<Self> {
        let mut mesh_cells = Vec::with_capacity(cells.len());
        for (id, spec) in cells.into_iter().enumerate() {
            let [a, b, c] = spec.vertex_ids;
            for v in [a, b, c] {
                if v >= coords.len() {
                    return Err(Error::UnknownVertex(v));
                }
            }
            let area = signed_area(coords[a], coords[b], coords[c]);
            let vertex_ids = if area < 0.0 { [a, c, b] } else { [a, b, c] };
            if area.abs() <= 1e-14 {
                return Err(Error::DegenerateCell {
                    cell: id,
                    area: area.abs(),
                });
            }
            mesh_cells.push(MeshCell {
                id,
                vertex_ids,
                parent: spec.parent,
                source: spec.source,
                origin: spec.origin,
            });
        }

        // Edge graph over cell edges.
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); coords.len()];
        let mut edge_cells: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for cell in &mesh_cells {
            for (a, b) in cell_edges(cell.vertex_ids) {
                let key = edge_key(a, b);
                let entry = edge_cells.entry(key).or_default();
                if entry.is_empty() {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
                entry.push(cell.id);
            }
        }

        // Hanging detection: only edges seen by a single cell can carry one.
        let mut carriers: HashMap<usize, [usize; 2]> = HashMap::new();
        let mut split: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), owners) in &edge_cells {
            if owners.len() != 1 {
                continue;
            }
            let mid = adjacency[a].iter().copied().find(|&m| {
                m != b
                    && edge_cells.contains_key(&edge_key(m, b))
                    && inside_segment(coords[a], coords[b], coords[m]).is_some()
            });
            if let Some(m) = mid {
                carriers.insert(m, [a, b]);
                split.insert((a, b), m);
            }
        }

        // Facets: split carrier edges into their two halves.
        let mut facet_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut add = |a: usize, b: usize, cell: usize, carrier: Option<[usize; 2]>| {
            let key = edge_key(a, b);
            let idx = *facet_index.entry(key).or_insert_with(|| {
                facets.push(Facet {
                    vertices: [key.0, key.1],
                    cells: Vec::new(),
                    boundary_tag: BoundaryTag::Interior,
                    carrier: None,
                });
                facets.len() - 1
            });
            let f = &mut facets[idx];
            f.cells.push(cell);
            if carrier.is_some() {
                f.carrier = carrier;
            }
        };
        for cell in &mesh_cells {
            for (a, b) in cell_edges(cell.vertex_ids) {
                match split.get(&edge_key(a, b)) {
                    Some(&m) => {
                        let carrier = Some([a.min(b), a.max(b)]);
                        add(a, m, cell.id, carrier);
                        add(m, b, cell.id, carrier);
                    }
                    None => add(a, b, cell.id, None),
                }
            }
        }

        let mut vertex_tag = vec![BoundaryTag::Interior; coords.len()];
        for f in &mut facets {
            f.cells.sort_unstable();
            f.cells.dedup();
            if f.cells.len() == 1 {
                let [a, b] = f.vertices;
                let tag = boundary_tag(a, b)
                    .or_else(|| {
                        f.carrier
                            .and_then(|[p, q]| boundary_tag(p, q))
                    })
                    .unwrap_or(BoundaryTag::Dirichlet);
                f.boundary_tag = if tag == BoundaryTag::Interior {
                    BoundaryTag::Dirichlet
                } else {
                    tag
                };
                for v in f.vertices {
                    // Dirichlet wins at D/N junctions.
                    if vertex_tag[v] != BoundaryTag::Dirichlet {
                        vertex_tag[v] = f.boundary_tag;
                    }
                }
            }
        }

        let mut hanging: Vec<usize> = carriers.keys().copied().collect();
        hanging.sort_unstable();
        let vertices = coords
            .into_iter()
            .enumerate()
            .map(|(id, coords)| Vertex {
                id,
                coords,
                kind: if carriers.contains_key(&id) {
                    VertexKind::Hanging
                } else {
                    VertexKind::Regular
                },
                boundary_tag: vertex_tag[id],
            })
            .collect();

        Ok(Self {
            vertices,
            cells: mesh_cells,
            facets,
            hanging,
            carriers,
            level,
        })
    }

    /// Convenience constructor for stand-alone meshes.
    pub fn from_cells(
        coords: Vec<Point>,
        cells: &[[usize; 3]],
        boundary_tag: impl Fn(usize, usize) -> Option<BoundaryTag>,
    ) -> Result<Self> {
        let specs = cells
            .iter()
            .enumerate()
            .map(|(i, &vertex_ids)| CellSpec {
                vertex_ids,
                parent: None,
                source: i,
                origin: CellOrigin::Initial,
            })
            .collect();
        Self::build(coords, specs, 0, boundary_tag)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn coords(&self, v: usize) -> Point {
        self.vertices[v].coords
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        self.cells[c].vertex_ids.map(|v| self.vertices[v].coords)
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, c] = self.cell_points(c);
        signed_area(a, b, c)
    }

    /// Cell diameter (longest edge).
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let [a, b, c] = self.cell_points(c);
        distance(a, b).max(distance(b, c)).max(distance(c, a))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn is_conforming(&self) -> bool {
        self.hanging.is_empty()
    }

    pub fn is_hanging(&self, v: usize) -> bool {
        self.vertices[v].kind == VertexKind::Hanging
    }

    pub fn dirichlet_vertices(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|v| v.boundary_tag == BoundaryTag::Dirichlet)
            .map(|v| v.id)
            .collect()
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f].vertices;
        distance(self.coords(a), self.coords(b))
    }

    /// Gradients of the three barycentric coordinates on cell `c`.
    pub fn barycentric_gradients(&self, c: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.cell_points(c);
        let two_area = 2.0 * signed_area(p0, p1, p2);
        [
            [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
            [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
            [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
        ]
    }

    /// Gradient of the P1 function with vertex values `u` on cell `c`.
    pub fn cell_gradient(&self, c: usize, u: &[f64]) -> [f64; 2] {
        let g = self.barycentric_gradients(c);
        let ids = self.cells[c].vertex_ids;
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += u[ids[k]] * g[k][0];
            out[1] += u[ids[k]] * g[k][1];
        }
        out
    }

    /// Value at `p` of the cell-local P1 function on `c` (no containment check).
    pub fn eval_in_cell(&self, c: usize, u: &[f64], p: Point) -> f64 {
        let lambda = self.barycentric(c, p);
        let ids = self.cells[c].vertex_ids;
        (0..3).map(|k| lambda[k] * u[ids[k]]).sum()
    }

    pub fn barycentric(&self, c: usize, p: Point) -> [f64; 3] {
        let [a, b, cc] = self.cell_points(c);
        let area = signed_area(a, b, cc);
        [
            signed_area(p, b, cc) / area,
            signed_area(a, p, cc) / area,
            signed_area(a, b, p) / area,
        ]
    }

    /// Checks the structural invariants: positive areas, facets with one or
    /// two cells, boundary facets tagged, at most one hanging vertex per edge.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for c in 0..self.num_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(format!("cell {c} has non-positive area"));
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            match f.cells.len() {
                1 if !f.is_boundary() => return Err(format!("facet {i} has one cell but no boundary tag")),
                2 if f.is_boundary() => return Err(format!("facet {i} is interior but tagged boundary")),
                1 | 2 => {}
                n => return Err(format!("facet {i} has {n} cells")),
            }
        }
        // One hanging vertex per edge: the halves of a carrier edge must be
        // conforming facets of the fine side.
        let carrier_edges: std::collections::HashSet<(usize, usize)> =
            self.carriers.values().map(|&[p, r]| edge_key(p, r)).collect();
        for (&q, &[a, b]) in &self.carriers {
            for half in [[a, q], [q, b]] {
                if carrier_edges.contains(&edge_key(half[0], half[1])) {
                    return Err(format!("edge {a}-{b} carries more than one hanging vertex"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn cell_edges(v: [usize; 3]) -> [(usize, usize); 3] {
    [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]
}

/// Unit square with one coarse cell below the diagonal and two fine cells
/// above it, so that vertex 0 = (0.5, 0.5) hangs on the diagonal (1, 3).
pub fn single_hanging_patch() -> Triangulation {
    let coords = vec![[0.5, 0.5], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    Triangulation::from_cells(coords, &[[1, 2, 3], [0, 3, 4], [1, 0, 4]], |_, _| {
        Some(BoundaryTag::Dirichlet)
    })
    .expect("patch is valid")
}
