use std::collections::{HashMap, HashSet};

use super::{
    cell_edges, edge_key, signed_area, BoundaryCurve, BoundaryTag, CellOrigin, CellSpec, Point,
    Triangulation,
};
use crate::error::{Error, Result};

/// How refinement keeps the grid admissible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridMode {
    /// Red refinement followed by green closure; no hanging vertices.
    Conforming,
    /// Red refinement only; at most one hanging vertex per edge.
    Hanging,
}

impl GridMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Conforming => "conforming",
            Self::Hanging => "hanging",
        }
    }
}

impl std::fmt::Display for GridMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GridMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "conforming" => Ok(Self::Conforming),
            "hanging" => Ok(Self::Hanging),
            other => Err(format!("unknown grid mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
struct HCell {
    vertices: [usize; 3],
    parent: Option<usize>,
    children: Vec<usize>,
    origin: CellOrigin,
    removed: bool,
}

impl HCell {
    fn is_leaf(&self) -> bool {
        !self.removed && self.children.is_empty()
    }
}

/// Refinement history of a triangulation.
///
/// Vertices are never deleted (there is no coarsening, and closure cells add
/// no vertices), so vertex ids are stable across levels and follow creation
/// order.
#[derive(Clone, Debug)]
pub struct GridHierarchy {
    coords: Vec<Point>,
    cells: Vec<HCell>,
    midpoints: HashMap<(usize, usize), usize>,
    boundary: HashMap<(usize, usize), BoundaryTag>,
    curve: Option<BoundaryCurve>,
    level: usize,
}

impl GridHierarchy {
    /// `boundary` maps every boundary edge of the initial mesh to its tag.
    pub fn new(
        coords: Vec<Point>,
        cells: &[[usize; 3]],
        boundary: HashMap<(usize, usize), BoundaryTag>,
        curve: Option<BoundaryCurve>,
    ) -> Result<Self> {
        let mut hcells = Vec::with_capacity(cells.len());
        for (id, &[a, b, c]) in cells.iter().enumerate() {
            for v in [a, b, c] {
                if v >= coords.len() {
                    return Err(Error::UnknownVertex(v));
                }
            }
            let area = signed_area(coords[a], coords[b], coords[c]);
            if area.abs() < 1e-14 {
                return Err(Error::DegenerateCell {
                    cell: id,
                    area: area.abs(),
                });
            }
            hcells.push(HCell {
                vertices: if area > 0.0 { [a, b, c] } else { [a, c, b] },
                parent: None,
                children: Vec::new(),
                origin: CellOrigin::Initial,
                removed: false,
            });
        }
        let boundary = boundary
            .into_iter()
            .map(|((a, b), t)| (edge_key(a, b), t))
            .collect();
        Ok(Self {
            coords,
            cells: hcells,
            midpoints: HashMap::new(),
            boundary,
            curve,
            level: 0,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn curve(&self) -> Option<&BoundaryCurve> {
        self.curve.as_ref()
    }

    /// Active cells in creation order.
    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&c| self.cells[c].is_leaf())
            .collect()
    }

    pub fn origin(&self, cell: usize) -> CellOrigin {
        self.cells[cell].origin
    }

    pub fn parent(&self, cell: usize) -> Option<usize> {
        self.cells[cell].parent
    }

    pub fn children(&self, cell: usize) -> &[usize] {
        &self.cells[cell].children
    }

    pub fn has_closure_cells(&self) -> bool {
        self.cells
            .iter()
            .any(|c| c.is_leaf() && c.origin == CellOrigin::Closure)
    }

    /// Frozen snapshot of the active cells.
    pub fn triangulation(&self) -> Result<Triangulation> {
        let specs = self
            .active_cells()
            .into_iter()
            .map(|c| CellSpec {
                vertex_ids: self.cells[c].vertices,
                parent: self.cells[c].parent,
                source: c,
                origin: self.cells[c].origin,
            })
            .collect();
        Triangulation::build(self.coords.clone(), specs, self.level, |a, b| {
            self.boundary.get(&edge_key(a, b)).copied()
        })
    }

    /// Refines every active cell regularly.
    pub fn refine_uniform(&mut self, mode: GridMode) -> Result<()> {
        let all = self.active_cells();
        self.refine(&all, mode)
    }

    /// One adaptive step in the given grid mode.
    pub fn refine(&mut self, marked: &[usize], mode: GridMode) -> Result<()> {
        self.refine_regular(marked)?;
        if mode == GridMode::Conforming {
            self.conforming_closure();
        }
        Ok(())
    }

    /// Regular (red) refinement of `marked` (hierarchy cell ids).
    ///
    /// Closure cells present in the grid are removed first; a marked closure
    /// cell marks its parent instead. Afterwards every cell with an edge
    /// carrying more than one hanging vertex is refined until none is left.
    pub fn refine_regular(&mut self, marked: &[usize]) -> Result<()> {
        for &c in marked {
            if c >= self.cells.len() || !self.cells[c].is_leaf() {
                return Err(Error::InvalidMark(c));
            }
        }
        let mut targets: Vec<usize> = marked
            .iter()
            .map(|&c| match self.cells[c].origin {
                CellOrigin::Closure => self.cells[c].parent.expect("closure cell has a parent"),
                _ => c,
            })
            .collect();
        targets.sort_unstable();
        targets.dedup();

        self.remove_closure();
        for c in targets {
            if self.cells[c].is_leaf() {
                self.red(c);
            }
        }
        self.enforce(false);
        self.level += 1;
        Ok(())
    }

    /// Eliminates all hanging vertices: cells with two or more hanging edges
    /// are refined regularly, then each cell with a single hanging vertex is
    /// bisected from that vertex to the opposite corner.
    pub fn conforming_closure(&mut self) {
        self.enforce(true);
        for c in self.active_cells() {
            let v = self.cells[c].vertices;
            let hanging: Vec<(usize, usize, usize, usize)> = (0..3)
                .filter_map(|k| {
                    let (a, b) = (v[k], v[(k + 1) % 3]);
                    self.midpoints
                        .get(&edge_key(a, b))
                        .map(|&m| (a, b, v[(k + 2) % 3], m))
                })
                .collect();
            match hanging.as_slice() {
                [] => {}
                &[(a, b, opposite, m)] => {
                    let first = self.push_child(c, [a, m, opposite], CellOrigin::Closure);
                    let second = self.push_child(c, [m, b, opposite], CellOrigin::Closure);
                    self.cells[c].children = vec![first, second];
                }
                _ => unreachable!("enforce(true) leaves at most one hanging edge per cell"),
            }
        }
    }

    fn remove_closure(&mut self) {
        for c in 0..self.cells.len() {
            if self.cells[c].is_leaf() && self.cells[c].origin == CellOrigin::Closure {
                self.cells[c].removed = true;
                let p = self.cells[c].parent.expect("closure cell has a parent");
                self.cells[p].children.clear();
            }
        }
    }

    fn push_child(&mut self, parent: usize, vertices: [usize; 3], origin: CellOrigin) -> usize {
        debug_assert!(
            signed_area(
                self.coords[vertices[0]],
                self.coords[vertices[1]],
                self.coords[vertices[2]]
            ) > 0.0
        );
        self.cells.push(HCell {
            vertices,
            parent: Some(parent),
            children: Vec::new(),
            origin,
            removed: false,
        });
        self.cells.len() - 1
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let (pa, pb) = (self.coords[a], self.coords[b]);
        let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let tag = self.boundary.get(&key).copied();
        if tag.is_some() {
            if let Some(curve) = &self.curve {
                if curve.contains(pa) && curve.contains(pb) {
                    // The center is never the midpoint of a chord of a
                    // non-degenerate mesh edge.
                    p = curve.project(p).unwrap_or(p);
                }
            }
        }
        self.coords.push(p);
        let m = self.coords.len() - 1;
        self.midpoints.insert(key, m);
        if let Some(tag) = tag {
            self.boundary.insert(edge_key(a, m), tag);
            self.boundary.insert(edge_key(m, b), tag);
        }
        m
    }

    fn red(&mut self, c: usize) {
        let [v0, v1, v2] = self.cells[c].vertices;
        let m01 = self.midpoint(v0, v1);
        let m12 = self.midpoint(v1, v2);
        let m20 = self.midpoint(v2, v0);
        let children = [
            [v0, m01, m20],
            [m01, v1, m12],
            [m20, m12, v2],
            [m01, m12, m20],
        ]
        .map(|v| self.push_child(c, v, CellOrigin::Regular));
        self.cells[c].children = children.to_vec();
    }

    /// Hanging midpoints on the edges of an active cell.
    fn hanging_edges(&self, c: usize) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        cell_edges(self.cells[c].vertices)
            .into_iter()
            .filter_map(|(a, b)| self.midpoints.get(&edge_key(a, b)).map(|&m| (a, b, m)))
    }

    fn needs_red(&self, c: usize, conforming: bool) -> bool {
        let mut count = 0;
        for (a, b, m) in self.hanging_edges(c) {
            count += 1;
            if self.midpoints.contains_key(&edge_key(a, m))
                || self.midpoints.contains_key(&edge_key(m, b))
            {
                return true;
            }
        }
        conforming && count >= 2
    }

    fn enforce(&mut self, conforming: bool) {
        let mut queue: Vec<usize> = self.active_cells();
        let mut neighbors: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for &c in &queue {
            for (a, b) in cell_edges(self.cells[c].vertices) {
                neighbors.entry(edge_key(a, b)).or_default().push(c);
            }
        }
        while !queue.is_empty() {
            let mut next: HashSet<usize> = HashSet::new();
            for c in queue {
                if !self.cells[c].is_leaf() || !self.needs_red(c, conforming) {
                    continue;
                }
                self.red(c);
                for &child in &self.cells[c].children.clone() {
                    for (a, b) in cell_edges(self.cells[child].vertices) {
                        neighbors.entry(edge_key(a, b)).or_default().push(child);
                    }
                }
                // Cells touching the refined cell's edges or their halves may
                // have gained a hanging vertex.
                for (a, b) in cell_edges(self.cells[c].vertices) {
                    let m = self.midpoints[&edge_key(a, b)];
                    for key in [edge_key(a, b), edge_key(a, m), edge_key(m, b)] {
                        if let Some(cs) = neighbors.get(&key) {
                            next.extend(cs.iter().copied().filter(|&n| self.cells[n].is_leaf()));
                        }
                    }
                }
            }
            let mut next: Vec<usize> = next.into_iter().collect();
            next.sort_unstable();
            queue = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(diagonal_from_origin: bool) -> GridHierarchy {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let cells = if diagonal_from_origin {
            vec![[0, 1, 2], [0, 2, 3]]
        } else {
            vec![[0, 1, 3], [1, 2, 3]]
        };
        let boundary = [(0, 1), (1, 2), (2, 3), (3, 0)]
            .into_iter()
            .map(|e| (e, BoundaryTag::Dirichlet))
            .collect();
        GridHierarchy::new(coords, &cells, boundary, None).unwrap()
    }

    #[test]
    fn red_refinement_of_single_triangle() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let boundary = [(0, 1), (1, 2), (2, 0)]
            .into_iter()
            .map(|e| (e, BoundaryTag::Dirichlet))
            .collect();
        let mut h = GridHierarchy::new(coords, &[[0, 1, 2]], boundary, None).unwrap();
        h.refine_regular(&[0]).unwrap();
        let t = h.triangulation().unwrap();
        assert_eq!(t.num_cells(), 4);
        assert_eq!(t.num_vertices(), 6);
        let mids: Vec<Point> = t.vertices[3..].iter().map(|v| v.coords).collect();
        assert!(mids.contains(&[0.5, 0.0]) && mids.contains(&[0.5, 0.5]) && mids.contains(&[0.0, 0.5]));
        for c in 0..4 {
            assert!((t.cell_area(c) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn refining_both_cells_is_conforming() {
        let mut h = unit_square(true);
        h.refine_regular(&[0, 1]).unwrap();
        let t = h.triangulation().unwrap();
        assert_eq!(t.num_cells(), 8);
        assert!(t.hanging.is_empty());
    }

    #[test]
    fn refining_lower_right_cell_leaves_one_hanging_vertex() {
        let mut h = unit_square(true);
        h.refine_regular(&[0]).unwrap();
        let t = h.triangulation().unwrap();
        assert_eq!(t.hanging.len(), 1);
        let q = t.hanging[0];
        assert_eq!(t.coords(q), [0.5, 0.5]);
        assert!(t.validate().is_ok());
        assert!((t.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closure_bisects_neighbor() {
        let mut h = unit_square(true);
        h.refine(&[0], GridMode::Conforming).unwrap();
        let t = h.triangulation().unwrap();
        assert!(t.hanging.is_empty());
        assert_eq!(t.num_cells(), 6);
        assert_eq!(
            t.cells.iter().filter(|c| c.origin == CellOrigin::Closure).count(),
            2
        );
        assert!(t.validate().is_ok());
    }

    #[test]
    fn closure_on_conforming_mesh_is_identity() {
        let mut h = unit_square(true);
        h.refine_uniform(GridMode::Conforming).unwrap();
        let before = h.active_cells();
        h.conforming_closure();
        assert_eq!(before, h.active_cells());
    }

    #[test]
    fn marked_closure_cell_refines_its_parent() {
        let mut h = unit_square(true);
        h.refine(&[0], GridMode::Conforming).unwrap();
        let closure = *h
            .active_cells()
            .iter()
            .find(|&&c| h.origin(c) == CellOrigin::Closure)
            .unwrap();
        let parent = h.parent(closure).unwrap();
        h.refine(&[closure], GridMode::Conforming).unwrap();
        assert_eq!(h.children(parent).len(), 4);
        assert!(h
            .children(parent)
            .iter()
            .all(|&c| h.origin(c) == CellOrigin::Regular));
        let t = h.triangulation().unwrap();
        assert!(t.hanging.is_empty());
        assert!((t.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_leaf_mark_is_rejected() {
        let mut h = unit_square(true);
        h.refine_regular(&[0]).unwrap();
        assert!(matches!(h.refine_regular(&[0]), Err(Error::InvalidMark(0))));
        assert!(matches!(h.refine_regular(&[999]), Err(Error::InvalidMark(999))));
    }

    #[test]
    fn cascade_keeps_one_hanging_vertex_per_edge() {
        let mut h = unit_square(true);
        // Repeatedly refine the cell touching the origin.
        for _ in 0..5 {
            let t = h.triangulation().unwrap();
            let c = t
                .cells
                .iter()
                .find(|c| c.vertex_ids.contains(&0))
                .unwrap()
                .source;
            h.refine(&[c], GridMode::Hanging).unwrap();
            let t = h.triangulation().unwrap();
            t.validate().unwrap();
            assert!((t.total_area() - 1.0).abs() < 1e-14);
        }
    }
}
