use std::f64::consts::PI;

use super::{Point, Triangulation, GEOM_TOL};

/// Interior edges violating the (non-strict) Delaunay angle condition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DelaunayReport {
    pub edges: Vec<[usize; 2]>,
    /// Cells adjacent to a flagged edge, sorted and unique.
    pub cells: Vec<usize>,
}

impl DelaunayReport {
    pub fn count(&self) -> usize {
        self.edges.len()
    }
}

fn angle_at(apex: Point, a: Point, b: Point) -> f64 {
    let u = [a[0] - apex[0], a[1] - apex[1]];
    let v = [b[0] - apex[0], b[1] - apex[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

/// Flags every interior edge whose two opposite angles sum to more than π.
pub fn delaunay_report(mesh: &Triangulation) -> DelaunayReport {
    let mut report = DelaunayReport::default();
    for f in &mesh.facets {
        if f.cells.len() != 2 || f.carrier.is_some() {
            continue;
        }
        let [a, b] = f.vertices;
        let (pa, pb) = (mesh.coords(a), mesh.coords(b));
        let sum: f64 = f
            .cells
            .iter()
            .map(|&c| {
                let opposite = mesh.cells[c]
                    .vertex_ids
                    .into_iter()
                    .find(|&v| v != a && v != b)
                    .expect("triangle has a third vertex");
                angle_at(mesh.coords(opposite), pa, pb)
            })
            .sum();
        if sum > PI + GEOM_TOL {
            report.edges.push(f.vertices);
            report.cells.extend(f.cells.iter().copied());
        }
    }
    report.cells.sort_unstable();
    report.cells.dedup();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryTag, GridHierarchy, GridMode};

    fn two_cells(coords: Vec<Point>) -> Triangulation {
        Triangulation::from_cells(coords, &[[0, 1, 2], [0, 2, 3]], |_, _| {
            Some(BoundaryTag::Dirichlet)
        })
        .unwrap()
    }

    #[test]
    fn uniform_right_triangle_mesh_is_delaunay() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let boundary = [(0, 1), (1, 2), (2, 3), (3, 0)]
            .into_iter()
            .map(|e| (e, BoundaryTag::Dirichlet))
            .collect();
        let mut h = GridHierarchy::new(coords, &[[0, 1, 2], [0, 2, 3]], boundary, None).unwrap();
        for _ in 0..3 {
            h.refine_uniform(GridMode::Conforming).unwrap();
        }
        assert_eq!(delaunay_report(&h.triangulation().unwrap()).count(), 0);
    }

    #[test]
    fn rectangle_diagonal_is_cocircular_not_flagged() {
        // Opposite angles are both right angles: sum equals pi exactly.
        let t = two_cells(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 1.0], [0.0, 1.0]]);
        assert_eq!(delaunay_report(&t).count(), 0);
    }

    #[test]
    fn parallelogram_long_diagonal_is_flagged() {
        // Opposite angles 135 + 135 degrees.
        let t = two_cells(vec![[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [1.0, 1.0]]);
        let r = delaunay_report(&t);
        assert_eq!(r.edges, vec![[0, 2]]);
        assert_eq!(r.cells, vec![0, 1]);
        // The short diagonal is fine.
        let t = Triangulation::from_cells(
            vec![[0.0, 0.0], [2.0, 0.0], [3.0, 1.0], [1.0, 1.0]],
            &[[0, 1, 3], [1, 2, 3]],
            |_, _| Some(BoundaryTag::Dirichlet),
        )
        .unwrap();
        assert_eq!(delaunay_report(&t).count(), 0);
    }

    #[test]
    fn equilateral_mesh_is_delaunay() {
        let h = 3f64.sqrt() / 2.0;
        let t = Triangulation::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, h], [1.5, h]],
            &[[0, 1, 2], [1, 3, 2]],
            |_, _| Some(BoundaryTag::Dirichlet),
        )
        .unwrap();
        assert_eq!(delaunay_report(&t).count(), 0);
    }
}
