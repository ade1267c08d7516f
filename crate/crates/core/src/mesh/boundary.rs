use super::{distance, BoundaryTag, Point, Triangulation, GEOM_TOL};
use crate::error::{Error, Result};

/// Curved boundary description used to place new boundary vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCurve {
    Circle { center: Point, radius: f64 },
}

impl BoundaryCurve {
    pub fn unit_circle() -> Self {
        BoundaryCurve::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            BoundaryCurve::Circle { center, radius } => {
                (distance(p, center) - radius).abs() <= 1e-9 * radius.max(1.0)
            }
        }
    }

    /// Radial projection onto the curve.
    pub fn try_project(&self, p: Point) -> Option<Point> {
        match *self {
            BoundaryCurve::Circle { center, radius } => {
                let r = distance(p, center);
                (r > GEOM_TOL).then(|| {
                    [
                        center[0] + (p[0] - center[0]) * radius / r,
                        center[1] + (p[1] - center[1]) * radius / r,
                    ]
                })
            }
        }
    }

    pub(crate) fn project(&self, p: Point) -> std::result::Result<Point, ()> {
        self.try_project(p).ok_or(())
    }
}

/// Moves every boundary vertex whose two boundary neighbors lie on `curve`
/// radially onto the curve. Vertices on straight boundary pieces, and
/// vertices already on the curve, are left in place.
pub fn project_boundary(mesh: &Triangulation, curve: &BoundaryCurve) -> Result<Triangulation> {
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for f in mesh.facets.iter().filter(|f| f.boundary_tag != BoundaryTag::Interior) {
        let [a, b] = f.vertices;
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut out = mesh.clone();
    for (v, nb) in neighbors.iter().enumerate() {
        let p = mesh.coords(v);
        if nb.is_empty() || curve.contains(p) {
            continue;
        }
        if nb.iter().all(|&w| curve.contains(mesh.coords(w))) {
            out.vertices[v].coords = curve.try_project(p).ok_or(Error::DegenerateProjection(v))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chord_mesh(t1: f64, t2: f64, mid: Point) -> Triangulation {
        let a = [t1.cos(), t1.sin()];
        let b = [t2.cos(), t2.sin()];
        // Two cells sharing the boundary chord a-mid-b, closed by an outer point.
        let outer = [3.0 * mid[0], 3.0 * mid[1]];
        Triangulation::from_cells(vec![a, mid, b, outer], &[[0, 1, 3], [1, 2, 3]], |_, _| {
            Some(BoundaryTag::Dirichlet)
        })
        .unwrap()
    }

    #[test]
    fn chord_midpoint_projects_to_unit_length() {
        let (t1, t2) = (0.3_f64, 0.9_f64);
        let mid = [(t1.cos() + t2.cos()) / 2.0, (t1.sin() + t2.sin()) / 2.0];
        let m = chord_mesh(t1, t2, mid);
        let p = project_boundary(&m, &BoundaryCurve::unit_circle()).unwrap();
        let q = p.coords(1);
        assert!((q[0].hypot(q[1]) - 1.0).abs() < 1e-15);
        // Endpoints stay put.
        assert_eq!(p.coords(0), m.coords(0));
    }

    #[test]
    fn point_on_circle_is_fixed() {
        let c = BoundaryCurve::unit_circle();
        let p = [0.6, 0.8];
        let q = c.try_project(p).unwrap();
        assert!((q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15);
    }

    #[test]
    fn straight_boundary_is_unchanged() {
        let t = Triangulation::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0]],
            &[[0, 1, 3], [1, 2, 3]],
            |_, _| Some(BoundaryTag::Neumann),
        )
        .unwrap();
        let p = project_boundary(&t, &BoundaryCurve::unit_circle()).unwrap();
        for v in 0..4 {
            assert_eq!(p.coords(v), t.coords(v));
        }
    }

    #[test]
    fn projecting_the_center_fails() {
        let c = BoundaryCurve::unit_circle();
        assert!(c.try_project([0.0, 0.0]).is_none());
        // Boundary vertex at the center between two points of the circle.
        let t = Triangulation::from_cells(
            vec![[1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], [0.0, -2.0]],
            &[[0, 1, 3], [1, 2, 3]],
            |_, _| Some(BoundaryTag::Dirichlet),
        )
        .unwrap();
        assert!(matches!(
            project_boundary(&t, &c),
            Err(Error::DegenerateProjection(1))
        ));
    }
}
