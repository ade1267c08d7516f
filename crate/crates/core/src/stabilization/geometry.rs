//! Node weights for the BJK limiter.

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Per-node factor `gamma_i` of the BJK limiter.
#[derive(Clone, Debug, PartialEq)]
pub struct BjkGeometry<T> {
    pub gamma: Vec<T>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let chain = |iter: &mut dyn Iterator<Item = &Point>| {
        let mut out: Vec<Point> = Vec::new();
        for &p in iter {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    hull
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

/// `gamma` for the point `x` and its neighbours, or the (non-positive)
/// signed distance to the hull boundary when `x` is not strictly inside.
pub fn gamma_value(x: Point, neighbours: &[Point]) -> std::result::Result<f64, f64> {
    let hull = convex_hull(neighbours);
    if hull.len() < 3 {
        return Err(0.0);
    }
    let n = hull.len();
    let mut dist = f64::INFINITY;
    let mut inside = true;
    for k in 0..n {
        let (a, b) = (hull[k], hull[(k + 1) % n]);
        dist = dist.min(segment_distance(x, a, b));
        if cross(a, b, x) <= 0.0 {
            inside = false;
        }
    }
    if !inside || dist <= 1e-14 {
        return Err(if inside { dist } else { -dist });
    }
    let far = hull
        .iter()
        .map(|v| (v[0] - x[0]).hypot(v[1] - x[1]))
        .fold(0.0, f64::max);
    Ok(far / dist)
}

/// `gamma_i` from the hull of the sparsity-pattern neighbours of each row.
///
/// Dirichlet nodes get 1 (their limiters are never used). Nodes on the
/// domain boundary whose neighbour hull does not contain them strictly also
/// get 1; for any other node a degenerate hull is an error.
pub fn bjk_geometry<T: Scalar>(
    a: &CsrMatrix<T>,
    coords: &[Point],
    dirichlet: &[bool],
    on_boundary: &[bool],
) -> Result<BjkGeometry<T>> {
    let n = a.nrows();
    for len in [coords.len(), dirichlet.len(), on_boundary.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut gamma = Vec::with_capacity(n);
    for i in 0..n {
        if dirichlet[i] {
            gamma.push(T::one());
            continue;
        }
        let neighbours: Vec<Point> = a.row(i).filter(|&(j, _)| j != i).map(|(j, _)| coords[j]).collect();
        let g = match gamma_value(coords[i], &neighbours) {
            Ok(g) => g,
            Err(_) if on_boundary[i] => 1.0,
            Err(dist) => return Err(Error::DegenerateHull { node: i, dist }),
        };
        gamma.push(T::from_f64(g).expect("representable"));
    }
    Ok(BjkGeometry { gamma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polygon(n: usize, r: f64) -> Vec<Point> {
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn regular_hexagon() {
        let g = gamma_value([0.0, 0.0], &polygon(6, 1.0)).unwrap();
        assert!((g - 2.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn diamond() {
        let g = gamma_value([0.0, 0.0], &polygon(4, 1.0)).unwrap();
        assert!((g - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn equilateral_centroid() {
        let g = gamma_value([0.0, 0.0], &polygon(3, 1.0)).unwrap();
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interior_neighbours_do_not_change_the_hull() {
        let mut pts = polygon(6, 1.0);
        pts.push([0.1, 0.1]);
        pts.push([0.5, 0.0]);
        let g = gamma_value([0.0, 0.0], &pts).unwrap();
        assert!((g - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(convex_hull(&pts).len(), 6);
    }

    #[test]
    fn boundary_and_outside_points_fail() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(gamma_value([0.5, 0.0], &sq).is_err());
        assert!(gamma_value([2.0, 0.5], &sq).is_err());
        assert!(gamma_value([0.5, 0.5], &[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn degenerate_interior_node_is_an_error() {
        // Node 0 at (0,0) with neighbours all on one side.
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let a = CsrMatrix::from_dense(&vec![vec![1.0; 4]; 4]);
        let err = bjk_geometry(&a, &coords, &[false; 4], &[false; 4]).unwrap_err();
        assert!(matches!(err, Error::DegenerateHull { node: 0, .. }));
        let ok = bjk_geometry(&a, &coords, &[false; 4], &[true; 4]).unwrap();
        assert_eq!(ok.gamma, vec![1.0; 4]);
    }
}
