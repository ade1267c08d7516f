//! Symmetric quadrature rules on triangles in barycentric form.

use crate::mesh::Point;

/// Points in barycentric coordinates with weights summing to 1 (multiply by
/// the cell area).
#[derive(Clone, Copy, Debug)]
pub struct TriangleRule {
    pub points: &'static [([f64; 3], f64)],
}

const A4: f64 = 0.445948490915965;
const B4: f64 = 0.091576213509771;
const W4A: f64 = 0.223381589678011;
const W4B: f64 = 0.109951743655322;

/// Six-point rule, exact for degree 4.
pub const DEGREE4: TriangleRule = TriangleRule {
    points: &[
        ([A4, A4, 1.0 - 2.0 * A4], W4A),
        ([A4, 1.0 - 2.0 * A4, A4], W4A),
        ([1.0 - 2.0 * A4, A4, A4], W4A),
        ([B4, B4, 1.0 - 2.0 * B4], W4B),
        ([B4, 1.0 - 2.0 * B4, B4], W4B),
        ([1.0 - 2.0 * B4, B4, B4], W4B),
    ],
};

// (6 - sqrt 15) / 21, (6 + sqrt 15) / 21 and weights (155 -+ sqrt 15) / 1200.
const A5: f64 = 0.101_286_507_323_456_33;
const B5: f64 = 0.470_142_064_105_115_05;
const W5A: f64 = 0.125_939_180_544_827_17;
const W5B: f64 = 0.132_394_152_788_506_16;

/// Seven-point rule, exact for degree 5.
pub const DEGREE5: TriangleRule = TriangleRule {
    points: &[
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A5, A5, 1.0 - 2.0 * A5], W5A),
        ([A5, 1.0 - 2.0 * A5, A5], W5A),
        ([1.0 - 2.0 * A5, A5, A5], W5A),
        ([B5, B5, 1.0 - 2.0 * B5], W5B),
        ([B5, 1.0 - 2.0 * B5, B5], W5B),
        ([1.0 - 2.0 * B5, B5, B5], W5B),
    ],
};

/// Gauss-Legendre on [0, 1] with three points, exact for degree 5.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

pub fn to_cartesian(v: &[Point; 3], lambda: [f64; 3]) -> Point {
    [
        lambda[0] * v[0][0] + lambda[1] * v[1][0] + lambda[2] * v[2][0],
        lambda[0] * v[0][1] + lambda[1] * v[1][1] + lambda[2] * v[2][1],
    ]
}

impl TriangleRule {
    /// Integral of `f(lambda, x)` over the triangle `v` with area `area`.
    pub fn integrate(&self, v: &[Point; 3], area: f64, mut f: impl FnMut([f64; 3], Point) -> f64) -> f64 {
        area * self
            .points
            .iter()
            .map(|&(l, w)| w * f(l, to_cartesian(v, l)))
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    // Integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
    fn monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check(rule: TriangleRule, degree: u32) {
        let total: f64 = rule.points.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for a in 0..=degree {
            for b in 0..=degree - a {
                let q = rule.integrate(&TRI, 0.5, |_, x| x[0].powi(a as i32) * x[1].powi(b as i32));
                assert!((q - monomial(a, b)).abs() < 1e-14, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn degree4_rule_is_exact() {
        check(DEGREE4, 4);
    }

    #[test]
    fn degree5_rule_is_exact() {
        check(DEGREE5, 5);
        let s = 15f64.sqrt();
        assert!((A5 - (6.0 - s) / 21.0).abs() < 1e-16);
        assert!((B5 - (6.0 + s) / 21.0).abs() < 1e-16);
        assert!((W5A - (155.0 - s) / 1200.0).abs() < 1e-16);
        assert!((W5B - (155.0 + s) / 1200.0).abs() < 1e-16);
    }

    #[test]
    fn gauss3_is_exact_on_quintics() {
        let q: f64 = GAUSS3.iter().map(|&(t, w)| w * t.powi(5)).sum();
        assert!((q - 1.0 / 6.0).abs() < 1e-15);
    }
}
