//! Residual-based a posteriori estimator in the AFC energy norm.
//!
//! All stored contributions are squared. The AFC variant adds a term for the
//! artificial diffusion left over by the limiters; the MUAS variant drops it.

use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point, Triangulation};
use crate::problem::ProblemSpec;
use crate::quadrature::{DEGREE5, GAUSS3};
use crate::sparse::CsrMatrix;
use crate::stabilization::LimiterField;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EstimatorVariant {
    #[default]
    AfcEnergy,
    MuasIndicator,
}

impl fmt::Display for EstimatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AfcEnergy => "afc_energy",
            Self::MuasIndicator => "muas_indicator",
        })
    }
}

/// Interpolation, trace and inverse constants. All default to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConstants {
    pub c_i: f64,
    pub c_f: f64,
    pub c: f64,
    pub c_inv: f64,
    pub c_edge_max: f64,
}

impl Default for EstimatorConstants {
    fn default() -> Self {
        Self {
            c_i: 1.0,
            c_f: 1.0,
            c: 1.0,
            c_inv: 1.0,
            c_edge_max: 1.0,
        }
    }
}

impl EstimatorConstants {
    fn edge_factor(&self) -> f64 {
        self.c * self.c_edge_max * (1.0 + (1.0 + self.c_i).powi(2))
    }

    pub fn kappa1(&self) -> f64 {
        self.edge_factor()
    }

    pub fn kappa2(&self) -> f64 {
        self.c_inv * self.c_inv * self.edge_factor()
    }
}

/// Limiter data the AFC variant needs, in reduced numbering.
#[derive(Clone, Copy, Debug)]
pub struct AfcData<'a> {
    /// Vertex id -> reduced index (`None` for hanging vertices).
    pub to_reduced: &'a [Option<usize>],
    pub alpha: &'a LimiterField<f64>,
    pub d: &'a CsrMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub variant: EstimatorVariant,
    /// Squared cell residual terms.
    pub cells: Vec<f64>,
    /// Squared flux jump terms, one per facet.
    pub facets: Vec<f64>,
    /// Squared limiter terms, one per facet (zero for the MUAS variant).
    pub edges: Vec<f64>,
    pub eta: f64,
}

impl IndicatorField {
    pub fn eta1(&self) -> f64 {
        compensated_sum(&self.cells).sqrt()
    }

    pub fn eta2(&self) -> f64 {
        compensated_sum(&self.facets).sqrt()
    }

    pub fn eta3(&self) -> f64 {
        compensated_sum(&self.edges).sqrt()
    }
}

/// Neumaier summation. Indicator sums run over 1e5 terms of very different
/// size; plain summation loses about 1e-13 relative, which shows up when the
/// same terms are summed in another order (per cell for marking).
pub fn compensated_sum<'a>(terms: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &t in terms {
        let next = sum + t;
        carry += if sum.abs() >= t.abs() { (sum - next) + t } else { (t - next) + sum };
        sum = next;
    }
    sum + carry
}

/// `min{a, b}` where a vanishing denominator removes that branch.
fn weight(eps_branch: Option<f64>, sigma_branch: Option<f64>) -> f64 {
    match (eps_branch, sigma_branch) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!("checked by estimate"),
    }
}

fn positive(x: f64) -> Option<f64> {
    (x > 0.0).then_some(x)
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Unit normal of the edge `pa -> pb` pointing away from `inner`.
fn outward_normal(pa: Point, pb: Point, inner: Point) -> [f64; 2] {
    let t = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = t[0].hypot(t[1]);
    let mut n = [t[1] / len, -t[0] / len];
    if dot(n, [inner[0] - pa[0], inner[1] - pa[1]]) > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

fn centroid(mesh: &Triangulation, c: usize) -> Point {
    let p = mesh.cell_points(c);
    [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
}

/// Tangential derivative of `u` along facet `f`, averaged over the adjacent
/// cells.
pub fn tangential_derivative(mesh: &Triangulation, f: usize, u: &[f64]) -> f64 {
    let facet = &mesh.facets[f];
    let [a, b] = facet.vertices;
    let (pa, pb) = (mesh.coords(a), mesh.coords(b));
    let len = mesh.facet_length(f);
    let t = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
    let sum: f64 = facet.cells.iter().map(|&c| dot(mesh.cell_gradient(c, u), t)).sum();
    sum / facet.cells.len() as f64
}

/// Evaluates the estimator for the continuous (expanded) solution `u`.
/// `afc` is required for [`EstimatorVariant::AfcEnergy`].
pub fn estimate(
    mesh: &Triangulation,
    u: &[f64],
    spec: &ProblemSpec,
    afc: Option<AfcData<'_>>,
    variant: EstimatorVariant,
    k: &EstimatorConstants,
) -> Result<IndicatorField> {
    let (eps, sigma0) = (spec.epsilon, spec.sigma0);
    if eps <= 0.0 && sigma0 <= 0.0 {
        return Err(Error::UndefinedEstimator);
    }
    if u.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: u.len(),
        });
    }
    let afc = match variant {
        EstimatorVariant::AfcEnergy => Some(afc.ok_or(Error::MissingLimiterData)?),
        EstimatorVariant::MuasIndicator => None,
    };
    let eps_pos = positive(eps);
    let sig_pos = positive(sigma0);

    let grads: Vec<[f64; 2]> = (0..mesh.num_cells()).map(|c| mesh.cell_gradient(c, u)).collect();
    let cells: Vec<f64> = (0..mesh.num_cells())
        .map(|c| {
            let pts = mesh.cell_points(c);
            let ids = mesh.cells[c].vertex_ids;
            let h = mesh.cell_diameter(c);
            let w = weight(
                eps_pos.map(|e| 4.0 * k.c_i * k.c_i * h * h / e),
                sig_pos.map(|s| 4.0 * k.c_i * k.c_i / s),
            );
            let r2 = DEGREE5.integrate(&pts, mesh.cell_area(c), |lambda, x| {
                let uh: f64 = (0..3).map(|i| lambda[i] * u[ids[i]]).sum();
                let r = (spec.source)(x) - dot((spec.convection)(x), grads[c]) - (spec.reaction)(x) * uh;
                r * r
            });
            w * r2
        })
        .collect();

    let mut facets = vec![0.0; mesh.facets.len()];
    let mut edges = vec![0.0; mesh.facets.len()];
    for (fi, facet) in mesh.facets.iter().enumerate() {
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.coords(a), mesh.coords(b));
        let h = mesh.facet_length(fi);
        let r2 = match facet.boundary_tag {
            BoundaryTag::Dirichlet => 0.0,
            BoundaryTag::Interior => {
                let (c0, c1) = (facet.cells[0], facet.cells[1]);
                let n = outward_normal(pa, pb, centroid(mesh, c0));
                let jump = eps * (dot(grads[c0], n) - dot(grads[c1], n));
                jump * jump * h
            }
            BoundaryTag::Neumann => {
                let c0 = facet.cells[0];
                let flux = eps * dot(grads[c0], outward_normal(pa, pb, centroid(mesh, c0)));
                GAUSS3
                    .iter()
                    .map(|&(t, w)| {
                        let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                        let r = (spec.neumann)(x) - flux;
                        w * h * r * r
                    })
                    .sum()
            }
        };
        if r2 > 0.0 {
            // Without diffusion there is no flux, so the residual vanishes.
            facets[fi] = match eps_pos {
                None => 0.0,
                Some(e) => weight(
                    Some(4.0 * k.c_f * k.c_f * h / e),
                    sig_pos.map(|s| 4.0 * k.c_f * k.c_f / (s.sqrt() * e.sqrt())),
                ) * r2,
            };
        }
        if let Some(data) = afc {
            let [p, q] = facet.carrier.unwrap_or(facet.vertices);
            let (Some(i), Some(j)) = (data.to_reduced[p], data.to_reduced[q]) else {
                continue;
            };
            let Some(pos) = data.d.position(i, j) else {
                continue;
            };
            let one_minus = 1.0 - data.alpha.values[pos];
            let dij = data.d.values()[pos];
            if one_minus == 0.0 || dij == 0.0 {
                continue;
            }
            let dt = tangential_derivative(mesh, fi, u);
            let w = weight(
                eps_pos.map(|e| 4.0 * k.kappa1() * h * h / e),
                sig_pos.map(|s| 4.0 * k.kappa2() / s),
            );
            // h^{1-d} ||∂_t u||^2_E with d = 2 and constant ∂_t u.
            edges[fi] = w * one_minus * one_minus * dij * dij * dt * dt;
        }
    }
    let eta = compensated_sum(cells.iter().chain(&facets).chain(&edges)).sqrt();
    Ok(IndicatorField {
        variant,
        cells,
        facets,
        edges,
        eta,
    })
}

/// Per-cell indicators: each facet term is shared equally by its cells.
pub fn localize_for_marking(mesh: &Triangulation, ind: &IndicatorField) -> Vec<f64> {
    let mut out = ind.cells.clone();
    for (f, facet) in mesh.facets.iter().enumerate() {
        let share = (ind.facets[f] + ind.edges[f]) / facet.cells.len() as f64;
        for &c in &facet.cells {
            out[c] += share;
        }
    }
    out
}
