//! Algebraic stabilization: artificial diffusion, limiters and the
//! stabilization matrix `B(U)`.
//!
//! All matrices share one structurally symmetric pattern that contains the
//! diagonal. Limiter values are stored per pattern position.

mod geometry;

use std::fmt;
use std::str::FromStr;

pub use geometry::{bjk_geometry, convex_hull, gamma_value, BjkGeometry};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Kuzmin,
    Bjk,
    Muas,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Kuzmin, Method::Bjk, Method::Muas];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kuzmin => "kuzmin",
            Self::Bjk => "bjk",
            Self::Muas => "muas",
        }
    }

    /// Flux-corrected methods build `B` from `D`; MUAS builds it from `A`.
    pub fn is_afc(self) -> bool {
        self != Self::Muas
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kuzmin" => Ok(Self::Kuzmin),
            "bjk" => Ok(Self::Bjk),
            "muas" => Ok(Self::Muas),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Limiter values `alpha_ij` aligned with the matrix pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct LimiterField<T> {
    pub method: Method,
    pub values: Vec<T>,
}

impl<T: Scalar> LimiterField<T> {
    pub fn ones(method: Method, nnz: usize) -> Self {
        Self {
            method,
            values: vec![T::one(); nnz],
        }
    }

    pub fn constant(method: Method, nnz: usize, v: T) -> Self {
        Self {
            method,
            values: vec![v; nnz],
        }
    }
}

fn check_square<T: Scalar>(a: &CsrMatrix<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn diagonal_positions<T: Scalar>(a: &CsrMatrix<T>) -> Result<Vec<usize>> {
    (0..a.nrows())
        .map(|i| a.position(i, i).ok_or(Error::MissingDiagonal(i)))
        .collect()
}

/// Replaces the diagonal by minus the off-diagonal row sum.
fn close_rows<T: Scalar>(m: &mut CsrMatrix<T>, diag: &[usize]) {
    for (i, &kd) in diag.iter().enumerate() {
        let range = m.row_range(i);
        let off = range
            .filter(|&k| k != kd)
            .fold(T::zero(), |s, k| s + m.values()[k]);
        m.values_mut()[kd] = -off;
    }
}

/// `d_ij = -max{a_ij, 0, a_ji}` off the diagonal, zero row sums.
pub fn artificial_diffusion<T: Scalar>(a: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
    check_square(a)?;
    let tp = a.transpose_positions()?;
    let diag = diagonal_positions(a)?;
    let av = a.values();
    let mut d = a.map_values(|_, _, _| T::zero());
    for i in 0..a.nrows() {
        for k in a.row_range(i) {
            if k != diag[i] {
                d.values_mut()[k] = -av[k].max_of(T::zero()).max_of(av[tp[k]]);
            }
        }
    }
    close_rows(&mut d, &diag);
    Ok(d)
}

/// Precomputed pattern data for repeated limiter evaluations on one matrix.
#[derive(Clone, Debug)]
pub struct Stabilizer<T> {
    pub method: Method,
    pub a: CsrMatrix<T>,
    pub d: CsrMatrix<T>,
    transpose: Vec<usize>,
    diag: Vec<usize>,
    dirichlet: Vec<bool>,
    geometry: Option<BjkGeometry<T>>,
}

fn ratio<T: Scalar>(q: T, p: T) -> T {
    let tiny = T::from_f64(1e-300).unwrap_or_else(T::zero);
    if p.abs() <= tiny {
        T::one()
    } else {
        T::one().min_of(q / p)
    }
}

fn branch<T: Scalar>(f: T, rp: T, rm: T) -> T {
    if f > T::zero() {
        rp
    } else if f < T::zero() {
        rm
    } else {
        T::one()
    }
}

impl<T: Scalar> Stabilizer<T> {
    /// `a` is the Neumann-form matrix; `dirichlet` marks rows whose `R^±`
    /// are fixed to 1. BJK requires `geometry`.
    pub fn new(
        method: Method,
        a: CsrMatrix<T>,
        dirichlet: Vec<bool>,
        geometry: Option<BjkGeometry<T>>,
    ) -> Result<Self> {
        check_square(&a)?;
        if dirichlet.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: dirichlet.len(),
            });
        }
        if method == Method::Bjk {
            match &geometry {
                None => return Err(Error::MissingGeometry),
                Some(g) if g.gamma.len() != a.nrows() => {
                    return Err(Error::DimensionMismatch {
                        expected: a.nrows(),
                        got: g.gamma.len(),
                    })
                }
                Some(_) => {}
            }
        }
        let d = artificial_diffusion(&a)?;
        Ok(Self {
            method,
            transpose: a.transpose_positions()?,
            diag: diagonal_positions(&a)?,
            a,
            d,
            dirichlet,
            geometry,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn transpose(&self) -> &[usize] {
        &self.transpose
    }

    pub fn limiters(&self, u: &[T]) -> Result<LimiterField<T>> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        let values = match self.method {
            Method::Kuzmin => self.kuzmin(u),
            Method::Bjk => self.bjk(u),
            Method::Muas => self.muas(u),
        };
        Ok(LimiterField {
            method: self.method,
            values,
        })
    }

    fn r_values(&self, i: usize, p: (T, T), q: (T, T)) -> (T, T) {
        if self.dirichlet[i] {
            (T::one(), T::one())
        } else {
            (ratio(q.0, p.0), ratio(q.1, p.1))
        }
    }

    fn kuzmin(&self, u: &[T]) -> Vec<T> {
        let (av, dv) = (self.a.values(), self.d.values());
        let cols = self.a.col_idx();
        let owns = |i: usize, k: usize| {
            let (aij, aji) = (av[k], av[self.transpose[k]]);
            aji < aij || (aji == aij && i < cols[k])
        };
        let mut alpha = vec![T::one(); av.len()];
        for i in 0..self.dim() {
            let (mut pp, mut pm, mut qp, mut qm) = (T::zero(), T::zero(), T::zero(), T::zero());
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j == i {
                    continue;
                }
                let f = dv[k] * (u[j] - u[i]);
                if owns(i, k) {
                    pp = pp + f.pos();
                    pm = pm + f.neg_part();
                }
                qp = qp - f.neg_part();
                qm = qm - f.pos();
            }
            let (rp, rm) = self.r_values(i, (pp, pm), (qp, qm));
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j != i && owns(i, k) {
                    let v = branch(dv[k] * (u[j] - u[i]), rp, rm);
                    alpha[k] = v;
                    alpha[self.transpose[k]] = v;
                }
            }
        }
        alpha
    }

    fn bjk(&self, u: &[T]) -> Vec<T> {
        let gamma = &self.geometry.as_ref().expect("checked in new").gamma;
        let dv = self.d.values();
        let cols = self.a.col_idx();
        let mut bar = vec![T::one(); dv.len()];
        for i in 0..self.dim() {
            let (mut pp, mut pm, mut q) = (T::zero(), T::zero(), T::zero());
            let (mut umax, mut umin) = (u[i], u[i]);
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j == i {
                    continue;
                }
                let f = dv[k] * (u[j] - u[i]);
                pp = pp + f.pos();
                pm = pm + f.neg_part();
                q = q + gamma[i] * dv[k];
                umax = umax.max_of(u[j]);
                umin = umin.min_of(u[j]);
            }
            let qp = q * (u[i] - umax);
            let qm = q * (u[i] - umin);
            let (rp, rm) = self.r_values(i, (pp, pm), (qp, qm));
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j != i {
                    bar[k] = branch(dv[k] * (u[j] - u[i]), rp, rm);
                }
            }
        }
        (0..bar.len())
            .map(|k| bar[k].min_of(bar[self.transpose[k]]))
            .collect()
    }

    fn muas(&self, u: &[T]) -> Vec<T> {
        let av = self.a.values();
        let cols = self.a.col_idx();
        let mut alpha = vec![T::one(); av.len()];
        for i in 0..self.dim() {
            let (mut pp, mut pm, mut qp, mut qm) = (T::zero(), T::zero(), T::zero(), T::zero());
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j == i {
                    continue;
                }
                let (aij, aji) = (av[k], av[self.transpose[k]]);
                if aij > T::zero() {
                    pp = pp + aij * (u[i] - u[j]).pos();
                    pm = pm + aij * (u[i] - u[j]).neg_part();
                }
                let w = aij.abs().max_of(aji);
                qp = qp + w * (u[j] - u[i]).pos();
                qm = qm + w * (u[j] - u[i]).neg_part();
            }
            let (rp, rm) = self.r_values(i, (pp, pm), (qp, qm));
            for k in self.a.row_range(i) {
                let j = cols[k];
                if j == i || (av[k].is_zero() && av[self.transpose[k]].is_zero()) {
                    continue;
                }
                alpha[k] = branch(u[i] - u[j], rp, rm);
            }
        }
        alpha
    }

    /// `B` for given limiter values.
    pub fn stabilization_matrix(&self, alpha: &LimiterField<T>) -> Result<CsrMatrix<T>> {
        if alpha.values.len() != self.a.nnz() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nnz(),
                got: alpha.values.len(),
            });
        }
        let al = &alpha.values;
        let mut b = self.a.map_values(|_, _, _| T::zero());
        for i in 0..self.dim() {
            for k in self.a.row_range(i) {
                if k == self.diag[i] {
                    continue;
                }
                b.values_mut()[k] = if self.method.is_afc() {
                    (T::one() - al[k]) * self.d.values()[k]
                } else {
                    let kt = self.transpose[k];
                    let av = self.a.values();
                    -((T::one() - al[k]) * av[k])
                        .max_of(T::zero())
                        .max_of((T::one() - al[kt]) * av[kt])
                };
            }
        }
        close_rows(&mut b, &self.diag);
        Ok(b)
    }

    /// `B U` for given limiter values, without forming `B`.
    pub fn apply(&self, alpha: &LimiterField<T>, u: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if alpha.values.len() != self.a.nnz() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nnz(),
                got: alpha.values.len(),
            });
        }
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        let (al, av, dv, cols) = (&alpha.values, self.a.values(), self.d.values(), self.a.col_idx());
        let afc = self.method.is_afc();
        Ok((0..n)
            .map(|i| {
                let mut s = T::zero();
                for k in self.a.row_range(i) {
                    let j = cols[k];
                    if j == i {
                        continue;
                    }
                    let bij = if afc {
                        (T::one() - al[k]) * dv[k]
                    } else {
                        let kt = self.transpose[k];
                        -((T::one() - al[k]) * av[k])
                            .max_of(T::zero())
                            .max_of((T::one() - al[kt]) * av[kt])
                    };
                    s = s + bij * (u[j] - u[i]);
                }
                s
            })
            .collect())
    }

    /// `B(U)`.
    pub fn stabilization(&self, u: &[T]) -> Result<CsrMatrix<T>> {
        self.stabilization_matrix(&self.limiters(u)?)
    }
}

/// Limiters of `method` for `a` at `u` (one-shot form of [`Stabilizer`]).
pub fn compute_limiters<T: Scalar>(
    method: Method,
    a: &CsrMatrix<T>,
    u: &[T],
    geometry: Option<&BjkGeometry<T>>,
    dirichlet: &[bool],
) -> Result<LimiterField<T>> {
    Stabilizer::new(method, a.clone(), dirichlet.to_vec(), geometry.cloned())?.limiters(u)
}

/// `B` of `method` for `a` and limiter values `alpha`.
pub fn assemble_stabilization<T: Scalar>(
    method: Method,
    a: &CsrMatrix<T>,
    alpha: &LimiterField<T>,
) -> Result<CsrMatrix<T>> {
    let st = Stabilizer::new(
        method,
        a.clone(),
        vec![false; a.nrows()],
        (method == Method::Bjk).then(|| BjkGeometry {
            gamma: vec![T::one(); a.nrows()],
        }),
    )?;
    st.stabilization_matrix(&LimiterField {
        method,
        values: alpha.values.clone(),
    })
}

/// `(A + B) U - b`.
pub fn residual_vector<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    u: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let n = a.nrows();
    for len in [b.nrows(), u.len(), rhs.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let (au, bu) = (a.mul_vec(u), b.mul_vec(u));
    Ok((0..n).map(|i| au[i] + bu[i] - rhs[i]).collect())
}

/// Euclidean norm of `(A + B) U - b`.
pub fn nonlinear_residual<T: Real>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    u: &[T],
    rhs: &[T],
) -> Result<T> {
    Ok(residual_vector(a, b, u, rhs)?
        .into_iter()
        .fold(T::zero(), |s, r| s + r * r)
        .sqrt())
}

#[cfg(test)]
mod tests;
