//! Sparse linear solves: direct LU with reuse, and GMRES with SSOR.

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::traits::ComplexField;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Real scalar the linear solvers accept.
pub trait LinearScalar: Real + ComplexField {}

impl<T: Real + ComplexField> LinearScalar for T {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SolverMode {
    #[default]
    Direct,
    Iterative,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Iterative => "iterative",
        })
    }
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Self::Direct),
            "iterative" => Ok(Self::Iterative),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

/// GMRES settings.
#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iterations: 2000,
            rel_tol: 1e-12,
        }
    }
}

/// Symmetric Gauss-Seidel preconditioner.
struct Ssor<'a, T> {
    a: &'a CsrMatrix<T>,
    diag: Vec<T>,
}

impl<'a, T: LinearScalar> Ssor<'a, T> {
    fn new(a: &'a CsrMatrix<T>) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|d| d.is_zero()) {
            return Err(Error::Factorization(format!("SSOR needs a nonzero diagonal, row {i} is zero")));
        }
        Ok(Self { a, diag })
    }

    /// `x = (D + U)^{-1} D (D + L)^{-1} v`.
    fn apply(&self, v: &[T]) -> Vec<T> {
        let n = v.len();
        let (cols, vals) = (self.a.col_idx(), self.a.values());
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = v[i];
            for k in self.a.row_range(i) {
                if cols[k] < i {
                    s = s - vals[k] * y[cols[k]];
                }
            }
            y[i] = s / self.diag[i];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = self.diag[i] * y[i];
            for k in self.a.row_range(i) {
                if cols[k] > i {
                    s = s - vals[k] * x[cols[k]];
                }
            }
            x[i] = s / self.diag[i];
        }
        x
    }
}

fn norm<T: LinearScalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

fn dot<T: LinearScalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Right-preconditioned restarted GMRES; the tolerance applies to the true
/// residual relative to `||b||`.
pub fn gmres<T: LinearScalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    opts: GmresOptions,
) -> Result<Vec<T>> {
    let n = b.len();
    if a.nrows() != a.ncols() || a.nrows() != n {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: n });
    }
    let pre = Ssor::new(a)?;
    let tol = T::from_f64_lossy(opts.rel_tol) * norm(b);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let residual = |x: &[T]| -> Vec<T> {
        let ax = a.mul_vec(x);
        (0..n).map(|i| b[i] - ax[i]).collect()
    };
    let mut r = residual(&x);
    let mut beta = norm(&r);
    let mut total = 0;
    let m = opts.restart.max(1);
    while beta > tol {
        if total >= opts.max_iterations {
            return Err(Error::IterativeNotConverged {
                iterations: total,
                residual: (beta / norm(b).max(T::min_positive_value())).to_f64_lossy(),
            });
        }
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&ri| ri / beta).collect()];
        let mut z: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if total >= opts.max_iterations {
                break;
            }
            total += 1;
            let zk = pre.apply(&v[k]);
            let mut w = a.mul_vec(&zk);
            z.push(zk);
            for (j, vj) in v.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                for (wi, &vi) in w.iter_mut().zip(vj) {
                    *wi = *wi - h[j][k] * vi;
                }
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            if rho.is_zero() {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k_used = k + 1;
            let hk1 = norm(&w);
            if g[k + 1].abs() <= tol || hk1.is_zero() {
                break;
            }
            v.push(w.iter().map(|&wi| wi / hk1).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s = s - h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, &zi) in x.iter_mut().zip(&z[j]) {
                *xi = *xi + *yj * zi;
            }
        }
        r = residual(&x);
        let new_beta = norm(&r);
        if !new_beta.is_finite() {
            return Err(Error::IterativeNotConverged {
                iterations: total,
                residual: f64::NAN,
            });
        }
        if k_used == 0 && new_beta >= beta {
            return Err(Error::IterativeNotConverged {
                iterations: total,
                residual: (new_beta / norm(b).max(T::min_positive_value())).to_f64_lossy(),
            });
        }
        beta = new_beta;
    }
    Ok(x)
}

/// Operator prepared for repeated solves.
pub struct LinearSolver<T: LinearScalar> {
    matrix: CsrMatrix<T>,
    mode: SolverMode,
    lu: Option<faer::sparse::linalg::solvers::Lu<usize, T>>,
    gmres: GmresOptions,
    fallbacks: usize,
}

impl<T: LinearScalar> LinearSolver<T> {
    /// Factorizes once in direct mode.
    pub fn new(matrix: CsrMatrix<T>, mode: SolverMode) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let lu = match mode {
            SolverMode::Iterative => None,
            SolverMode::Direct => {
                let n = matrix.nrows();
                let triplets: Vec<Triplet<usize, usize, T>> = (0..n)
                    .flat_map(|i| matrix.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
                    .collect();
                let csc = SparseColMat::<usize, T>::try_new_from_triplets(n, n, &triplets)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                Some(csc.sp_lu().map_err(|e| Error::Factorization(e.to_string()))?)
            }
        };
        Ok(Self {
            matrix,
            mode,
            lu,
            gmres: GmresOptions::default(),
            fallbacks: 0,
        })
    }

    pub fn mode(&self) -> SolverMode {
        self.mode
    }

    /// Number of direct solves that produced non-finite output and were
    /// redone iteratively.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn solve(&mut self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.matrix.nrows();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
        }
        if let Some(lu) = &self.lu {
            let mut x = faer::Mat::<T>::from_fn(n, 1, |i, _| rhs[i]);
            lu.solve_in_place(x.as_mut());
            let out: Vec<T> = (0..n).map(|i| x[(i, 0)]).collect();
            if out.iter().all(|v| v.is_finite()) {
                return Ok(out);
            }
            self.fallbacks += 1;
            log::warn!("direct solve produced non-finite values, retrying with GMRES");
            return gmres(&self.matrix, rhs, None, self.gmres).map_err(|e| {
                Error::Factorization(format!("direct solve non-finite and GMRES failed: {e}"))
            });
        }
        gmres(&self.matrix, rhs, None, self.gmres)
    }
}

/// One-shot solve.
pub fn linear_solve<T: LinearScalar>(a: &CsrMatrix<T>, rhs: &[T], mode: SolverMode) -> Result<Vec<T>> {
    LinearSolver::new(a.clone(), mode)?.solve(rhs)
}
