//! Damped fixed-point iteration for the stabilized nonlinear systems.
//!
//! Each step solves `(A + D) Ũ = b + (D - B(U)) U` and moves to
//! `ω Ũ + (1 - ω) U`. The left operator does not depend on `U`, so it is
//! factorized once per solve.

pub mod linear;

pub use linear::{gmres, linear_solve, GmresOptions, LinearScalar, LinearSolver, SolverMode};

use crate::assembly::apply_dirichlet;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseSystem};
use crate::stabilization::Stabilizer;

/// Hard cap on accepted plus rejected steps.
pub const MAX_STEPS: usize = 10_000;
pub const OMEGA_MIN: f64 = 1e-4;
pub const OMEGA_GROWTH: f64 = 1.1;
/// Consecutive accepted steps before ω grows.
pub const GROWTH_AFTER: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub eps_thresh: f64,
    /// Degrees of freedom entering the stopping threshold.
    pub dof: usize,
    pub max_steps: usize,
    pub mode: SolverMode,
}

impl FixedPointOptions {
    pub fn new(eps_thresh: f64, dof: usize) -> Self {
        Self {
            eps_thresh,
            dof,
            max_steps: MAX_STEPS,
            mode: SolverMode::Direct,
        }
    }

    /// `eps_thresh · sqrt(#dof)`.
    pub fn threshold(&self) -> f64 {
        self.eps_thresh * (self.dof as f64).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub rejections: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Damping factor of every attempted step.
    pub omega_history: Vec<f64>,
    pub threshold: f64,
    /// Largest off-diagonal entry of the left operator; never positive.
    pub max_offdiag: f64,
    /// Direct solves redone by GMRES.
    pub fallbacks: usize,
}

impl SolveReport {
    pub fn steps(&self) -> usize {
        self.iterations + self.rejections
    }
}

fn zero_rows<T: LinearScalar>(m: &CsrMatrix<T>, rows: &[bool]) -> CsrMatrix<T> {
    m.map_values(|i, _, v| if rows[i] { T::zero() } else { v })
}

/// `A + D` with Dirichlet rows replaced by identity rows.
pub fn left_operator<T: LinearScalar>(st: &Stabilizer<T>, dirichlet: &[(usize, T)]) -> Result<CsrMatrix<T>> {
    let mask = mask(st.dim(), dirichlet);
    let a_dir = apply_dirichlet(&SparseSystem::new(st.a.clone(), vec![T::zero(); st.dim()])?, dirichlet).matrix;
    Ok(a_dir.add(&zero_rows(&st.d, &mask)))
}

fn mask<T>(n: usize, dirichlet: &[(usize, T)]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &(i, _) in dirichlet {
        m[i] = true;
    }
    m
}

/// Largest off-diagonal value of `m`, `-inf` for diagonal matrices.
pub fn max_offdiagonal<T: LinearScalar>(m: &CsrMatrix<T>) -> f64 {
    (0..m.nrows())
        .flat_map(|i| m.row(i).filter(move |&(j, _)| j != i).map(|(_, v)| v.to_f64_lossy()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Residual of the nonlinear problem with Dirichlet rows imposed, as used by
/// the stopping test.
pub fn dirichlet_residual<T: LinearScalar>(
    st: &Stabilizer<T>,
    rhs: &[T],
    dirichlet: &[(usize, T)],
    u: &[T],
) -> Result<T> {
    let sys = apply_dirichlet(&SparseSystem::new(st.a.clone(), rhs.to_vec())?, dirichlet);
    let b = zero_rows(&st.stabilization(u)?, &mask(st.dim(), dirichlet));
    crate::stabilization::nonlinear_residual(&sys.matrix, &b, u, &sys.rhs)
}

struct State<T> {
    u: Vec<T>,
    bu: Vec<T>,
    res: T,
}

/// Solves `(A + B(U)) U = b` with Dirichlet rows for the limiter context in
/// `st` (Neumann-form `A`, its `D` and the limiter method), starting from
/// `u0`.
pub fn fixed_point_solve<T: LinearScalar>(
    st: &Stabilizer<T>,
    rhs: &[T],
    dirichlet: &[(usize, T)],
    u0: Vec<T>,
    opts: FixedPointOptions,
) -> Result<(Vec<T>, SolveReport)> {
    let n = st.dim();
    for len in [rhs.len(), u0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let rows = mask(n, dirichlet);
    let sys = apply_dirichlet(&SparseSystem::new(st.a.clone(), rhs.to_vec())?, dirichlet);
    let (a_dir, b_dir) = (sys.matrix, sys.rhs);
    let d = zero_rows(&st.d, &rows);
    let left = a_dir.add(&d);
    let max_offdiag = max_offdiagonal(&left);
    debug_assert!(max_offdiag <= 0.0, "left operator has a positive off-diagonal {max_offdiag}");
    let mut solver = LinearSolver::new(left, opts.mode)?;

    let threshold = opts.threshold();
    let evaluate = |u: Vec<T>| -> Result<State<T>> {
        let mut bu = st.apply(&st.limiters(&u)?, &u)?;
        for &(i, _) in dirichlet {
            bu[i] = T::zero();
        }
        let au = a_dir.mul_vec(&u);
        let res = (0..n)
            .map(|i| au[i] + bu[i] - b_dir[i])
            .fold(T::zero(), |s, r| s + r * r)
            .sqrt();
        Ok(State { u, bu, res })
    };
    let mut u0 = u0;
    for &(i, v) in dirichlet {
        u0[i] = v;
    }
    let mut cur = evaluate(u0)?;
    let mut report = SolveReport {
        threshold,
        max_offdiag,
        ..SolveReport::default()
    };
    let mut omega = 1.0;
    let mut streak = 0;
    // The undamped iterate only depends on U, so it survives rejections.
    let mut tilde: Option<Vec<T>> = None;
    loop {
        if !cur.res.is_finite() {
            return Err(Error::SolverDiverged(report.steps()));
        }
        if cur.res.to_f64_lossy() <= threshold {
            report.converged = true;
            break;
        }
        if report.steps() >= opts.max_steps {
            break;
        }
        let ut = match tilde.take() {
            Some(ut) => ut,
            None => {
                let du = d.mul_vec(&cur.u);
                let f: Vec<T> = (0..n).map(|i| b_dir[i] + du[i] - cur.bu[i]).collect();
                let ut = solver.solve(&f)?;
                if ut.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SolverDiverged(report.steps()));
                }
                ut
            }
        };
        let w = T::from_f64_lossy(omega);
        let cand: Vec<T> = ut.iter().zip(&cur.u).map(|(&t, &u)| w * t + (T::one() - w) * u).collect();
        let next = evaluate(cand)?;
        report.omega_history.push(omega);
        if !next.res.is_finite() {
            return Err(Error::SolverDiverged(report.steps()));
        }
        if next.res < cur.res || omega <= OMEGA_MIN {
            cur = next;
            report.iterations += 1;
            streak += 1;
            if streak >= GROWTH_AFTER {
                omega = (omega * OMEGA_GROWTH).min(1.0);
                streak = 0;
            }
        } else {
            report.rejections += 1;
            streak = 0;
            omega = (omega * 0.5).max(OMEGA_MIN);
            tilde = Some(ut);
        }
        log::trace!(
            "fixed point step {}: residual {:e}, omega {omega}",
            report.steps(),
            cur.res.to_f64_lossy()
        );
    }
    report.final_residual = cur.res.to_f64_lossy();
    report.fallbacks = solver.fallbacks();
    Ok((cur.u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilization::{BjkGeometry, Method};

    fn stabilizer(method: Method, a: CsrMatrix<f64>, dirichlet: Vec<bool>) -> Stabilizer<f64> {
        let n = a.nrows();
        let geometry = (method == Method::Bjk).then(|| BjkGeometry { gamma: vec![1.0; n] });
        Stabilizer::new(method, a, dirichlet, geometry).unwrap()
    }

    #[test]
    fn threshold_arithmetic() {
        let t = FixedPointOptions::new(1e-10, 1089).threshold();
        assert!((t - 3.3e-9).abs() < 1e-22);
    }

    #[test]
    fn scalar_system_in_one_step() {
        for method in Method::ALL {
            let st = stabilizer(method, CsrMatrix::from_dense(&[vec![4.0]]), vec![false]);
            let (u, rep) = fixed_point_solve(&st, &[2.0], &[], vec![0.0], FixedPointOptions::new(1e-12, 1)).unwrap();
            assert_eq!(u, vec![0.5]);
            assert_eq!((rep.iterations, rep.rejections), (1, 0));
            assert!(rep.converged);
        }
    }

    #[test]
    fn m_matrix_converges_in_one_step_to_galerkin() {
        // 1D diffusion stencil: no positive off-diagonals, so D = B = 0.
        let n = 6;
        let a = CsrMatrix::from_triplets(
            n,
            n,
            &(0..n)
                .flat_map(|i| {
                    let mut t = vec![(i, i, 2.0)];
                    if i > 0 {
                        t.push((i, i - 1, -1.0));
                    }
                    if i + 1 < n {
                        t.push((i, i + 1, -1.0));
                    }
                    t
                })
                .collect::<Vec<_>>(),
        );
        let rhs = vec![1.0; n];
        let dirichlet = [(0, 0.0), (n - 1, 1.0)];
        let mut mask = vec![false; n];
        mask[0] = true;
        mask[n - 1] = true;
        for method in Method::ALL {
            let st = stabilizer(method, a.clone(), mask.clone());
            let (u, rep) =
                fixed_point_solve(&st, &rhs, &dirichlet, vec![0.0; n], FixedPointOptions::new(1e-12, n)).unwrap();
            assert_eq!(rep.iterations, 1, "{method:?}");
            let sys = apply_dirichlet(&SparseSystem::new(a.clone(), rhs.clone()).unwrap(), &dirichlet);
            let galerkin = linear_solve(&sys.matrix, &sys.rhs, SolverMode::Direct).unwrap();
            for (p, q) in u.iter().zip(&galerkin) {
                assert!((p - q).abs() < 1e-13);
            }
        }
    }

    fn convection_matrix(n: usize, eps: f64) -> CsrMatrix<f64> {
        // Upwind-free central 1D convection-diffusion: positive off-diagonals.
        let h = 1.0 / (n - 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * eps / h));
            if i > 0 {
                t.push((i, i - 1, -eps / h - 0.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -eps / h + 0.5));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn nonlinear_solve_meets_threshold() {
        let n = 21;
        let mut mask = vec![false; n];
        mask[0] = true;
        mask[n - 1] = true;
        let dirichlet = [(0, 1.0), (n - 1, 0.0)];
        for method in Method::ALL {
            let st = stabilizer(method, convection_matrix(n, 1e-3), mask.clone());
            let opts = FixedPointOptions::new(1e-10, n);
            let (u, rep) = fixed_point_solve(&st, &vec![0.0; n], &dirichlet, vec![0.0; n], opts).unwrap();
            assert!(rep.converged, "{method:?} {rep:?}");
            let res = dirichlet_residual(&st, &vec![0.0; n], &dirichlet, &u).unwrap();
            assert!(res <= rep.threshold);
            assert!(rep.max_offdiag <= 0.0);
            assert_eq!(rep.omega_history.len(), rep.steps());
            for v in &u {
                assert!((-1e-8..=1.0 + 1e-8).contains(v), "{method:?} overshoot {v}");
            }
        }
    }

    #[test]
    fn step_cap_is_respected() {
        let n = 21;
        let mut mask = vec![false; n];
        mask[0] = true;
        mask[n - 1] = true;
        let st = stabilizer(Method::Kuzmin, convection_matrix(n, 1e-3), mask);
        let opts = FixedPointOptions {
            max_steps: 2,
            ..FixedPointOptions::new(1e-300, n)
        };
        let (_, rep) = fixed_point_solve(&st, &vec![0.0; n], &[(0, 1.0), (n - 1, 0.0)], vec![0.0; n], opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.steps(), 2);
    }

    #[test]
    fn converged_start_takes_no_step() {
        let st = stabilizer(Method::Muas, CsrMatrix::from_dense(&[vec![4.0]]), vec![false]);
        let (u, rep) = fixed_point_solve(&st, &[2.0], &[], vec![0.5], FixedPointOptions::new(1e-12, 1)).unwrap();
        assert_eq!(u, vec![0.5]);
        assert_eq!(rep.steps(), 0);
        assert!(rep.converged);
    }

    #[test]
    fn singular_left_operator() {
        let a = CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let st = stabilizer(Method::Kuzmin, a, vec![false; 2]);
        let r = fixed_point_solve(&st, &[1.0, 0.0], &[], vec![0.0; 2], FixedPointOptions::new(1e-10, 2));
        assert!(matches!(r, Err(Error::Factorization(_))), "{r:?}");
    }
}
