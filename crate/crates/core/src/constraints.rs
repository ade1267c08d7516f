//! Elimination of hanging vertices from a system assembled over the
//! non-conforming nodal basis.
//!
//! The pipeline is: [`to_conforming_test`] (add each hanging row to the rows
//! of its constraining vertices, replace it by the constraint), then
//! [`to_conforming_ansatz`] (fold hanging columns onto the constraining
//! columns), then [`reduce_nonhanging`] (drop hanging rows and columns). The
//! limiters are computed on the reduced matrix.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::ConstraintSet;
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, SparseSystem};

type Rows<T> = Vec<BTreeMap<usize, T>>;

fn to_maps<T: Scalar>(m: &CsrMatrix<T>) -> Rows<T> {
    (0..m.nrows()).map(|i| m.row(i).collect()).collect()
}

fn from_maps<T: Scalar>(ncols: usize, rows: Rows<T>) -> CsrMatrix<T> {
    CsrMatrix::from_rows(ncols, rows.into_iter().map(|r| r.into_iter().collect()).collect())
}

fn check_indices<T: Scalar>(n: usize, cs: &ConstraintSet<T>) -> Result<()> {
    for (q, row) in cs.iter() {
        if q >= n {
            return Err(Error::UnknownVertex(q));
        }
        if let Some(&(p, _)) = row.iter().find(|(p, _)| *p >= n) {
            return Err(Error::UnknownVertex(p));
        }
    }
    Ok(())
}

/// Switches to conforming test functions.
///
/// For every hanging `q` and every `p` with `a_qp != 0`, row `p` receives
/// `a_qp` times row `q`; afterwards row `q` is the constraint
/// `u_q - sum_p a_qp u_p = 0`.
pub fn to_conforming_test<T: Scalar>(
    system: &SparseSystem<T>,
    cs: &ConstraintSet<T>,
) -> Result<SparseSystem<T>> {
    let n = system.dim();
    check_indices(n, cs)?;
    if cs.is_empty() {
        return Ok(system.clone());
    }
    let mut rows = to_maps(&system.matrix);
    let mut rhs = system.rhs.clone();
    for (q, constraint) in cs.iter() {
        let row_q: Vec<(usize, T)> = system.matrix.row(q).collect();
        for &(p, a) in constraint {
            if a.is_zero() {
                continue;
            }
            for &(j, v) in &row_q {
                let e = rows[p].entry(j).or_insert_with(T::zero);
                *e = *e + a * v;
            }
            rhs[p] = rhs[p] + a * system.rhs[q];
        }
    }
    for (q, constraint) in cs.iter() {
        let mut row = BTreeMap::new();
        row.insert(q, T::one());
        for &(p, a) in constraint {
            row.insert(p, -a);
        }
        rows[q] = row;
        rhs[q] = T::zero();
    }
    SparseSystem::new(from_maps(n, rows), rhs)
}

/// Switches to conforming ansatz functions.
///
/// Every non-constraint row moves its hanging-column entries onto the
/// constraining columns and keeps an explicit zero in the hanging column.
pub fn to_conforming_ansatz<T: Scalar>(
    system: &SparseSystem<T>,
    cs: &ConstraintSet<T>,
) -> Result<SparseSystem<T>> {
    let n = system.dim();
    check_indices(n, cs)?;
    if cs.is_empty() {
        return Ok(system.clone());
    }
    for (q, constraint) in cs.iter() {
        for (j, v) in system.matrix.row(q) {
            let expected = if j == q {
                T::one()
            } else {
                -cs.coefficient(q, j)
            };
            if v != expected {
                return Err(Error::NotConformingTestForm(q));
            }
        }
        if constraint
            .iter()
            .any(|&(p, a)| !a.is_zero() && !system.matrix.contains(q, p))
        {
            return Err(Error::NotConformingTestForm(q));
        }
    }
    let mut rows = to_maps(&system.matrix);
    for (i, row) in rows.iter_mut().enumerate() {
        if cs.is_constrained(i) {
            continue;
        }
        let hanging: Vec<(usize, T)> = row
            .iter()
            .filter(|(j, _)| cs.is_constrained(**j))
            .map(|(&j, &v)| (j, v))
            .collect();
        for (q, v) in hanging {
            for &(p, a) in cs.row(q).expect("constrained") {
                let e = row.entry(p).or_insert_with(T::zero);
                *e = *e + v * a;
            }
            row.insert(q, T::zero());
        }
    }
    SparseSystem::new(from_maps(n, rows), system.rhs.clone())
}

/// System restricted to the non-hanging vertices.
#[derive(Clone, Debug)]
pub struct ReducedSystem<T> {
    pub system: SparseSystem<T>,
    /// Full vertex index of each reduced row.
    pub to_full: Vec<usize>,
    /// Reduced row of each full vertex, `None` for hanging vertices.
    pub to_reduced: Vec<Option<usize>>,
}

/// Drops hanging rows and columns and symmetrizes the sparsity pattern with
/// explicit zeros, as the limiter sweeps require.
pub fn reduce_nonhanging<T: Scalar>(
    system: &SparseSystem<T>,
    cs: &ConstraintSet<T>,
) -> Result<ReducedSystem<T>> {
    let n = system.dim();
    check_indices(n, cs)?;
    let to_full: Vec<usize> = (0..n).filter(|&i| !cs.is_constrained(i)).collect();
    let mut to_reduced = vec![None; n];
    for (k, &i) in to_full.iter().enumerate() {
        to_reduced[i] = Some(k);
    }
    let matrix = system.matrix.submatrix(&to_full).symmetrize_pattern();
    let rhs = to_full.iter().map(|&i| system.rhs[i]).collect();
    Ok(ReducedSystem {
        system: SparseSystem::new(matrix, rhs)?,
        to_full,
        to_reduced,
    })
}

/// Values at all vertices from values at the non-hanging ones.
pub fn expand_solution<T: Scalar>(
    u_reduced: &[T],
    to_full: &[usize],
    n_full: usize,
    cs: &ConstraintSet<T>,
) -> Result<Vec<T>> {
    if u_reduced.len() != to_full.len() {
        return Err(Error::DimensionMismatch {
            expected: to_full.len(),
            got: u_reduced.len(),
        });
    }
    check_indices(n_full, cs)?;
    let mut u = vec![T::zero(); n_full];
    for (&i, &v) in to_full.iter().zip(u_reduced) {
        u[i] = v;
    }
    for (q, row) in cs.iter() {
        u[q] = row.iter().fold(T::zero(), |acc, &(p, a)| acc + a * u[p]);
    }
    Ok(u)
}
