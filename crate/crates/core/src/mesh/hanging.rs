use std::collections::BTreeMap;

use super::{inside_segment, Triangulation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficients `a_qp` expressing the value at each hanging vertex `q` as a
/// combination of values at non-hanging vertices `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet<T> {
    rows: BTreeMap<usize, Vec<(usize, T)>>,
}

impl<T: Scalar> Default for ConstraintSet<T> {
    fn default() -> Self {
        Self {
            rows: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ConstraintSet<T> {
    /// Rows must reference non-hanging vertices only.
    pub fn from_rows(rows: impl IntoIterator<Item = (usize, Vec<(usize, T)>)>) -> Self {
        let rows = rows
            .into_iter()
            .map(|(q, mut row)| {
                row.sort_by_key(|&(p, _)| p);
                (q, row)
            })
            .collect();
        Self { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_constrained(&self, v: usize) -> bool {
        self.rows.contains_key(&v)
    }

    pub fn row(&self, q: usize) -> Option<&[(usize, T)]> {
        self.rows.get(&q).map(Vec::as_slice)
    }

    /// Coefficient `a_qp` (zero when absent).
    pub fn coefficient(&self, q: usize, p: usize) -> T {
        self.rows
            .get(&q)
            .and_then(|r| r.iter().find(|&&(pp, _)| pp == p))
            .map_or(T::zero(), |&(_, a)| a)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[(usize, T)])> {
        self.rows.iter().map(|(&q, r)| (q, r.as_slice()))
    }

    pub fn hanging_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }
}

/// Constraint coefficients of all hanging vertices of `mesh`.
///
/// A hanging vertex at parameter `t` of its carrier edge `ab` satisfies
/// `v(q) = (1 - t) v(a) + t v(b)`; midpoints give exactly `1/2`. When a
/// carrier endpoint hangs itself, its own row is substituted, so every row
/// refers to non-hanging vertices only and still sums to one.
pub fn hanging_constraints<T: Scalar>(mesh: &Triangulation) -> Result<ConstraintSet<T>> {
    let mut resolved: BTreeMap<usize, Vec<(usize, T)>> = BTreeMap::new();
    for &q in &mesh.hanging {
        let row = resolve(mesh, q, &mut resolved, 0)?;
        resolved.insert(q, row);
    }
    Ok(ConstraintSet { rows: resolved })
}

fn resolve<T: Scalar>(
    mesh: &Triangulation,
    v: usize,
    memo: &mut BTreeMap<usize, Vec<(usize, T)>>,
    depth: usize,
) -> Result<Vec<(usize, T)>> {
    if let Some(row) = memo.get(&v) {
        return Ok(row.clone());
    }
    let Some(&[a, b]) = mesh.carriers.get(&v) else {
        if v >= mesh.num_vertices() {
            return Err(Error::UnknownVertex(v));
        }
        return Ok(vec![(v, T::one())]);
    };
    if depth > mesh.num_vertices() {
        return Err(Error::UnsupportedNesting(v));
    }
    let t = inside_segment(mesh.coords(a), mesh.coords(b), mesh.coords(v))
        .ok_or(Error::UnsupportedNesting(v))?;
    let (wa, wb) = if (t - 0.5).abs() < 1e-12 {
        (T::half(), T::half())
    } else {
        let tb = T::from_f64(t).ok_or(Error::UnsupportedNesting(v))?;
        (T::one() - tb, tb)
    };
    let mut acc: BTreeMap<usize, T> = BTreeMap::new();
    for (end, w) in [(a, wa), (b, wb)] {
        for (p, c) in resolve(mesh, end, memo, depth + 1)? {
            let e = acc.entry(p).or_insert_with(T::zero);
            *e = *e + w * c;
        }
    }
    let row: Vec<(usize, T)> = acc.into_iter().collect();
    memo.insert(v, row.clone());
    Ok(row)
}
