//! Fast samplet transform and its inverse.
//!
//! Both directions walk the cluster tree once and apply each cluster's
//! orthogonal `Q` (forward: `Q^T`, leaf to root; inverse: `Q`, root to leaf),
//! so the cost is linear in the number of points.

use nalgebra::DMatrix;

use crate::basis::{SampletBasis, DENSE_GUARD};
use crate::error::{Error, Result};

/// Coefficients in the slot order of the basis that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    basis_id: u64,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(basis: &SampletBasis, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::LengthMismatch {
                expected: basis.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            basis_id: basis.id(),
            values,
        })
    }

    pub fn zeros(basis: &SampletBasis) -> Self {
        Self {
            basis_id: basis.id(),
            values: vec![0.0; basis.len()],
        }
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            basis_id: self.basis_id,
            values,
        }
    }

    pub(crate) fn check(&self, basis: &SampletBasis) -> Result<()> {
        if self.basis_id != basis.id() {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }
}

/// `T * values`, with `values` in original point order.
pub fn forward_transform(basis: &SampletBasis, values: &[f64]) -> Result<CoefficientVector> {
    let mut out = vec![0.0; basis.len()];
    forward_transform_into(basis, values, &mut out)?;
    Ok(CoefficientVector {
        basis_id: basis.id(),
        values: out,
    })
}

/// Forward transform writing into a caller-provided buffer.
pub fn forward_transform_into(basis: &SampletBasis, values: &[f64], out: &mut [f64]) -> Result<()> {
    let n = basis.len();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if out.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: out.len(),
        });
    }
    let tree = basis.tree();
    let perm = tree.permutation();
    let (scaling_at, total) = scaling_offsets(basis);
    let mut scaling = vec![0.0; total];
    let mut input = Vec::new();
    let mut result = Vec::new();

    for id in (0..tree.num_clusters()).rev() {
        let cluster = tree.cluster(id);
        let t = basis.transform(id);
        let q = basis.q_matrix(id);
        input.clear();
        match cluster.children {
            None => input.extend(cluster.index_range.clone().map(|k| values[perm[k]])),
            Some(children) => {
                for c in children {
                    let ns = basis.transform(c).n_scaling;
                    input.extend_from_slice(&scaling[scaling_at[c]..scaling_at[c] + ns]);
                }
            }
        }
        result.clear();
        result.extend(
            q.column_iter()
                .map(|col| col.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()),
        );

        let ns = t.n_scaling;
        scaling[scaling_at[id]..scaling_at[id] + ns].copy_from_slice(&result[..ns]);
        let emitted = basis.emitted_columns(id);
        let slots = basis.slots(id);
        out[slots].copy_from_slice(&result[emitted]);
    }
    Ok(())
}

/// `T^T * coeffs`, returned in original point order.
pub fn inverse_transform(basis: &SampletBasis, coeffs: &CoefficientVector) -> Result<Vec<f64>> {
    coeffs.check(basis)?;
    Ok(inverse_raw(basis, &coeffs.values))
}

pub(crate) fn inverse_raw(basis: &SampletBasis, coeffs: &[f64]) -> Vec<f64> {
    let tree = basis.tree();
    let perm = tree.permutation();
    let (scaling_at, total) = scaling_offsets(basis);
    let mut scaling = vec![0.0; total];
    let mut values = vec![0.0; basis.len()];
    let mut local = Vec::new();

    for id in 0..tree.num_clusters() {
        let cluster = tree.cluster(id);
        let t = basis.transform(id);
        let q = basis.q_matrix(id);
        let ns = t.n_scaling;
        let mut gen = vec![0.0; t.q.ncols()];
        if id != 0 {
            gen[..ns].copy_from_slice(&scaling[scaling_at[id]..scaling_at[id] + ns]);
        }
        let emitted = basis.emitted_columns(id);
        gen[emitted].copy_from_slice(&coeffs[basis.slots(id)]);

        local.clear();
        local.resize(t.q.nrows(), 0.0);
        for (j, g) in gen.iter().enumerate() {
            if *g != 0.0 {
                for (l, qv) in local.iter_mut().zip(q.column(j).iter()) {
                    *l += qv * g;
                }
            }
        }
        match cluster.children {
            None => {
                for (k, v) in cluster.index_range.clone().zip(&local) {
                    values[perm[k]] = *v;
                }
            }
            Some(children) => {
                let mut at = 0;
                for c in children {
                    let cs = basis.transform(c).n_scaling;
                    scaling[scaling_at[c]..scaling_at[c] + cs].copy_from_slice(&local[at..at + cs]);
                    at += cs;
                }
            }
        }
    }
    values
}

fn scaling_offsets(basis: &SampletBasis) -> (Vec<usize>, usize) {
    let mut at = 0;
    let offsets = basis
        .transforms()
        .iter()
        .map(|t| {
            let o = at;
            at += t.n_scaling;
            o
        })
        .collect();
    (offsets, at)
}

/// Multiply-add count of one forward or inverse transform.
pub fn transform_flops(basis: &SampletBasis) -> usize {
    basis.transforms().iter().map(|t| t.q.nrows() * t.q.ncols()).sum()
}

/// `T A T^T` computed column- then row-wise with the fast transform.
pub fn transform_matrix_congruence(basis: &SampletBasis, dense: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = basis.len();
    if n > DENSE_GUARD {
        return Err(Error::SizeGuard { n, limit: DENSE_GUARD });
    }
    if dense.shape() != (n, n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: dense.nrows(),
        });
    }
    let apply_columns = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(n, n);
        let mut buf = vec![0.0; n];
        for j in 0..n {
            let col: Vec<f64> = m.column(j).iter().copied().collect();
            forward_transform_into(basis, &col, &mut buf)?;
            out.column_mut(j).copy_from_slice(&buf);
        }
        Ok(out)
    };
    let tk = apply_columns(dense)?;
    let tkt = apply_columns(&tk.transpose())?;
    Ok(tkt.transpose())
}
