//! Samplet compression of kernel matrices.
//!
//! Blocks `Sigma_tau^T K Sigma_tau'` are kept only for cluster pairs that
//! violate the cutoff `dist >= eta * max(diam)`. They are stored as dense
//! panels in samplet coordinates.

mod assembly;
mod chebyshev;
pub mod container;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{SampletBasis, DENSE_GUARD};
use crate::cluster_tree::{build_cluster_tree, cluster_diam, cluster_dist, Cluster, PointCloud};
use crate::error::{Error, Result};
use crate::kernel::{dense_kernel_matrix, KernelSpec};
use crate::moments::default_leaf_size;
use crate::transform::{transform_matrix_congruence, CoefficientVector};

pub use assembly::{block_pattern, compress_assemble, DROP_TOLERANCE};

/// Cutoff test `dist(a, b) >= eta * max(diam(a), diam(b))`.
pub fn is_admissible(a: &Cluster, b: &Cluster, eta: f64) -> bool {
    cluster_dist(a, b) >= eta * cluster_diam(a).max(cluster_diam(b))
}

/// Admissible and strictly separated; only such pairs are treated as far.
pub(crate) fn is_far(a: &Cluster, b: &Cluster, eta: f64) -> bool {
    let dist = cluster_dist(a, b);
    dist > 0.0 && dist >= eta * cluster_diam(a).max(cluster_diam(b))
}

/// Dense panel for one retained cluster pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub row_offset: usize,
    pub col_offset: usize,
    /// Both clusters are leaves, so the block was evaluated exactly.
    pub near: bool,
    pub values: DMatrix<f64>,
}

/// Retained cluster pairs with their near/far tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPattern {
    pub pairs: Vec<(usize, usize, bool)>,
    pub eta: f64,
    pub q: usize,
    pub interp_degree: usize,
}

#[derive(Debug, Clone)]
pub struct CompressedKernelMatrix {
    basis_id: u64,
    n: usize,
    q: usize,
    eta: f64,
    interp_degree: usize,
    blocks: Vec<Block>,
    by_row: Vec<(usize, usize, Vec<usize>)>,
    by_col: Vec<(usize, usize, Vec<usize>)>,
}

fn group(blocks: &[Block], key: impl Fn(&Block) -> (usize, usize)) -> Vec<(usize, usize, Vec<usize>)> {
    let mut map: BTreeMap<usize, (usize, Vec<usize>)> = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        let (offset, len) = key(b);
        map.entry(offset).or_insert((len, Vec::new())).1.push(i);
    }
    map.into_iter().map(|(o, (l, v))| (o, l, v)).collect()
}

impl CompressedKernelMatrix {
    pub(crate) fn from_blocks(basis: &SampletBasis, eta: f64, interp_degree: usize, blocks: Vec<Block>) -> Self {
        Self::from_parts(basis.id(), basis.len(), basis.q(), eta, interp_degree, blocks)
    }

    fn from_parts(basis_id: u64, n: usize, q: usize, eta: f64, interp_degree: usize, mut blocks: Vec<Block>) -> Self {
        blocks.sort_by_key(|b| (b.row, b.col));
        let by_row = group(&blocks, |b| (b.row_offset, b.values.nrows()));
        let by_col = group(&blocks, |b| (b.col_offset, b.values.ncols()));
        Self {
            basis_id,
            n,
            q,
            eta,
            interp_degree,
            blocks,
            by_row,
            by_col,
        }
    }

    /// A matrix with no blocks.
    pub fn zero(basis: &SampletBasis) -> Self {
        Self::from_blocks(basis, f64::INFINITY, 0, Vec::new())
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn interp_degree(&self) -> usize {
        self.interp_degree
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, row: usize, col: usize) -> Option<&Block> {
        self.blocks
            .binary_search_by_key(&(row, col), |b| (b.row, b.col))
            .ok()
            .map(|i| &self.blocks[i])
    }

    pub fn pattern(&self) -> BlockPattern {
        BlockPattern {
            pairs: self.blocks.iter().map(|b| (b.row, b.col, b.near)).collect(),
            eta: self.eta,
            q: self.q,
            interp_degree: self.interp_degree,
        }
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.values.iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// `y = K x` on raw slices in samplet order.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        self.accumulate(&self.by_row, x, y, false);
        Ok(())
    }

    /// `y = K^T x` on raw slices in samplet order.
    pub fn apply_transpose_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        self.accumulate(&self.by_col, x, y, true);
        Ok(())
    }

    fn accumulate(&self, groups: &[(usize, usize, Vec<usize>)], x: &[f64], y: &mut [f64], transpose: bool) {
        let parts: Vec<(usize, Vec<f64>)> = groups
            .par_iter()
            .map(|(offset, len, ids)| {
                let mut acc = vec![0.0; *len];
                for &i in ids {
                    let b = &self.blocks[i];
                    let m = &b.values;
                    if transpose {
                        let src = &x[b.row_offset..b.row_offset + m.nrows()];
                        for (j, a) in acc.iter_mut().enumerate() {
                            *a += m.column(j).iter().zip(src).map(|(p, q)| p * q).sum::<f64>();
                        }
                    } else {
                        let src = &x[b.col_offset..b.col_offset + m.ncols()];
                        for (j, s) in src.iter().enumerate() {
                            if *s != 0.0 {
                                for (a, p) in acc.iter_mut().zip(m.column(j).iter()) {
                                    *a += p * s;
                                }
                            }
                        }
                    }
                }
                (*offset, acc)
            })
            .collect();
        y.fill(0.0);
        for (offset, acc) in parts {
            y[offset..offset + acc.len()].copy_from_slice(&acc);
        }
    }

    /// Dense matrix in samplet coordinates. Test and diagnostics utility.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_GUARD {
            return Err(Error::SizeGuard {
                n: self.n,
                limit: DENSE_GUARD,
            });
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for b in &self.blocks {
            out.view_mut((b.row_offset, b.col_offset), b.values.shape())
                .copy_from(&b.values);
        }
        Ok(out)
    }
}

pub fn compressed_matvec(m: &CompressedKernelMatrix, v: &CoefficientVector) -> Result<CoefficientVector> {
    if v.basis_id() != m.basis_id {
        return Err(Error::BasisMismatch);
    }
    let mut out = vec![0.0; m.n];
    m.apply_into(v.as_slice(), &mut out)?;
    Ok(v.with_values(out))
}

/// Blockwise sum on the union of both patterns.
pub fn add_compressed(a: &CompressedKernelMatrix, b: &CompressedKernelMatrix) -> Result<CompressedKernelMatrix> {
    if a.basis_id != b.basis_id {
        return Err(Error::BasisMismatch);
    }
    let mut merged: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    for blk in a.blocks.iter().chain(&b.blocks) {
        merged
            .entry((blk.row, blk.col))
            .and_modify(|e| {
                e.values += &blk.values;
                e.near &= blk.near;
            })
            .or_insert_with(|| blk.clone());
    }
    let eta = a.eta.min(b.eta);
    Ok(CompressedKernelMatrix::from_parts(
        a.basis_id,
        a.n,
        a.q,
        eta,
        a.interp_degree.max(b.interp_degree),
        merged.into_values().collect(),
    ))
}

/// One row of a compression sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionErrorRow {
    pub q: usize,
    pub n: usize,
    pub nnz: usize,
    /// `nnz / (N log2 N)`.
    pub nnz_per_nlogn: f64,
    pub relative_error: f64,
}

/// Compresses the kernel matrix for each polynomial degree `q` and compares
/// with the dense `T K T^T`.
pub fn compression_error_report(
    cloud: &PointCloud,
    spec: &KernelSpec,
    eta: f64,
    interp_degree: usize,
    qs: &[usize],
) -> Result<Vec<CompressionErrorRow>> {
    let dense = dense_kernel_matrix(spec, cloud)?;
    let n = cloud.len();
    qs.iter()
        .map(|&q| {
            let tree = build_cluster_tree(cloud, default_leaf_size(cloud.dim(), q))?;
            let basis = crate::basis::build_samplet_basis(tree, q);
            let oracle = transform_matrix_congruence(&basis, &dense)?;
            let m = compress_assemble(&basis, spec, eta, interp_degree)?;
            let err = (m.to_dense()? - &oracle).norm() / oracle.norm();
            let nnz = m.nnz();
            Ok(CompressionErrorRow {
                q,
                n,
                nnz,
                nnz_per_nlogn: nnz as f64 / (n as f64 * (n as f64).log2().max(1.0)),
                relative_error: err,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
