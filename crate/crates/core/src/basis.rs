//! Orthonormal samplet bases with vanishing moments.
//!
//! Every cluster owns an orthogonal matrix `Q` obtained from the QR
//! factorization of the transposed moment matrix of its input distributions
//! (the Diracs of a leaf, or the scaling distributions of both children).
//! The first `min(m_q, n)` columns of `Q` define the cluster's scaling
//! distributions, the remaining columns its samplets.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DMatrixView};

use crate::cluster_tree::ClusterTree;
use crate::error::{Error, Result};
use crate::linalg::householder_qr;
use crate::moments::{num_monomials, LocalFrame, MonomialSet};

/// Largest `N` for which dense `N x N` helpers are allowed.
pub const DENSE_GUARD: usize = 8192;

static NEXT_BASIS_ID: AtomicU64 = AtomicU64::new(1);

/// Moments of a set of distributions: rows are monomials in graded order,
/// columns are distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub entries: DMatrix<f64>,
    pub degree: usize,
}

impl MomentMatrix {
    /// Moments of the Diracs at `points`, evaluated in `frame` coordinates.
    pub fn of_points<'a>(
        points: impl ExactSizeIterator<Item = &'a [f64]>,
        monomials: &MonomialSet,
        frame: &LocalFrame,
    ) -> Self {
        let n = points.len();
        let mut entries = DMatrix::zeros(monomials.len(), n);
        let mut buf = vec![0.0; monomials.len()];
        for (k, p) in points.enumerate() {
            monomials.evaluate_into(&frame.local(p), &mut buf);
            entries.column_mut(k).copy_from_slice(&buf);
        }
        Self {
            entries,
            degree: monomials.degree(),
        }
    }

    /// Moments of an interior cluster's inputs, assembled from the children's
    /// scaling moments. Each child contributes `change * child_moments`, the
    /// child moments re-expressed in the parent frame.
    pub fn from_children(parts: &[(DMatrix<f64>, DMatrixView<'_, f64>)], degree: usize) -> Self {
        let rows = parts.first().map_or(0, |(a, _)| a.nrows());
        let cols = parts.iter().map(|(_, m)| m.ncols()).sum();
        let mut entries = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for (change, child) in parts {
            let block = change * child;
            entries.columns_mut(at, block.ncols()).copy_from(&block);
            at += block.ncols();
        }
        Self { entries, degree }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// Two-scale transform of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTransform {
    /// `n x n` orthogonal, `[Q_phi, Q_sigma]`.
    pub q: DMatrix<f64>,
    pub n_scaling: usize,
    /// Moments of the generated distributions, `R^T` (lower triangular).
    pub moments: DMatrix<f64>,
}

impl ClusterTransform {
    pub fn n_inputs(&self) -> usize {
        self.q.nrows()
    }

    pub fn n_samplets(&self) -> usize {
        self.q.ncols() - self.n_scaling
    }

    pub fn q_phi(&self) -> DMatrixView<'_, f64> {
        self.q.columns(0, self.n_scaling)
    }

    pub fn q_sigma(&self) -> DMatrixView<'_, f64> {
        self.q.columns(self.n_scaling, self.n_samplets())
    }

    pub fn scaling_moments(&self) -> DMatrixView<'_, f64> {
        self.moments.columns(0, self.n_scaling)
    }
}

/// QR-based two-scale transform: `M^T = Q R`, with the first
/// `min(max_scaling, n)` columns of `Q` kept as scaling distributions.
pub fn cluster_transform(m: &MomentMatrix, max_scaling: usize) -> ClusterTransform {
    let (q, r) = householder_qr(&m.entries.transpose());
    let n = q.nrows();
    ClusterTransform {
        q,
        n_scaling: max_scaling.min(n),
        moments: r.transpose(),
    }
}

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisOptions {
    /// Samplets annihilate all polynomials of total degree `<= q`.
    pub q: usize,
    /// Number of moment rows carried is `m_{q_hat}`; samplets beyond the
    /// first ones gain additional vanishing moments up to degree `q_hat`.
    pub q_hat: Option<usize>,
}

impl BasisOptions {
    pub fn new(q: usize) -> Self {
        Self { q, q_hat: None }
    }
}

/// A samplet basis: one `ClusterTransform` per cluster plus the coefficient
/// layout. Slots are ordered root scaling distributions first, then each
/// cluster's samplets in depth-first pre-order (QR column order inside a
/// cluster).
#[derive(Debug, Clone)]
pub struct SampletBasis {
    id: u64,
    tree: ClusterTree,
    q: usize,
    q_hat: usize,
    transforms: Vec<ClusterTransform>,
    frames: Vec<LocalFrame>,
    offsets: Vec<usize>,
    emitted: Vec<usize>,
    /// All `Q` matrices, column-major, packed in bottom-up traversal order.
    packed: Vec<f64>,
    packed_at: Vec<usize>,
}

pub fn build_samplet_basis(tree: ClusterTree, q: usize) -> SampletBasis {
    build_samplet_basis_with(tree, BasisOptions::new(q))
}

pub fn build_samplet_basis_with(tree: ClusterTree, opts: BasisOptions) -> SampletBasis {
    let dim = tree.dim();
    let q_hat = opts.q_hat.unwrap_or(opts.q).max(opts.q);
    let monomials = MonomialSet::new(dim, q_hat);
    let m_q = num_monomials(dim, opts.q);
    let nc = tree.num_clusters();

    let frames: Vec<LocalFrame> = tree.clusters().iter().map(|c| LocalFrame::of_box(&c.bbox)).collect();
    let mut transforms: Vec<Option<ClusterTransform>> = vec![None; nc];

    // Pre-order ids: children always come after their parent.
    for id in (0..nc).rev() {
        let cluster = tree.cluster(id);
        let moments = match cluster.children {
            None => MomentMatrix::of_points(
                cluster.index_range.clone().map(|k| tree.sorted_point(k)),
                &monomials,
                &frames[id],
            ),
            Some(children) => {
                let parts: Vec<_> = children
                    .iter()
                    .map(|&c| {
                        let t = transforms[c].as_ref().expect("child built first");
                        (monomials.change_of_frame(&frames[c], &frames[id]), t.scaling_moments())
                    })
                    .collect();
                MomentMatrix::from_children(&parts, q_hat)
            }
        };
        transforms[id] = Some(cluster_transform(&moments, m_q));
    }
    let transforms: Vec<ClusterTransform> = transforms.into_iter().map(Option::unwrap).collect();

    let mut offsets = Vec::with_capacity(nc);
    let mut emitted = Vec::with_capacity(nc);
    let mut at = 0;
    for (id, t) in transforms.iter().enumerate() {
        let count = if id == 0 { t.q.ncols() } else { t.n_samplets() };
        offsets.push(at);
        emitted.push(count);
        at += count;
    }
    debug_assert_eq!(at, tree.len());

    let mut packed_at = vec![0; nc];
    let mut packed = Vec::with_capacity(transforms.iter().map(|t| t.q.len()).sum());
    for id in (0..nc).rev() {
        packed_at[id] = packed.len();
        packed.extend_from_slice(transforms[id].q.as_slice());
    }

    SampletBasis {
        id: NEXT_BASIS_ID.fetch_add(1, Ordering::Relaxed),
        tree,
        q: opts.q,
        q_hat,
        transforms,
        frames,
        offsets,
        emitted,
        packed,
        packed_at,
    }
}

impl SampletBasis {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn q_hat(&self) -> usize {
        self.q_hat
    }

    pub fn transform(&self, cluster: usize) -> &ClusterTransform {
        &self.transforms[cluster]
    }

    /// `Q` of a cluster as a view into contiguous storage.
    pub fn q_matrix(&self, cluster: usize) -> DMatrixView<'_, f64> {
        let t = &self.transforms[cluster];
        let (r, c) = t.q.shape();
        let at = self.packed_at[cluster];
        DMatrixView::from_slice(&self.packed[at..at + r * c], r, c)
    }

    pub fn transforms(&self) -> &[ClusterTransform] {
        &self.transforms
    }

    pub fn frame(&self, cluster: usize) -> &LocalFrame {
        &self.frames[cluster]
    }

    /// Number of root scaling distributions kept in the basis.
    pub fn num_root_scaling(&self) -> usize {
        self.transforms[0].n_scaling
    }

    pub fn num_samplets(&self) -> usize {
        self.len() - self.num_root_scaling()
    }

    /// Coefficient slots owned by a cluster (for the root: scaling
    /// distributions followed by samplets).
    pub fn slots(&self, cluster: usize) -> Range<usize> {
        self.offsets[cluster]..self.offsets[cluster] + self.emitted[cluster]
    }

    /// Number of coefficients a cluster emits.
    pub fn emitted(&self, cluster: usize) -> usize {
        self.emitted[cluster]
    }

    /// Columns of the cluster's `Q` that are emitted as coefficients.
    pub(crate) fn emitted_columns(&self, cluster: usize) -> Range<usize> {
        let t = &self.transforms[cluster];
        if cluster == 0 {
            0..t.q.ncols()
        } else {
            t.n_scaling..t.q.ncols()
        }
    }

    /// Owning cluster of every coefficient slot.
    pub fn slot_clusters(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for c in 0..self.transforms.len() {
            for s in self.slots(c) {
                out[s] = c;
            }
        }
        out
    }

    /// Whether a slot holds a root scaling coefficient.
    pub fn is_scaling_slot(&self, slot: usize) -> bool {
        slot < self.num_root_scaling()
    }

    /// Dense `T` (rows: basis elements in slot order, columns: original
    /// point order). Test and diagnostics utility.
    pub fn assemble_dense_transform(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n > DENSE_GUARD {
            return Err(Error::SizeGuard { n, limit: DENSE_GUARD });
        }
        let mut t = DMatrix::zeros(n, n);
        let mut coeffs = vec![0.0; n];
        for slot in 0..n {
            coeffs[slot] = 1.0;
            // Row `slot` of T is T^T e_slot.
            let row = crate::transform::inverse_raw(self, &coeffs);
            coeffs[slot] = 0.0;
            for (i, v) in row.into_iter().enumerate() {
                t[(slot, i)] = v;
            }
        }
        Ok(t)
    }
}
