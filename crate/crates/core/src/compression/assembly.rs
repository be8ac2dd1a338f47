//! Recursive assembly of the compressed kernel matrix.

use std::borrow::Cow;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DMatrix;

use super::chebyshev::Grid;
use super::{is_far, Block, CompressedKernelMatrix};
use crate::basis::SampletBasis;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Relative entry-level drop tolerance applied to every assembled block.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// A set of functions attached to a cluster: its scaling distributions or
/// the Dirac deltas at the points of a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Node {
    Scaling(usize),
    Points(usize),
}

impl Node {
    fn cluster(self) -> usize {
        match self {
            Node::Scaling(c) | Node::Points(c) => c,
        }
    }
}

struct Assembler<'a> {
    basis: &'a SampletBasis,
    spec: &'a KernelSpec,
    eta: f64,
    grids: Vec<Grid>,
    /// Scaling distributions of each cluster applied to its Lagrange basis.
    moments: Vec<DMatrix<f64>>,
    memo: HashMap<(Node, Node), Rc<DMatrix<f64>>>,
}

/// Cluster pairs `(row, col)` that are not far from each other, restricted
/// to clusters that own coefficients. Far pairs prune whole column subtrees.
pub fn block_pattern(basis: &SampletBasis, eta: f64) -> Vec<(usize, usize)> {
    let tree = basis.tree();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for row in 0..tree.num_clusters() {
        if basis.emitted(row) == 0 {
            continue;
        }
        let rc = tree.cluster(row);
        stack.push(0);
        while let Some(col) = stack.pop() {
            let cc = tree.cluster(col);
            if is_far(rc, cc, eta) {
                continue;
            }
            if basis.emitted(col) > 0 {
                out.push((row, col));
            }
            if let Some([a, b]) = cc.children {
                stack.push(b);
                stack.push(a);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn compress_assemble(
    basis: &SampletBasis,
    spec: &KernelSpec,
    eta: f64,
    interp_degree: usize,
) -> Result<CompressedKernelMatrix> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    spec.check_dim(basis.dim())?;
    let pattern = block_pattern(basis, eta);
    let mut asm = Assembler::new(basis, spec, eta, interp_degree);
    let tree = basis.tree();

    let mut blocks = Vec::with_capacity(pattern.len());
    for &(row, col) in &pattern {
        if row > col {
            continue;
        }
        let values = drop_small(asm.block(row, col));
        let near = tree.cluster(row).is_leaf() && tree.cluster(col).is_leaf();
        if row != col {
            blocks.push(Block {
                row: col,
                col: row,
                row_offset: basis.slots(col).start,
                col_offset: basis.slots(row).start,
                near,
                values: values.transpose(),
            });
        }
        blocks.push(Block {
            row,
            col,
            row_offset: basis.slots(row).start,
            col_offset: basis.slots(col).start,
            near,
            values,
        });
    }
    log::debug!(
        "assembled {} blocks, {} memoized interactions",
        blocks.len(),
        asm.memo.len()
    );
    Ok(CompressedKernelMatrix::from_blocks(basis, eta, interp_degree, blocks))
}

fn drop_small(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let cut = DROP_TOLERANCE * m.norm();
    for v in m.iter_mut() {
        if v.abs() < cut {
            *v = 0.0;
        }
    }
    m
}

fn vstack(parts: &[Rc<DMatrix<f64>>]) -> DMatrix<f64> {
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, parts[0].ncols());
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.nrows()).copy_from(&**p);
        at += p.nrows();
    }
    out
}

fn hstack(parts: &[Rc<DMatrix<f64>>]) -> DMatrix<f64> {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(parts[0].nrows(), cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(&**p);
        at += p.ncols();
    }
    out
}

impl<'a> Assembler<'a> {
    fn new(basis: &'a SampletBasis, spec: &'a KernelSpec, eta: f64, degree: usize) -> Self {
        let tree = basis.tree();
        let grids: Vec<Grid> = tree.clusters().iter().map(|c| Grid::new(&c.bbox, degree)).collect();
        let mut moments = vec![DMatrix::zeros(0, 0); tree.num_clusters()];
        for id in (0..tree.num_clusters()).rev() {
            let cluster = tree.cluster(id);
            let inputs = match cluster.children {
                None => grids[id].lagrange_matrix(cluster.index_range.clone().map(|k| tree.sorted_point(k))),
                Some(children) => {
                    let parts: Vec<Rc<DMatrix<f64>>> = children
                        .iter()
                        .map(|&c| Rc::new(&moments[c] * grids[id].transfer_from(&grids[c])))
                        .collect();
                    vstack(&parts)
                }
            };
            moments[id] = basis.transform(id).q_phi().transpose() * inputs;
        }
        Self {
            basis,
            spec,
            eta,
            grids,
            moments,
            memo: HashMap::new(),
        }
    }

    fn level(&self, n: Node) -> usize {
        match n {
            Node::Scaling(c) => 2 * self.basis.tree().cluster(c).level,
            Node::Points(c) => 2 * self.basis.tree().cluster(c).level + 1,
        }
    }

    fn children(&self, n: Node) -> Vec<Node> {
        match n {
            Node::Scaling(c) => match self.basis.tree().cluster(c).children {
                None => vec![Node::Points(c)],
                Some([a, b]) => vec![Node::Scaling(a), Node::Scaling(b)],
            },
            Node::Points(_) => unreachable!("point sets are not refined"),
        }
    }

    fn inputs(&self, cluster: usize) -> Vec<Node> {
        self.children(Node::Scaling(cluster))
    }

    /// Samplet block `Sigma_row^T K Sigma_col`.
    fn block(&mut self, row: usize, col: usize) -> DMatrix<f64> {
        let rows: Vec<Rc<DMatrix<f64>>> = self
            .inputs(row)
            .into_iter()
            .map(|a| {
                let parts: Vec<_> = self.inputs(col).into_iter().map(|b| self.interact(a, b)).collect();
                Rc::new(hstack(&parts))
            })
            .collect();
        let g = vstack(&rows);
        let qr = &self.basis.transform(row).q;
        let qc = &self.basis.transform(col).q;
        let er = self.basis.emitted_columns(row);
        let ec = self.basis.emitted_columns(col);
        qr.columns(er.start, er.len()).transpose() * g * qc.columns(ec.start, ec.len())
    }

    /// Gram matrix `<f_i, K g_j>` of the function sets of two nodes.
    fn interact(&mut self, a: Node, b: Node) -> Rc<DMatrix<f64>> {
        if a > b {
            return Rc::new(self.interact(b, a).transpose());
        }
        if let Some(m) = self.memo.get(&(a, b)) {
            return Rc::clone(m);
        }
        let m = Rc::new(self.compute(a, b));
        self.memo.insert((a, b), Rc::clone(&m));
        m
    }

    fn compute(&mut self, a: Node, b: Node) -> DMatrix<f64> {
        let tree = self.basis.tree();
        let (ca, cb) = (a.cluster(), b.cluster());
        if is_far(tree.cluster(ca), tree.cluster(cb), self.eta) {
            return self.far_field(a, b);
        }
        let expand_a = match (a, b) {
            (Node::Points(_), Node::Points(_)) => return self.exact(ca, cb),
            (Node::Scaling(_), Node::Points(_)) => true,
            (Node::Points(_), Node::Scaling(_)) => false,
            _ => self.level(a) <= self.level(b),
        };
        if expand_a {
            let parts: Vec<_> = self.children(a).into_iter().map(|x| self.interact(x, b)).collect();
            self.basis.transform(ca).q_phi().transpose() * vstack(&parts)
        } else {
            let parts: Vec<_> = self.children(b).into_iter().map(|y| self.interact(a, y)).collect();
            hstack(&parts) * self.basis.transform(cb).q_phi()
        }
    }

    fn exact(&self, ca: usize, cb: usize) -> DMatrix<f64> {
        let tree = self.basis.tree();
        let ra = tree.cluster(ca).index_range.clone();
        let rb = tree.cluster(cb).index_range.clone();
        DMatrix::from_fn(ra.len(), rb.len(), |i, j| {
            self.spec
                .eval(tree.sorted_point(ra.start + i), tree.sorted_point(rb.start + j))
        })
    }

    fn far_field(&self, a: Node, b: Node) -> DMatrix<f64> {
        let (ga, gb) = (&self.grids[a.cluster()], &self.grids[b.cluster()]);
        let k = DMatrix::from_fn(ga.len(), gb.len(), |s, t| self.spec.eval(ga.point(s), gb.point(t)));
        &*self.factor(a) * k * self.factor(b).transpose()
    }

    fn factor(&self, n: Node) -> Cow<'_, DMatrix<f64>> {
        match n {
            Node::Scaling(c) => Cow::Borrowed(&self.moments[c]),
            Node::Points(c) => {
                let tree = self.basis.tree();
                Cow::Owned(
                    self.grids[c].lagrange_matrix(tree.cluster(c).index_range.clone().map(|k| tree.sorted_point(k))),
                )
            }
        }
    }
}
