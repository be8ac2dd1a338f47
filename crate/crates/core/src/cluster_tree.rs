//! Cardinality-balanced binary cluster trees over scattered data sites.
//!
//! Clusters are stored in depth-first pre-order, so the root is cluster 0
//! and every child has a larger id than its parent.

use std::ops::Range;

use crate::error::{Error, Result};

/// Subtrees larger than this are built on separate rayon tasks.
const PARALLEL_SPLIT: usize = 1 << 13;

/// Data sites in `R^d` with optional data values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    values: Option<Vec<f64>>,
}

impl PointCloud {
    /// Creates a cloud from row-major coordinates (`N * dim` entries).
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite coordinate at point {}",
                pos / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            values: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if let Some(i) = points.iter().position(|p| p.len() != dim) {
            return Err(Error::InvalidCloud(format!(
                "point {i} has {} coordinates, expected {dim}",
                points[i].len()
            )));
        }
        Self::new(dim, points.concat())
    }

    /// Attaches data values, one per site.
    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud(format!("non-finite value at point {i}")));
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(self.iter())
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Self {
        debug_assert_eq!(min.len(), max.len());
        Self { min, max }
    }

    pub fn of_points<'a>(mut points: impl Iterator<Item = &'a [f64]>) -> Self {
        let first = points.next().expect("bounding box of an empty point set");
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for p in points {
            for (a, &x) in p.iter().enumerate() {
                min[a] = min[a].min(x);
                max[a] = max[a].max(x);
            }
        }
        Self { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    /// Length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|a| self.extent(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Longest edge; ties go to the lowest axis index.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for a in 1..self.dim() {
            if self.extent(a) > self.extent(best) {
                best = a;
            }
        }
        best
    }

    /// Euclidean distance between two boxes, zero when they intersect.
    pub fn distance(&self, other: &BoundingBox) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        (0..self.dim())
            .map(|a| {
                let gap = (other.min[a] - self.max[a]).max(self.min[a] - other.max[a]);
                gap.max(0.0).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(a, &x)| self.min[a] <= x && x <= self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Range into the tree-ordered permutation.
    pub index_range: Range<usize>,
    pub level: usize,
    pub bbox: BoundingBox,
    pub children: Option<[usize; 2]>,
    pub parent: Option<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.index_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_range.is_empty()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Bounding-box diagonal of a cluster.
pub fn cluster_diam(c: &Cluster) -> f64 {
    c.bbox.diagonal()
}

/// Distance between the bounding boxes of two clusters.
pub fn cluster_dist(a: &Cluster, b: &Cluster) -> f64 {
    a.bbox.distance(&b.bbox)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    dim: usize,
    clusters: Vec<Cluster>,
    /// `permutation[k]` is the original index of the k-th point in tree order.
    permutation: Vec<usize>,
    inverse: Vec<usize>,
    /// Coordinates in tree order, row-major.
    sorted_coords: Vec<f64>,
    depth: usize,
    leaf_size: usize,
}

/// Builds a cardinality-balanced binary cluster tree.
///
/// Each cluster is split along the longest edge of its bounding box at the
/// coordinate median; the left child receives `ceil(n/2)` points. Recursion
/// stops once a cluster holds at most `leaf_size` points.
pub fn build_cluster_tree(cloud: &PointCloud, leaf_size: usize) -> Result<ClusterTree> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if leaf_size == 0 {
        return Err(Error::InvalidParameter("leaf_size must be at least 1".into()));
    }
    let dim = cloud.dim();
    let mut perm: Vec<usize> = (0..cloud.len()).collect();
    let ctx = BuildContext {
        coords: cloud.coords(),
        dim,
        leaf_size,
    };
    let clusters = ctx.build(&mut perm, 0, 0);

    let depth = clusters.iter().map(|c| c.level).max().unwrap_or(0);
    let mut inverse = vec![0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        inverse[i] = k;
    }
    let sorted_coords = perm.iter().flat_map(|&i| cloud.point(i).iter().copied()).collect();
    Ok(ClusterTree {
        dim,
        clusters,
        permutation: perm,
        inverse,
        sorted_coords,
        depth,
        leaf_size,
    })
}

struct BuildContext<'a> {
    coords: &'a [f64],
    dim: usize,
    leaf_size: usize,
}

impl BuildContext<'_> {
    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Builds the subtree over `idx`, returning clusters with ids local to
    /// the subtree (its root is 0).
    fn build(&self, idx: &mut [usize], offset: usize, level: usize) -> Vec<Cluster> {
        let n = idx.len();
        let bbox = BoundingBox::of_points(idx.iter().map(|&i| self.point(i)));
        let mut root = Cluster {
            index_range: offset..offset + n,
            level,
            bbox,
            children: None,
            parent: None,
        };
        if n <= self.leaf_size || n < 2 {
            return vec![root];
        }

        let axis = root.bbox.longest_axis();
        let n_left = n.div_ceil(2);
        idx.select_nth_unstable_by(n_left - 1, |&a, &b| {
            self.point(a)[axis].total_cmp(&self.point(b)[axis]).then(a.cmp(&b))
        });
        let (left_idx, right_idx) = idx.split_at_mut(n_left);

        let (left, right) = if n > PARALLEL_SPLIT {
            rayon::join(
                || self.build(left_idx, offset, level + 1),
                || self.build(right_idx, offset + n_left, level + 1),
            )
        } else {
            (
                self.build(left_idx, offset, level + 1),
                self.build(right_idx, offset + n_left, level + 1),
            )
        };

        let left_root = 1;
        let right_root = 1 + left.len();
        root.children = Some([left_root, right_root]);
        let mut out = Vec::with_capacity(1 + left.len() + right.len());
        out.push(root);
        for (shift, sub) in [(left_root, left), (right_root, right)] {
            for mut c in sub {
                c.parent = Some(c.parent.map_or(0, |p| p + shift));
                if let Some([a, b]) = c.children {
                    c.children = Some([a + shift, b + shift]);
                }
                out.push(c);
            }
        }
        out
    }
}

impl ClusterTree {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn root(&self) -> &Cluster {
        &self.clusters[0]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Maps an original point index to its position in tree order.
    pub fn tree_position(&self, original: usize) -> usize {
        self.inverse[original]
    }

    /// Coordinates of the k-th point in tree order.
    pub fn sorted_point(&self, k: usize) -> &[f64] {
        &self.sorted_coords[k * self.dim..(k + 1) * self.dim]
    }

    /// Original point indices belonging to a cluster.
    pub fn cluster_indices(&self, id: usize) -> &[usize] {
        &self.permutation[self.clusters[id].index_range.clone()]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.clusters.len()).filter(|&i| self.clusters[i].is_leaf())
    }

    /// Reorders a vector given in original point order into tree order.
    pub fn to_tree_order(&self, values: &[f64]) -> Vec<f64> {
        self.permutation.iter().map(|&i| values[i]).collect()
    }

    /// Reorders a vector given in tree order into original point order.
    pub fn to_original_order(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (k, &i) in self.permutation.iter().enumerate() {
            out[i] = values[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        PointCloud::new(dim, coords).unwrap()
    }

    #[test]
    fn four_points_split_at_median() {
        let cloud = PointCloud::new(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let tree = build_cluster_tree(&cloud, 2).unwrap();
        let [l, r] = tree.root().children.unwrap();
        let mut left = tree.cluster_indices(l).to_vec();
        let mut right = tree.cluster_indices(r).to_vec();
        left.sort();
        right.sort();
        assert_eq!(left, vec![0, 1]);
        assert_eq!(right, vec![2, 3]);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn single_point_is_a_leaf() {
        let cloud = PointCloud::new(3, vec![0.5, 0.5, 0.5]).unwrap();
        for leaf_size in [1, 2, 10] {
            let tree = build_cluster_tree(&cloud, leaf_size).unwrap();
            assert_eq!(tree.num_clusters(), 1);
            assert!(tree.root().is_leaf());
            assert_eq!(tree.depth(), 0);
        }
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(matches!(PointCloud::new(2, vec![]), Err(Error::EmptyInput)));
        assert!(matches!(PointCloud::from_points(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn sixty_four_points_exact_halving() {
        let cloud = random_cloud(64, 2, 1);
        let tree = build_cluster_tree(&cloud, 4).unwrap();
        assert_eq!(tree.depth(), 4);
        for c in tree.clusters() {
            assert_eq!(c.len(), 64 >> c.level);
        }
    }

    #[test]
    fn diam_and_dist_examples() {
        let mk = |min: Vec<f64>, max: Vec<f64>| Cluster {
            index_range: 0..1,
            level: 0,
            bbox: BoundingBox::new(min, max),
            children: None,
            parent: None,
        };
        assert_eq!(cluster_diam(&mk(vec![0.2], vec![0.2])), 0.0);
        assert_eq!(cluster_diam(&mk(vec![0.0, 0.0], vec![3.0, 4.0])), 5.0);
        assert_eq!(cluster_diam(&mk(vec![-1.0], vec![1.0])), 2.0);

        let a = mk(vec![0.0], vec![1.0]);
        assert_eq!(cluster_dist(&a, &a), 0.0);
        assert_eq!(cluster_dist(&a, &mk(vec![3.0], vec![4.0])), 2.0);
        let sq = mk(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(cluster_dist(&sq, &mk(vec![2.0, 0.0], vec![3.0, 1.0])), 1.0);
    }

    #[test]
    fn all_points_equal_still_split() {
        let cloud = PointCloud::new(2, vec![1.0; 2 * 10]).unwrap();
        let tree = build_cluster_tree(&cloud, 2).unwrap();
        let [l, r] = tree.root().children.unwrap();
        assert_eq!(tree.cluster(l).len(), 5);
        assert_eq!(tree.cluster(r).len(), 5);
        assert_eq!(cluster_diam(tree.root()), 0.0);
    }

    #[test]
    fn longest_axis_tie_goes_to_lowest() {
        let b = BoundingBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 2.0]);
        assert_eq!(b.longest_axis(), 1);
    }

    #[test]
    fn parallel_and_sequential_builds_agree() {
        // Large enough to take the rayon::join path.
        let cloud = random_cloud(3 * PARALLEL_SPLIT, 2, 7);
        let a = build_cluster_tree(&cloud, 8).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| build_cluster_tree(&cloud, 8).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn invariants_on_random_clouds() {
        for (n, dim, leaf) in [(1000, 2, 7), (257, 3, 1), (99, 1, 4)] {
            let cloud = random_cloud(n, dim, n as u64);
            let tree = build_cluster_tree(&cloud, leaf).unwrap();
            let mut seen: Vec<usize> = tree.leaves().flat_map(|l| tree.cluster_indices(l).to_vec()).collect();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());

            for (id, c) in tree.clusters().iter().enumerate() {
                for &i in tree.cluster_indices(id) {
                    assert!(c.bbox.contains(cloud.point(i)));
                }
                match c.children {
                    Some([a, b]) => {
                        assert!(c.len() > leaf);
                        let (ca, cb) = (tree.cluster(a), tree.cluster(b));
                        assert_eq!(ca.level, c.level + 1);
                        assert_eq!(ca.parent, Some(id));
                        assert_eq!(ca.index_range.start, c.index_range.start);
                        assert_eq!(ca.index_range.end, cb.index_range.start);
                        assert_eq!(cb.index_range.end, c.index_range.end);
                        assert_eq!(ca.len(), c.len().div_ceil(2));
                        assert!(cluster_diam(ca) <= cluster_diam(c));
                        assert!(cluster_diam(cb) <= cluster_diam(c));
                    }
                    None => assert!(c.len() <= leaf || c.len() == 1),
                }
            }
        }
    }
}
