//! Hard-thresholding compression, energy-based tree coarsening and
//! entropy-driven adaptive subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::SampletBasis;
use crate::cluster_tree::ClusterTree;
use crate::error::{Error, Result};
use crate::transform::{forward_transform, inverse_transform, CoefficientVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdStats {
    pub survivors: usize,
    pub total: usize,
    /// Fraction of coefficients set to zero.
    pub saving: f64,
}

/// Zeroes every coefficient with `|c| < w`.
pub fn hard_threshold(coeffs: &CoefficientVector, w: f64) -> (CoefficientVector, ThresholdStats) {
    let values: Vec<f64> = coeffs
        .as_slice()
        .iter()
        .map(|&c| if c.abs() >= w { c } else { 0.0 })
        .collect();
    let survivors = values.iter().filter(|v| **v != 0.0).count();
    let total = values.len();
    let stats = ThresholdStats {
        survivors,
        total,
        saving: 1.0 - survivors as f64 / total as f64,
    };
    (coeffs.with_values(values), stats)
}

/// One row of a thresholding sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionRow {
    /// Relative threshold; the absolute threshold is `relative * |f|_2`.
    pub relative_threshold: f64,
    pub threshold: f64,
    pub nnz: usize,
    pub saving: f64,
    /// `|f - T^T HT_w(T f)|_2 / |f|_2`, from an actual reconstruction.
    pub relative_error: f64,
    /// `|dropped coefficients|_2 / |f|_2`.
    pub dropped_ratio: f64,
}

pub fn compression_report(
    basis: &SampletBasis,
    values: &[f64],
    relative_thresholds: &[f64],
) -> Result<Vec<CompressionRow>> {
    let coeffs = forward_transform(basis, values)?;
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = if norm > 0.0 { norm } else { 1.0 };
    relative_thresholds
        .iter()
        .map(|&rel| {
            let w = rel * norm;
            let (kept, stats) = hard_threshold(&coeffs, w);
            let rec = inverse_transform(basis, &kept)?;
            let err = rec.iter().zip(values).map(|(r, v)| (r - v).powi(2)).sum::<f64>().sqrt();
            let dropped = coeffs
                .as_slice()
                .iter()
                .zip(kept.as_slice())
                .map(|(c, k)| (c - k).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(CompressionRow {
                relative_threshold: rel,
                threshold: w,
                nnz: stats.survivors,
                saving: stats.saving,
                relative_error: err / denom,
                dropped_ratio: dropped / denom,
            })
        })
        .collect()
}

/// Per-cluster energies `e` and modified energies `e~`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTree {
    pub energy: Vec<f64>,
    pub modified: Vec<f64>,
}

/// Energies of all clusters: own coefficients squared plus the children's
/// energies (the root also counts its scaling coefficients), then modified
/// energies top-down.
pub fn energies(basis: &SampletBasis, coeffs: &CoefficientVector) -> Result<EnergyTree> {
    coeffs.check(basis)?;
    let tree = basis.tree();
    let nc = tree.num_clusters();
    let c = coeffs.as_slice();
    let mut energy = vec![0.0; nc];
    for id in (0..nc).rev() {
        let own: f64 = c[basis.slots(id)].iter().map(|v| v * v).sum();
        let below: f64 = tree
            .cluster(id)
            .children
            .map_or(0.0, |ch| ch.iter().map(|&k| energy[k]).sum());
        energy[id] = own + below;
    }

    let mut modified = vec![0.0; nc];
    modified[0] = energy[0];
    for id in 0..nc {
        if let Some(ch) = tree.cluster(id).children {
            let child_sum: f64 = ch.iter().map(|&k| energy[k]).sum();
            let denom = energy[id] + modified[id];
            let q = if denom > 0.0 {
                child_sum / denom * modified[id]
            } else {
                0.0
            };
            for k in ch {
                modified[k] = q;
            }
        }
    }
    Ok(EnergyTree { energy, modified })
}

/// A subtree of the cluster tree, closed under parents and siblings.
#[derive(Debug, Clone)]
pub struct CoarsenedTree<'a> {
    tree: &'a ClusterTree,
    included: Vec<bool>,
    threshold: f64,
}

impl<'a> CoarsenedTree<'a> {
    /// All clusters up to and including `level`.
    pub fn truncated(tree: &'a ClusterTree, level: usize) -> Self {
        let included = tree.clusters().iter().map(|c| c.level <= level).collect();
        Self {
            tree,
            included,
            threshold: 0.0,
        }
    }

    pub fn tree(&self) -> &ClusterTree {
        self.tree
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contains(&self, cluster: usize) -> bool {
        self.included[cluster]
    }

    pub fn len(&self) -> usize {
        self.included.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Included clusters whose children are included.
    pub fn is_refined(&self, cluster: usize) -> bool {
        self.included[cluster]
            && self
                .tree
                .cluster(cluster)
                .children
                .is_some_and(|[a, _]| self.included[a])
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.included.len())
            .filter(|&c| self.included[c] && !self.is_refined(c))
            .collect()
    }

    /// Keeps the root scaling coefficients and the samplets of refined
    /// clusters; everything below the subtree leaves is dropped.
    pub fn restrict(&self, basis: &SampletBasis, coeffs: &CoefficientVector) -> Result<CoefficientVector> {
        coeffs.check(basis)?;
        let mut out = vec![0.0; coeffs.len()];
        let c = coeffs.as_slice();
        let ns = basis.num_root_scaling();
        out[..ns].copy_from_slice(&c[..ns]);
        for id in 0..self.included.len() {
            if self.is_refined(id) {
                let slots = basis.slots(id);
                let start = if id == 0 { ns } else { slots.start };
                out[start..slots.end].copy_from_slice(&c[start..slots.end]);
            }
        }
        Ok(coeffs.with_values(out))
    }
}

/// Energy-based tree coarsening with threshold `w = eps^2 |f^Sigma|_2^2`:
/// both children of an included cluster are included iff their modified
/// energy reaches `w`.
pub fn coarsen_tree<'a>(
    basis: &'a SampletBasis,
    coeffs: &CoefficientVector,
    epsilon: f64,
) -> Result<CoarsenedTree<'a>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let e = energies(basis, coeffs)?;
    let tree = basis.tree();
    let w = epsilon * epsilon * e.energy[0];
    let mut included = vec![false; tree.num_clusters()];
    included[0] = true;
    for id in 0..tree.num_clusters() {
        if !included[id] {
            continue;
        }
        if let Some(ch) = tree.cluster(id).children {
            // Both children share the same modified energy.
            if e.modified[ch[0]] >= w {
                for k in ch {
                    included[k] = true;
                }
            }
        }
    }
    Ok(CoarsenedTree {
        tree,
        included,
        threshold: w,
    })
}

/// Draws `n` distinct point indices (original numbering): a subtree leaf is
/// chosen uniformly, then an unused point uniformly within it. Exhausted
/// leaves drop out of the draw.
pub fn entropy_subsample(coarse: &CoarsenedTree<'_>, n: usize, seed: u64) -> Result<Vec<usize>> {
    let tree = coarse.tree();
    if n > tree.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {n} samples from {} points",
            tree.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = coarse
        .leaves()
        .into_iter()
        .map(|leaf| tree.cluster_indices(leaf).to_vec())
        .collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let l = rng.gen_range(0..pools.len());
        let pool = &mut pools[l];
        let j = rng.gen_range(0..pool.len());
        out.push(pool.swap_remove(j));
        if pool.is_empty() {
            pools.swap_remove(l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_samplet_basis;
    use crate::cluster_tree::{build_cluster_tree, PointCloud};
    use crate::moments::default_leaf_size;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(dim, (0..n * dim).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    fn basis_for(cloud: &PointCloud, q: usize) -> SampletBasis {
        build_samplet_basis(build_cluster_tree(cloud, default_leaf_size(cloud.dim(), q)).unwrap(), q)
    }

    #[test]
    fn threshold_examples() {
        let cl = cloud(3, 1, 1);
        let b = basis_for(&cl, 0);
        let c = CoefficientVector::new(&b, vec![0.5, -0.2, 0.05]).unwrap();
        let (out, stats) = hard_threshold(&c, 0.1);
        assert_eq!(out.as_slice(), &[0.5, -0.2, 0.0]);
        assert_eq!(stats.survivors, 2);

        let (same, _) = hard_threshold(&c, 0.0);
        assert_eq!(same, c);
        let (zero, stats) = hard_threshold(&c, 0.6);
        assert!(zero.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(stats.saving, 1.0);
    }

    #[test]
    fn report_is_monotone_and_parseval() {
        let cl = cloud(2000, 2, 4);
        let b = basis_for(&cl, 3);
        let f: Vec<f64> = cl.iter().map(|p| (3.0 * p[0]).sin() * (p[1] + 1.0).ln()).collect();
        let rows = compression_report(&b, &f, &[1e-2, 1e-3, 1e-4, 1e-5]).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].relative_error <= pair[0].relative_error);
            assert!(pair[1].nnz >= pair[0].nnz);
        }
        for r in &rows {
            assert!((r.relative_error - r.dropped_ratio).abs() < 1e-10);
        }
    }

    #[test]
    fn jump_coefficients_straddle_the_jump() {
        let cl = cloud(4096, 2, 8);
        let b = basis_for(&cl, 2);
        let jump = 0.37;
        let f: Vec<f64> = cl.iter().map(|p| if p[0] < jump { 1.0 } else { -0.5 }).collect();
        let c = forward_transform(&b, &f).unwrap();
        let owners = b.slot_clusters();
        let tree = b.tree();
        let mut order: Vec<usize> = (b.num_root_scaling()..c.len()).collect();
        order.sort_by(|&x, &y| c.as_slice()[y].abs().total_cmp(&c.as_slice()[x].abs()));
        for &slot in order.iter().take(50) {
            let bb = &tree.cluster(owners[slot]).bbox;
            assert!(bb.min[0] < jump && bb.max[0] >= jump, "slot {slot}");
        }
    }

    #[test]
    fn energy_accounting() {
        let cl = cloud(700, 3, 2);
        let b = basis_for(&cl, 1);
        let f: Vec<f64> = cl.iter().map(|p| p[0] * p[1] - p[2].exp()).collect();
        let c = forward_transform(&b, &f).unwrap();
        let e = energies(&b, &c).unwrap();
        let total: f64 = c.as_slice().iter().map(|v| v * v).sum();
        assert!((e.energy[0] - total).abs() <= 1e-12 * total);
        for (id, cl) in b.tree().clusters().iter().enumerate() {
            if let Some([x, y]) = cl.children {
                assert!(e.energy[id] >= e.energy[x] + e.energy[y]);
            }
        }
    }

    #[test]
    fn coarsening_edge_cases() {
        let cl = cloud(1000, 2, 3);
        let b = basis_for(&cl, 1);
        let constant = forward_transform(&b, &vec![2.0; 1000]).unwrap();
        let t = coarsen_tree(&b, &constant, 1e-3).unwrap();
        assert_eq!(t.leaves(), vec![0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = forward_transform(&b, &noise).unwrap();
        let t = coarsen_tree(&b, &c, 1e-12).unwrap();
        assert_eq!(t.len(), b.tree().num_clusters());

        assert!(coarsen_tree(&b, &c, 0.0).is_err());
        assert!(coarsen_tree(&b, &c, 1.0).is_err());
    }

    #[test]
    fn coarsened_tree_closed_and_partitions() {
        let cl = cloud(3000, 2, 6);
        let b = basis_for(&cl, 2);
        let f: Vec<f64> = cl.iter().map(|p| (p[0] - 0.5).abs().sqrt() + p[1]).collect();
        let c = forward_transform(&b, &f).unwrap();
        let t = coarsen_tree(&b, &c, 1e-3).unwrap();
        let tree = b.tree();
        for (id, cluster) in tree.clusters().iter().enumerate() {
            if t.contains(id) {
                if let Some(p) = cluster.parent {
                    assert!(t.contains(p));
                    let [x, y] = tree.cluster(p).children.unwrap();
                    assert!(t.contains(x) && t.contains(y));
                }
            }
        }
        let mut pts: Vec<usize> = t
            .leaves()
            .iter()
            .flat_map(|&l| tree.cluster_indices(l).to_vec())
            .collect();
        pts.sort();
        assert_eq!(pts, (0..3000).collect::<Vec<_>>());
    }

    #[test]
    fn subsampling_edge_cases() {
        let cl = cloud(500, 2, 9);
        let tree = build_cluster_tree(&cl, 16).unwrap();

        let root_only = CoarsenedTree::truncated(&tree, 0);
        let s = entropy_subsample(&root_only, 100, 1).unwrap();
        let mut u = s.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 100);

        let fine = CoarsenedTree::truncated(&tree, 3);
        let mut all = entropy_subsample(&fine, 500, 2).unwrap();
        all.sort();
        assert_eq!(all, (0..500).collect::<Vec<_>>());

        assert!(entropy_subsample(&fine, 501, 2).is_err());
        assert_eq!(
            entropy_subsample(&fine, 200, 77).unwrap(),
            entropy_subsample(&fine, 200, 77).unwrap()
        );
    }
}
