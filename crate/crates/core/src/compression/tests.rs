use super::container::{read_compressed, write_compressed};
use super::*;
use crate::basis::build_samplet_basis;
use crate::cluster_tree::BoundingBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(dim, (0..n * dim).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

fn setup(n: usize, q: usize, seed: u64) -> (PointCloud, SampletBasis) {
    let cloud = uniform(n, 2, seed);
    let tree = build_cluster_tree(&cloud, default_leaf_size(2, q)).unwrap();
    (cloud.clone(), build_samplet_basis(tree, q))
}

fn oracle(cloud: &PointCloud, basis: &SampletBasis, spec: &KernelSpec) -> DMatrix<f64> {
    transform_matrix_congruence(basis, &dense_kernel_matrix(spec, cloud).unwrap()).unwrap()
}

fn interval(lo: f64, hi: f64) -> Cluster {
    Cluster {
        index_range: 0..1,
        level: 0,
        bbox: BoundingBox::new(vec![lo], vec![hi]),
        children: None,
        parent: None,
    }
}

#[test]
fn admissibility_examples() {
    assert!(is_admissible(&interval(0.0, 1.0), &interval(3.0, 4.0), 1.0));
    assert!(!is_admissible(&interval(0.0, 2.0), &interval(3.0, 4.0), 2.0));
    assert!(!is_admissible(&interval(0.0, 1.0), &interval(0.0, 1.0), 1.0));
    let dot = interval(0.5, 0.5);
    assert!(is_admissible(&dot, &dot, 1.0));
    assert!(!is_far(&dot, &dot, 1.0));
}

#[test]
fn no_admissible_pairs_reproduces_dense() {
    let (cloud, basis) = setup(200, 2, 1);
    let spec = KernelSpec::exponential(0.2).unwrap();
    let m = compress_assemble(&basis, &spec, 1e9, 4).unwrap();
    let dense = oracle(&cloud, &basis, &spec);
    assert!((m.to_dense().unwrap() - &dense).amax() < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cv = CoefficientVector::new(&basis, v.clone()).unwrap();
    let y = compressed_matvec(&m, &cv).unwrap();
    let expect = &dense * nalgebra::DVector::from_vec(v);
    for (a, b) in y.as_slice().iter().zip(expect.iter()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn exponential_kernel_error_is_small() {
    let (cloud, basis) = setup(256, 3, 3);
    let spec = KernelSpec::exponential(0.1).unwrap();
    let dense = oracle(&cloud, &basis, &spec);
    for p in [4, 6] {
        let m = compress_assemble(&basis, &spec, 1.25, p).unwrap();
        let err = (m.to_dense().unwrap() - &dense).norm() / dense.norm();
        assert!(err < 1e-3, "degree {p}: {err}");
    }
}

#[test]
fn blocks_are_symmetric() {
    let (_, basis) = setup(300, 2, 4);
    let spec = KernelSpec::matern(crate::kernel::Smoothness::ThreeHalves, 0.3).unwrap();
    let m = compress_assemble(&basis, &spec, 1.25, 5).unwrap();
    for b in m.blocks() {
        let t = m.block(b.col, b.row).expect("mirrored block");
        assert!((&b.values - t.values.transpose()).amax() <= 1e-12 * b.values.amax().max(1.0));
    }
    let d = m.to_dense().unwrap();
    assert!((&d - d.transpose()).amax() < 1e-12);
}

#[test]
fn pattern_is_exactly_the_non_admissible_pairs() {
    let (_, basis) = setup(500, 1, 5);
    let tree = basis.tree();
    let eta = 1.25;
    let pattern: std::collections::HashSet<(usize, usize)> = block_pattern(&basis, eta).into_iter().collect();
    for a in 0..tree.num_clusters() {
        for b in 0..tree.num_clusters() {
            if basis.emitted(a) == 0 || basis.emitted(b) == 0 {
                continue;
            }
            let mut far = false;
            let mut x = Some(a);
            while let Some(i) = x {
                let mut y = Some(b);
                while let Some(j) = y {
                    far |= is_far(tree.cluster(i), tree.cluster(j), eta);
                    y = tree.cluster(j).parent;
                }
                x = tree.cluster(i).parent;
            }
            assert_eq!(pattern.contains(&(a, b)), !far, "pair ({a}, {b})");
        }
    }
}

#[test]
fn near_field_blocks_are_exact() {
    let (cloud, basis) = setup(400, 2, 6);
    let spec = KernelSpec::exponential(0.1).unwrap();
    let dense = oracle(&cloud, &basis, &spec);
    let m = compress_assemble(&basis, &spec, 1.25, 3).unwrap();
    let mut seen = 0;
    for b in m.blocks().iter().filter(|b| b.near) {
        let d = dense.view((b.row_offset, b.col_offset), b.values.shape());
        assert!((&b.values - d).amax() < 1e-12);
        seen += 1;
    }
    assert!(seen > 0);
}

#[test]
fn arithmetic() {
    let (cloud, basis) = setup(256, 2, 7);
    let k1 = KernelSpec::exponential(0.2).unwrap();
    let k2 = KernelSpec::gaussian(0.1).unwrap();
    let a = compress_assemble(&basis, &k1, 1.25, 6).unwrap();
    let b = compress_assemble(&basis, &k2, 1.25, 6).unwrap();

    let zero = CompressedKernelMatrix::zero(&basis);
    assert_eq!(add_compressed(&a, &zero).unwrap().blocks(), a.blocks());
    let twice = add_compressed(&a, &a).unwrap();
    for (x, y) in twice.blocks().iter().zip(a.blocks()) {
        assert_eq!(x.values, &y.values * 2.0);
    }

    let sum = add_compressed(&a, &b).unwrap();
    let e1 = (a.to_dense().unwrap() - oracle(&cloud, &basis, &k1)).norm();
    let e2 = (b.to_dense().unwrap() - oracle(&cloud, &basis, &k2)).norm();
    let exact = oracle(&cloud, &basis, &k1) + oracle(&cloud, &basis, &k2);
    assert!((sum.to_dense().unwrap() - exact).norm() <= e1 + e2 + 1e-12);

    let (_, other) = setup(256, 2, 7);
    let c = compress_assemble(&other, &k1, 1.25, 2).unwrap();
    assert!(matches!(add_compressed(&a, &c), Err(Error::BasisMismatch)));
}

#[test]
fn matvec_edge_cases() {
    let (_, basis) = setup(300, 2, 8);
    let m = compress_assemble(&basis, &KernelSpec::exponential(0.1).unwrap(), 1.25, 4).unwrap();
    let zero = CoefficientVector::zeros(&basis);
    assert!(compressed_matvec(&m, &zero)
        .unwrap()
        .as_slice()
        .iter()
        .all(|v| *v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (mut y, mut yt) = (vec![0.0; 300], vec![0.0; 300]);
    m.apply_into(&x, &mut y).unwrap();
    m.apply_transpose_into(&x, &mut yt).unwrap();
    for (a, b) in y.iter().zip(&yt) {
        assert!((a - b).abs() < 1e-12);
    }
    let dense = m.to_dense().unwrap() * nalgebra::DVector::from_vec(x);
    for (a, b) in y.iter().zip(dense.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(m.apply_into(&[1.0], &mut y).is_err());
}

#[test]
fn container_round_trip() {
    let (_, basis) = setup(300, 2, 9);
    let m = compress_assemble(&basis, &KernelSpec::gaussian(0.2).unwrap(), 1.25, 3).unwrap();
    let mut buf = Vec::new();
    write_compressed(&m, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"SMPK");
    let back = read_compressed(&buf[..], &basis).unwrap();
    assert_eq!(back.blocks(), m.blocks());
    assert_eq!(back.eta(), m.eta());

    assert!(matches!(
        read_compressed(&buf[..buf.len() - 3], &basis),
        Err(Error::Format(_))
    ));
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_compressed(&bad[..], &basis), Err(Error::Format(_))));
}

#[test]
fn error_decreases_with_moments() {
    let cloud = uniform(512, 2, 10);
    let spec = KernelSpec::exponential(0.1).unwrap();
    let rows = compression_error_report(&cloud, &spec, 1.25, 6, &[1, 2, 3]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].relative_error < w[0].relative_error, "{rows:?}");
    }
}
