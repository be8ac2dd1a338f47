//! Small dense kernels: full Householder QR with a fixed sign convention.

use nalgebra::DMatrix;

/// Full QR factorization `A = Q R` of an `n x m` matrix.
///
/// `Q` is `n x n` orthogonal and `R` is `n x m` upper triangular with a
/// nonnegative diagonal. Rank-deficient input is fine: a vanishing pivot
/// column is left untouched and yields a zero diagonal entry.
pub fn householder_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let steps = m.min(n);
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n.max(m)];

    for k in 0..steps {
        let norm = (k..n).map(|i| r[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let len = n - k;
        v[0] = x0 - alpha;
        for i in 1..len {
            v[i] = r[(k + i, k)];
        }
        let vnorm2: f64 = v[..len].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;

        // R[k.., k..] -= tau v (v^T R[k.., k..])
        for j in k..m {
            w[j] = (0..len).map(|i| v[i] * r[(k + i, j)]).sum::<f64>() * tau;
        }
        for j in k..m {
            for i in 0..len {
                r[(k + i, j)] -= v[i] * w[j];
            }
        }
        // Q[:, k..] -= tau (Q[:, k..] v) v^T
        for i in 0..n {
            let s = (0..len).map(|l| q[(i, k + l)] * v[l]).sum::<f64>() * tau;
            for l in 0..len {
                q[(i, k + l)] -= s * v[l];
            }
        }
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
    }

    for k in 0..steps {
        if r[(k, k)] < 0.0 {
            for j in k..m {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    (q, r)
}

/// Largest absolute deviation of `Q^T Q` from the identity.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(a: &DMatrix<f64>) {
        let (q, r) = householder_qr(a);
        assert!(orthogonality_defect(&q) < 1e-12);
        let scale = a.amax().max(1.0);
        assert!((&q * &r - a).amax() < 1e-12 * scale);
        for i in 0..r.nrows() {
            for j in 0..i.min(r.ncols()) {
                assert_eq!(r[(i, j)], 0.0);
            }
            if i < r.ncols() {
                assert!(r[(i, i)] >= 0.0);
            }
        }
    }

    #[test]
    fn haar_pair() {
        let a = DMatrix::from_element(2, 1, 1.0);
        let (q, r) = householder_qr(&a);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[(0, 0)] - h).abs() < 1e-15 && (q[(1, 0)] - h).abs() < 1e-15);
        assert!((q[(0, 1)] + q[(1, 1)]).abs() < 1e-15);
        assert!((r[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_and_wide() {
        check(&DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 2.0, 4.0, //
                1.0, 2.0, 4.0, //
                1.0, 2.0, 4.0, //
                1.0, 2.0, 4.0,
            ],
        ));
        check(&DMatrix::from_row_slice(
            2,
            4,
            &[1.0, 0.5, 0.2, 0.1, 1.0, -0.5, 0.3, 0.9],
        ));
        check(&DMatrix::zeros(3, 2));
    }

    proptest! {
        #[test]
        fn random_matrices_factor(n in 1usize..12, m in 1usize..12, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            check(&a);
        }
    }
}
