//! Total-degree monomial bases and the affine frames they are evaluated in.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::cluster_tree::BoundingBox;

/// Dimension of the space of polynomials of total degree at most `q` in `d`
/// variables, `binom(q + d, d)`.
pub fn num_monomials(dim: usize, q: usize) -> usize {
    // Multiplicative form stays exact in integers.
    let mut m: usize = 1;
    for k in 1..=dim {
        m = m * (q + k) / k;
    }
    m
}

/// Smallest leaf size that lets every leaf host `m_q` scaling distributions.
pub fn default_leaf_size(dim: usize, q: usize) -> usize {
    (2 * num_monomials(dim, q)).max(2)
}

/// Exponents `alpha` with `|alpha|_1 <= degree`, graded, lexicographically
/// descending within each degree (`1, x1, x2, x1^2, x1 x2, x2^2, ...`).
#[derive(Debug, Clone)]
pub struct MonomialSet {
    dim: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl MonomialSet {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(num_monomials(dim, degree));
        for deg in 0..=degree {
            let mut alpha = vec![0u32; dim];
            push_with_total(&mut exponents, &mut alpha, 0, deg as u32);
        }
        let index = exponents.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Self {
            dim,
            degree,
            exponents,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Writes `x^alpha` for every monomial into `out`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let stride = self.degree + 1;
        let mut powers = vec![1.0; self.dim * stride];
        for (a, &xa) in x.iter().enumerate() {
            for k in 1..stride {
                powers[a * stride + k] = powers[a * stride + k - 1] * xa;
            }
        }
        for (o, alpha) in out.iter_mut().zip(&self.exponents) {
            *o = alpha
                .iter()
                .enumerate()
                .map(|(a, &e)| powers[a * stride + e as usize])
                .product();
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(x, &mut out);
        out
    }

    /// Matrix `A` with `mono(to.local(x)) = A * mono(from.local(x))`.
    ///
    /// Lower triangular in the graded order, since every monomial of the
    /// target frame expands into monomials of no larger degree.
    pub fn change_of_frame(&self, from: &LocalFrame, to: &LocalFrame) -> DMatrix<f64> {
        let m = self.len();
        let ratio = from.scale / to.scale;
        let shift: Vec<f64> = from
            .center
            .iter()
            .zip(&to.center)
            .map(|(cf, ct)| (cf - ct) / to.scale)
            .collect();
        let mut a = DMatrix::zeros(m, m);
        let mut beta = vec![0u32; self.dim];
        for (row, alpha) in self.exponents.iter().enumerate() {
            // Enumerate beta <= alpha componentwise.
            beta.iter_mut().for_each(|b| *b = 0);
            loop {
                let mut coeff = 1.0;
                for ax in 0..self.dim {
                    let (al, be) = (alpha[ax], beta[ax]);
                    coeff *= binomial(al, be) as f64 * ratio.powi(be as i32) * shift[ax].powi((al - be) as i32);
                }
                a[(row, self.index[&beta])] += coeff;

                let mut ax = 0;
                while ax < self.dim {
                    if beta[ax] < alpha[ax] {
                        beta[ax] += 1;
                        break;
                    }
                    beta[ax] = 0;
                    ax += 1;
                }
                if ax == self.dim {
                    break;
                }
            }
        }
        a
    }
}

fn push_with_total(out: &mut Vec<Vec<u32>>, alpha: &mut [u32], axis: usize, remaining: u32) {
    if axis + 1 == alpha.len() {
        alpha[axis] = remaining;
        out.push(alpha.to_vec());
        alpha[axis] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        alpha[axis] = e;
        push_with_total(out, alpha, axis + 1, remaining - e);
    }
    alpha[axis] = 0;
}

fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    (0..k as u64).fold(1, |acc, i| acc * (n as u64 - i) / (i + 1))
}

/// Affine coordinates `(x - center) / scale` used for monomial evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFrame {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl LocalFrame {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Centered at the box midpoint, scaled by half the box diagonal.
    pub fn of_box(bbox: &BoundingBox) -> Self {
        let half = 0.5 * bbox.diagonal();
        Self {
            center: bbox.midpoint(),
            scale: if half > 0.0 { half } else { 1.0 },
        }
    }

    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) / self.scale)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(num_monomials(1, 0), 1);
        assert_eq!(num_monomials(2, 1), 3);
        assert_eq!(num_monomials(3, 3), 20);
        assert_eq!(num_monomials(2, 3), 10);
        for dim in 1..5 {
            for q in 0..6 {
                assert_eq!(MonomialSet::new(dim, q).len(), num_monomials(dim, q));
            }
        }
    }

    #[test]
    fn graded_lexicographic_order() {
        let set = MonomialSet::new(2, 2);
        let expected: Vec<Vec<u32>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(set.exponents(), &expected[..]);
    }

    #[test]
    fn frame_change_matches_direct_evaluation() {
        let set = MonomialSet::new(3, 3);
        let from = LocalFrame {
            center: vec![0.3, -0.1, 0.7],
            scale: 0.25,
        };
        let to = LocalFrame {
            center: vec![0.5, 0.2, 0.4],
            scale: 1.3,
        };
        let a = set.change_of_frame(&from, &to);
        let x = [0.41, 0.05, 0.66];
        let direct = set.evaluate(&to.local(&x));
        let via = &a * nalgebra::DVector::from_vec(set.evaluate(&from.local(&x)));
        for (d, v) in direct.iter().zip(via.iter()) {
            assert!((d - v).abs() < 1e-12, "{d} vs {v}");
        }
        for r in 0..set.len() {
            for c in r + 1..set.len() {
                assert_eq!(a[(r, c)], 0.0);
            }
        }
    }
}
