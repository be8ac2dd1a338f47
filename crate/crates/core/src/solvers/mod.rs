//! Regularized interpolation by conjugate gradients and l1 basis pursuit
//! by a semismooth Newton method, both in samplet coordinates.

mod cg;
mod pursuit;

use nalgebra::DMatrix;

use crate::compression::CompressedKernelMatrix;

pub use cg::{conjugate_gradient, solve_interpolation, CgOutcome, InterpolationProblem, InterpolationSolution};
pub use pursuit::{
    estimate_lambda_max, fixed_point_residual, pursuit_objective, soft_shrink, solve_pursuit, PursuitProblem,
    PursuitSolution,
};

/// A matrix known only through products with vectors.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = A^T x`.
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, xj) in x.iter().enumerate() {
            if *xj != 0.0 {
                for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                    *yi += a * xj;
                }
            }
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.column(j).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

impl LinearOperator for CompressedKernelMatrix {
    fn nrows(&self) -> usize {
        self.len()
    }

    fn ncols(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y).expect("operator dimensions");
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.apply_transpose_into(x, y).expect("operator dimensions");
    }
}

/// Column-stacked dictionary `[K_1, ..., K_L]` of operators sharing a row
/// space.
pub struct Dictionary<'a> {
    parts: Vec<&'a dyn LinearOperator>,
}

impl<'a> Dictionary<'a> {
    pub fn new(parts: Vec<&'a dyn LinearOperator>) -> Self {
        Self { parts }
    }

    pub fn parts(&self) -> &[&'a dyn LinearOperator] {
        &self.parts
    }
}

impl LinearOperator for Dictionary<'_> {
    fn nrows(&self) -> usize {
        self.parts.first().map_or(0, |p| p.nrows())
    }

    fn ncols(&self) -> usize {
        self.parts.iter().map(|p| p.ncols()).sum()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let mut tmp = vec![0.0; y.len()];
        let mut at = 0;
        for p in &self.parts {
            let n = p.ncols();
            p.apply(&x[at..at + n], &mut tmp);
            for (a, b) in y.iter_mut().zip(&tmp) {
                *a += b;
            }
            at += n;
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let mut at = 0;
        for p in &self.parts {
            let n = p.ncols();
            p.apply_transpose(x, &mut y[at..at + n]);
            at += n;
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
