use super::{dot, norm, LinearOperator};
use crate::error::{Error, Result};
use crate::transform::CoefficientVector;

/// Result of a conjugate gradient run, converged or not.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|b - (A + mu I) x| / |b|`.
    pub residual: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// CG for `(A + shift I) x = b` with `A` symmetric positive semidefinite.
/// Stops at relative residual `tol`; never fails, see `converged`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    shift: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
            trace: vec![0.0],
        };
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut trace = vec![1.0];
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > tol * bnorm {
        apply(&p, &mut ap);
        for (a, q) in ap.iter_mut().zip(&p) {
            *a += shift * q;
        }
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        for i in 0..n {
            p[i] = r[i] + rr_next / rr * p[i];
        }
        rr = rr_next;
        iterations += 1;
        trace.push(rr.sqrt() / bnorm);
    }
    // Report the true residual rather than the recursively updated one.
    apply(&x, &mut ap);
    let true_res = b
        .iter()
        .zip(&ap)
        .zip(&x)
        .map(|((bi, ai), xi)| (bi - ai - shift * xi).powi(2))
        .sum::<f64>()
        .sqrt()
        / bnorm;
    CgOutcome {
        x,
        iterations,
        residual: true_res,
        converged: rr.sqrt() <= tol * bnorm,
        trace,
    }
}

/// `(K + mu I) beta = h` in samplet coordinates.
pub struct InterpolationProblem<'a> {
    pub matrix: &'a dyn LinearOperator,
    pub rhs: &'a CoefficientVector,
    pub mu: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> InterpolationProblem<'a> {
    pub fn new(matrix: &'a dyn LinearOperator, rhs: &'a CoefficientVector, mu: f64) -> Self {
        Self {
            matrix,
            rhs,
            mu,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InterpolationSolution {
    pub beta: CoefficientVector,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_interpolation(p: &InterpolationProblem<'_>) -> Result<InterpolationSolution> {
    let n = p.rhs.len();
    if p.matrix.nrows() != n || p.matrix.ncols() != n {
        return Err(Error::LengthMismatch {
            expected: p.matrix.nrows(),
            got: n,
        });
    }
    if !(p.mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be nonnegative, got {}", p.mu)));
    }
    let out = conjugate_gradient(|x, y| p.matrix.apply(x, y), p.mu, p.rhs.as_slice(), p.tol, p.max_iter);
    log::info!(
        "cg: {} iterations, relative residual {:e}",
        out.iterations,
        out.residual
    );
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: out.residual,
            trace: out.trace,
        });
    }
    Ok(InterpolationSolution {
        beta: p.rhs.with_values(out.x),
        iterations: out.iterations,
        residual: out.residual,
    })
}
