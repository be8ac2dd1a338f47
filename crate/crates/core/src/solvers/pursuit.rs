use super::{conjugate_gradient, dot, norm, Dictionary, LinearOperator};
use crate::error::{Error, Result};
use crate::transform::CoefficientVector;

/// `sign(v) max(0, |v| - w)`, entrywise.
pub fn soft_shrink(v: &[f64], w: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(w)
        .map(|(&x, &t)| x.signum() * (x.abs() - t).max(0.0))
        .collect()
}

/// Largest eigenvalue of `K^T K` by power iteration from the all-ones
/// vector.
pub fn estimate_lambda_max(k: &dyn LinearOperator, iterations: usize) -> f64 {
    let m = k.ncols();
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut kv = vec![0.0; k.nrows()];
    let mut w = vec![0.0; m];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        k.apply(&v, &mut kv);
        k.apply_transpose(&kv, &mut w);
        lambda = norm(&w);
        if lambda == 0.0 {
            break;
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / lambda;
        }
    }
    lambda
}

/// `min 1/2 |h - K beta|^2 + sum w_i |beta_i|` over the stacked dictionary.
pub struct PursuitProblem<'a> {
    pub dictionary: Vec<&'a dyn LinearOperator>,
    /// One weight per stacked coefficient.
    pub weights: Vec<f64>,
    pub rhs: &'a CoefficientVector,
    /// Step size; defaults to `0.9 / lambda_max(K^T K)`.
    pub gamma: Option<f64>,
    /// Fixed-point residual target; defaults to `1e-8 (1 + |h|)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl<'a> PursuitProblem<'a> {
    pub fn new(dictionary: Vec<&'a dyn LinearOperator>, weights: Vec<f64>, rhs: &'a CoefficientVector) -> Self {
        Self {
            dictionary,
            weights,
            rhs,
            gamma: None,
            tol: None,
            max_iter: 1000,
        }
    }

    /// Same weight for every coefficient.
    pub fn uniform(dictionary: Vec<&'a dyn LinearOperator>, w: f64, rhs: &'a CoefficientVector) -> Self {
        let m: usize = dictionary.iter().map(|k| k.ncols()).sum();
        Self::new(dictionary, vec![w; m], rhs)
    }

    fn operator(&self) -> Dictionary<'a> {
        Dictionary::new(self.dictionary.clone())
    }

    fn validate(&self) -> Result<()> {
        if self.dictionary.is_empty() {
            return Err(Error::InvalidParameter("empty dictionary".into()));
        }
        let n = self.rhs.len();
        for k in &self.dictionary {
            if k.nrows() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: k.nrows(),
                });
            }
        }
        let m: usize = self.dictionary.iter().map(|k| k.ncols()).sum();
        if self.weights.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PursuitSolution {
    /// Coefficients per dictionary entry.
    pub coefficients: Vec<CoefficientVector>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub fixed_point_steps: usize,
    pub residual: f64,
    pub objective: f64,
    pub gamma: f64,
    pub nnz: usize,
}

fn objective(k: &dyn LinearOperator, h: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    let mut kb = vec![0.0; k.nrows()];
    k.apply(beta, &mut kb);
    let fit: f64 = h.iter().zip(&kb).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fit + w.iter().zip(beta).map(|(wi, b)| wi * b.abs()).sum::<f64>()
}

pub fn pursuit_objective(p: &PursuitProblem<'_>, beta: &[f64]) -> Result<f64> {
    p.validate()?;
    if beta.len() != p.weights.len() {
        return Err(Error::LengthMismatch {
            expected: p.weights.len(),
            got: beta.len(),
        });
    }
    Ok(objective(&p.operator(), p.rhs.as_slice(), &p.weights, beta))
}

/// Gradient step `u = beta + gamma K^T (h - K beta)`.
fn gradient_step(k: &dyn LinearOperator, h: &[f64], beta: &[f64], gamma: f64) -> Vec<f64> {
    let mut r = vec![0.0; k.nrows()];
    k.apply(beta, &mut r);
    for (ri, hi) in r.iter_mut().zip(h) {
        *ri = hi - *ri;
    }
    let mut g = vec![0.0; k.ncols()];
    k.apply_transpose(&r, &mut g);
    beta.iter().zip(&g).map(|(b, gi)| b + gamma * gi).collect()
}

/// `|beta - SS_{gamma w}(beta + gamma K^T (h - K beta))|_2`.
pub fn fixed_point_residual(p: &PursuitProblem<'_>, beta: &[f64], gamma: f64) -> Result<f64> {
    p.validate()?;
    let k = p.operator();
    let u = gradient_step(&k, p.rhs.as_slice(), beta, gamma);
    let gw: Vec<f64> = p.weights.iter().map(|w| gamma * w).collect();
    let z = soft_shrink(&u, &gw);
    Ok(beta.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Proximal point step `argmin_x Phi(x) + |x - beta|^2 / (2 sigma)`, with
/// `Phi` the pursuit objective, solved by semismooth Newton on its dual
/// `psi(y) = |y|^2/2 + <y, h> + (|v|^2 - |x - v|^2)/(2 sigma) - sum w_i |x_i|`
/// where `v = beta - sigma K^T y` and `x = SS_{sigma w}(v)`. The generalized
/// Hessian `I + sigma K_A K_A^T` is positive definite even when the stacked
/// dictionary is underdetermined.
struct ProximalStep<'a> {
    k: &'a dyn LinearOperator,
    h: &'a [f64],
    w: &'a [f64],
    beta: &'a [f64],
    sigma: f64,
}

struct DualPoint {
    v: Vec<f64>,
    x: Vec<f64>,
    grad: Vec<f64>,
    psi: f64,
}

impl ProximalStep<'_> {
    fn evaluate(&self, y: &[f64]) -> DualPoint {
        let sigma = self.sigma;
        let mut kty = vec![0.0; self.k.ncols()];
        self.k.apply_transpose(y, &mut kty);
        let v: Vec<f64> = self.beta.iter().zip(&kty).map(|(b, g)| b - sigma * g).collect();
        let sw: Vec<f64> = self.w.iter().map(|wi| sigma * wi).collect();
        let x = soft_shrink(&v, &sw);
        let mut kx = vec![0.0; self.k.nrows()];
        self.k.apply(&x, &mut kx);
        let grad: Vec<f64> = y
            .iter()
            .zip(self.h)
            .zip(&kx)
            .map(|((yi, hi), ki)| yi + hi - ki)
            .collect();
        let envelope: f64 = v
            .iter()
            .zip(&x)
            .zip(self.w)
            .map(|((vi, xi), wi)| (vi * vi - (xi - vi).powi(2)) / (2.0 * sigma) - wi * xi.abs())
            .sum();
        let psi = 0.5 * dot(y, y) + dot(y, self.h) + envelope;
        DualPoint { v, x, grad, psi }
    }

    /// Newton iterations with Armijo backtracking until `|grad psi| <= tol`.
    fn solve(&self, tol: f64, max_newton: usize) -> (Vec<f64>, usize) {
        let mut y = vec![0.0; self.k.nrows()];
        self.k.apply(self.beta, &mut y);
        for (yi, hi) in y.iter_mut().zip(self.h) {
            *yi -= hi;
        }
        let mut point = self.evaluate(&y);
        let m = self.k.ncols();
        let mut steps = 0;
        while steps < max_newton && norm(&point.grad) > tol {
            let active: Vec<bool> = point
                .v
                .iter()
                .zip(self.w)
                .map(|(vi, wi)| vi.abs() > self.sigma * wi)
                .collect();
            let mut full = vec![0.0; m];
            let mut hess = |d: &[f64], out: &mut [f64]| {
                self.k.apply_transpose(d, &mut full);
                for (f, a) in full.iter_mut().zip(&active) {
                    if !a {
                        *f = 0.0;
                    }
                }
                self.k.apply(&full, out);
                for o in out.iter_mut() {
                    *o *= self.sigma;
                }
            };
            let rhs: Vec<f64> = point.grad.iter().map(|g| -g).collect();
            let forcing = norm(&point.grad).clamp(1e-12, 1e-1);
            let dir = conjugate_gradient(&mut hess, 1.0, &rhs, forcing, 500).x;
            let slope = dot(&point.grad, &dir);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let next = self.evaluate(&trial);
                if next.psi <= point.psi + 1e-4 * t * slope || t < 1e-8 {
                    y = trial;
                    point = next;
                    break;
                }
                t *= 0.5;
            }
            steps += 1;
        }
        (point.x, steps)
    }
}

/// Semismooth Newton for the shrinkage fixed-point equation, globalized as
/// an inexact proximal point method. A Newton step is accepted when it does
/// not increase the objective; otherwise one plain fixed-point step is taken.
pub fn solve_pursuit(p: &PursuitProblem<'_>) -> Result<PursuitSolution> {
    p.validate()?;
    let k = p.operator();
    let h = p.rhs.as_slice();
    let m = k.ncols();
    let w = &p.weights;
    let gamma = match p.gamma {
        Some(g) => g,
        None => {
            let lambda = estimate_lambda_max(&k, 30);
            if lambda > 0.0 {
                0.9 / lambda
            } else {
                1.0
            }
        }
    };
    let tol = p.tol.unwrap_or(1e-8 * (1.0 + norm(h)));
    let gw: Vec<f64> = w.iter().map(|wi| gamma * wi).collect();

    let mut beta = vec![0.0; m];
    let mut obj = objective(&k, h, w, &beta);
    let mut trace = Vec::new();
    let (mut newton_steps, mut fixed_point_steps) = (0, 0);
    let mut sigma = gamma;

    for iteration in 0..=p.max_iter {
        let u = gradient_step(&k, h, &beta, gamma);
        let z = soft_shrink(&u, &gw);
        let residual = beta.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        trace.push(residual);
        if residual <= tol {
            let nnz = beta.iter().filter(|b| **b != 0.0).count();
            log::info!(
                "pursuit: {iteration} iterations ({newton_steps} Newton, {fixed_point_steps} fixed-point), residual {residual:e}, nnz {nnz}"
            );
            let mut coefficients = Vec::with_capacity(p.dictionary.len());
            let mut at = 0;
            for part in &p.dictionary {
                let n = part.ncols();
                coefficients.push(p.rhs.with_values(beta[at..at + n].to_vec()));
                at += n;
            }
            return Ok(PursuitSolution {
                coefficients,
                beta,
                iterations: iteration,
                newton_steps,
                fixed_point_steps,
                residual,
                objective: obj,
                gamma,
                nnz,
            });
        }
        if iteration == p.max_iter {
            break;
        }

        let step = ProximalStep {
            k: &k,
            h,
            w,
            beta: &beta,
            sigma,
        };
        let inner_tol = (1e-2 * residual / (sigma / gamma).sqrt()).max(1e-3 * tol);
        let (candidate, inner) = step.solve(inner_tol, 50);
        let candidate_obj = objective(&k, h, w, &candidate);
        log::debug!(
            "pursuit iteration {iteration}: residual {residual:e}, sigma {sigma:e}, {inner} inner Newton steps, objective {candidate_obj:e}"
        );
        if candidate_obj <= obj {
            beta = candidate;
            obj = candidate_obj;
            newton_steps += 1;
            sigma = (10.0 * sigma).min(1e8 * gamma);
        } else {
            obj = objective(&k, h, w, &z);
            beta = z;
            fixed_point_steps += 1;
            sigma = (0.1 * sigma).max(gamma);
        }
    }
    Err(Error::NotConverged {
        iterations: p.max_iter,
        residual: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}
