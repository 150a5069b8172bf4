//! Quasi-Newton maximization of likelihood objectives over the model
//! parameters.
//!
//! BFGS with central finite-difference gradients on a transformed space: the
//! scales (sigma_s, sigma_t) and the attenuation beta1 are optimized on the
//! log scale by default, keeping them positive without constraints. A raw
//! parameterization is available for cross-checking that the optimum does not
//! depend on the transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamTransform {
    /// beta0 raw; beta1, sigma_s, sigma_t on the log scale.
    LogScales,
    /// All four raw, positivity kept by clamping.
    Raw,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Convergence threshold on the max-norm of the transformed gradient.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Central-difference step on the transformed scale.
    pub fd_step: f64,
    pub transform: ParamTransform,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grad_tol: 1e-5,
            max_iterations: 200,
            fd_step: 1e-5,
            transform: ParamTransform::LogScales,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptSummary {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

const BETA1_FLOOR: f64 = 1e-6;
const SCALE_FLOOR: f64 = 1e-8;

fn to_vec(p: &ModelParams, transform: ParamTransform) -> [f64; 4] {
    match transform {
        ParamTransform::LogScales => [
            p.beta0,
            p.beta1.max(BETA1_FLOOR).ln(),
            p.sigma_s.ln(),
            p.sigma_t.ln(),
        ],
        ParamTransform::Raw => [p.beta0, p.beta1, p.sigma_s, p.sigma_t],
    }
}

fn from_vec(v: &[f64; 4], transform: ParamTransform, threshold: f64) -> ModelParams {
    match transform {
        ParamTransform::LogScales => ModelParams {
            beta0: v[0],
            beta1: v[1].exp(),
            sigma_s: v[2].exp(),
            sigma_t: v[3].exp(),
            threshold,
        },
        ParamTransform::Raw => ModelParams {
            beta0: v[0],
            beta1: v[1].max(0.0),
            sigma_s: v[2].max(SCALE_FLOOR),
            sigma_t: v[3].max(SCALE_FLOOR),
            threshold,
        },
    }
}

/// Maximize `f` over the model parameters, starting from `init`. The
/// detection threshold is carried through untouched. Returns the best point
/// seen together with a convergence summary.
pub fn maximize<F>(f: F, init: &ModelParams, cfg: &OptimizerConfig) -> Result<(ModelParams, OptSummary)>
where
    F: Fn(&ModelParams) -> f64,
{
    let threshold = init.threshold;
    let eval = |t: &[f64; 4]| -> f64 { f(&from_vec(t, cfg.transform, threshold)) };

    let mut t = to_vec(init, cfg.transform);
    let mut ft = eval(&t);
    if !ft.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut best_t = t;
    let mut best_f = ft;

    // Inverse Hessian approximation.
    let mut h = [[0.0f64; 4]; 4];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut grad = fd_gradient(&eval, &t, cfg.fd_step);
    let mut iterations = 0;
    let mut converged = max_abs(&grad) < cfg.grad_tol;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        // Ascent direction d = H * grad.
        let mut dir = [0.0f64; 4];
        for i in 0..4 {
            for j in 0..4 {
                dir[i] += h[i][j] * grad[j];
            }
        }
        let mut slope: f64 = (0..4).map(|i| dir[i] * grad[i]).sum();
        if !(slope.is_finite() && slope > 0.0) {
            // Reset to steepest ascent.
            for (i, row) in h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
            dir = grad;
            slope = (0..4).map(|i| grad[i] * grad[i]).sum();
            if slope <= 0.0 {
                break;
            }
        }

        // Backtracking line search on the ascent condition.
        let mut alpha = 1.0;
        let mut t_new = t;
        let mut f_new = f64::NEG_INFINITY;
        let mut ok = false;
        for _ in 0..40 {
            for i in 0..4 {
                t_new[i] = t[i] + alpha * dir[i];
            }
            f_new = eval(&t_new);
            if f_new.is_finite() && f_new >= ft + 1e-4 * alpha * slope {
                ok = true;
                break;
            }
            alpha *= 0.5;
        }
        if !ok {
            // No ascent along this direction at any tried step: stop at best.
            break;
        }

        let grad_new = fd_gradient(&eval, &t_new, cfg.fd_step);
        // BFGS update of the inverse Hessian with s = t_new - t,
        // y = -(grad_new - grad) (minimization convention on -f).
        let mut s = [0.0f64; 4];
        let mut y = [0.0f64; 4];
        for i in 0..4 {
            s[i] = t_new[i] - t[i];
            y[i] = grad[i] - grad_new[i];
        }
        let sy: f64 = (0..4).map(|i| s[i] * y[i]).sum();
        if sy > 1e-12 * norm(&s) * norm(&y) {
            let rho = 1.0 / sy;
            // H = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let mut hy = [0.0f64; 4];
            for i in 0..4 {
                for j in 0..4 {
                    hy[i] += h[i][j] * y[j];
                }
            }
            let yhy: f64 = (0..4).map(|i| y[i] * hy[i]).sum();
            let mut h_next = [[0.0f64; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    h_next[i][j] = h[i][j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
            h = h_next;
        }

        t = t_new;
        ft = f_new;
        grad = grad_new;
        if ft > best_f {
            best_f = ft;
            best_t = t;
        }
        converged = max_abs(&grad) < cfg.grad_tol;
    }

    let params = from_vec(&best_t, cfg.transform, threshold);
    params.validate()?;
    Ok((params, OptSummary { iterations, grad_norm: max_abs(&grad), converged }))
}

fn fd_gradient<F: Fn(&[f64; 4]) -> f64>(eval: &F, t: &[f64; 4], h: f64) -> [f64; 4] {
    let mut g = [0.0f64; 4];
    for i in 0..4 {
        let mut hi = *t;
        let mut lo = *t;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (eval(&hi) - eval(&lo)) / (2.0 * h);
    }
    g
}

fn max_abs(v: &[f64; 4]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
