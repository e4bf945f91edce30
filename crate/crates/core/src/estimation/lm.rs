//! Levenberg–Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Converged when an accepted step lowers the SSE by less than this
    /// fraction.
    pub sse_rtol: f64,
    /// Converged when `‖Jᵀr‖` falls below this.
    pub grad_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { max_iter: 100, sse_rtol: 1e-10, grad_tol: 1e-8, initial_lambda: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Jacobian evaluations.
    pub iterations: usize,
    pub converged: bool,
    /// SSE after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
    /// Jacobian at the returned point.
    pub jacobian: DMatrix<f64>,
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forward-difference Jacobian with step `1e-6 · max(|p_j|, 1)`; columns are
/// evaluated in parallel.
fn jacobian<F>(f: &F, p: &[f64], r0: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let cols: Vec<Option<Vec<f64>>> = (0..p.len())
        .into_par_iter()
        .map(|j| {
            let h = 1e-6 * p[j].abs().max(1.0);
            let mut q = p.to_vec();
            q[j] += h;
            let r = f(&q)?;
            Some(r.iter().zip(r0).map(|(a, b)| (a - b) / h).collect())
        })
        .collect();
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (i, v) in col.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Some(jac)
}

/// Minimizes `‖f(p)‖²` from `p0`. `f` returns `None` where it cannot be
/// evaluated; such trial points are rejected like uphill steps. Returns
/// `None` if `f` fails at `p0` or in a Jacobian evaluation.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], cfg: &LmConfig) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let mut p = p0.to_vec();
    let mut r = f(&p)?;
    let mut s = sse(&r);
    let mut history = vec![s];
    let mut lambda = cfg.initial_lambda;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = jacobian(&f, &p, &r)?;
    while iterations < cfg.max_iter {
        iterations += 1;
        if iterations > 1 {
            jac = jacobian(&f, &p, &r)?;
        }
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        if g.norm() < cfg.grad_tol || s == 0.0 {
            converged = true;
            break;
        }
        let a = jac.transpose() * &jac;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for j in 0..p.len() {
                // Marquardt scaling, with a floor for flat directions
                damped[(j, j)] += lambda * a[(j, j)].max(1e-12);
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            match f(&trial) {
                Some(rt) if sse(&rt) < s => {
                    let st = sse(&rt);
                    let rel = (s - st) / s;
                    p = trial;
                    r = rt;
                    s = st;
                    history.push(s);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < cfg.sse_rtol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if iterations > 1 || converged {
        jac = jacobian(&f, &p, &r)?;
    }
    Some(LmOutcome { params: p, residuals: r, sse: s, iterations, converged, history, jacobian: jac })
}

/// Standard errors `sqrt(diag(s² (JᵀJ)⁻¹))` with `s² = SSE/(m − n)`.
pub fn standard_errors(jac: &DMatrix<f64>, sse: f64) -> Option<Vec<f64>> {
    let (m, n) = jac.shape();
    if m <= n {
        return None;
    }
    let s2 = sse / (m - n) as f64;
    let cov = (jac.transpose() * jac).try_inverse()?;
    (0..n).map(|j| (cov[(j, j)] >= 0.0).then(|| (s2 * cov[(j, j)]).sqrt())).collect()
}
