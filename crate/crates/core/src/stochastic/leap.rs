//! τ-leaping: explicit (θ = 0), implicit (θ = 1) and trapezoidal (θ = ½).
//!
//! Each leap draws `p_r ~ Poisson(κ_r(x) τ)` for the non-critical steps.
//! The implicit variants solve, for a real state `x̂`,
//!
//! ```text
//! x̂ = x + Σ_r (p_r − θτ κ_r(x) + θτ κ_r(x̂)) γ_r
//! ```
//!
//! by damped Newton and fire each step `p_r + round(θτ (κ_r(x̂) − κ_r(x)))`
//! times (at least zero), which keeps the state on the integer lattice.
//!
//! Steps that could exhaust a reactant within a few firings are critical:
//! at most one critical firing happens per leap, at an exponential time
//! with the total critical propensity. A leap that would make a count
//! negative is redrawn with half the step. When the selected τ is only a
//! few mean event times long, a batch of exact steps is cheaper and the
//! method switches to them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use super::direct::{choose, event};
use super::{JumpModel, JumpTrajectory, LeapConfig, Observer, Simulator, StochasticError, StochasticMethod};

/// Largest τ keeping the expected and the typical change of every reactant
/// species within `max(ε x_i / g_i, 1)`, with `g_i` the highest reactant
/// order of species `i`. Only steps with nonzero entries in `a` count.
pub fn select_tau(model: &JumpModel, x: &[i64], a: &[f64], epsilon: f64) -> f64 {
    let d = model.dim();
    let mut mu = vec![0.0; d];
    let mut sigma2 = vec![0.0; d];
    for (r, &ar) in a.iter().enumerate() {
        if ar > 0.0 {
            for &(j, g) in &model.changes[r] {
                mu[j] += g as f64 * ar;
                sigma2[j] += (g * g) as f64 * ar;
            }
        }
    }
    let mut tau = f64::INFINITY;
    for j in 0..d {
        let g = model.max_order[j];
        if g == 0 {
            continue;
        }
        let bound = (epsilon * x[j] as f64 / g as f64).max(1.0);
        if mu[j] != 0.0 {
            tau = tau.min(bound / mu[j].abs());
        }
        if sigma2[j] > 0.0 {
            tau = tau.min(bound * bound / sigma2[j]);
        }
    }
    tau
}

/// Falling-factorial propensity `c ∏ y(y−1)…(y−α+1)/α!` on real states and
/// its gradient.
fn continuous_propensity(model: &JumpModel, r: usize, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let re = &model.reactants[r];
    let factors: Vec<(f64, f64)> = re
        .iter()
        .map(|&(m, a)| {
            let (mut v, mut dv) = (1.0, 0.0);
            for j in 0..a {
                let term = (y[m] - j as f64) / (j + 1) as f64;
                dv = dv * term + v / (j + 1) as f64;
                v *= term;
            }
            (v, dv)
        })
        .collect();
    let value = factors.iter().fold(model.c[r], |acc, f| acc * f.0);
    if let Some(grad) = grad {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (k, &(m, _)) in re.iter().enumerate() {
            let others: f64 = factors.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, f)| f.0).product();
            grad[m] += model.c[r] * factors[k].1 * others;
        }
    }
    value
}

/// Firing counts of an implicit leap; `None` if Newton fails.
#[allow(clippy::too_many_arguments)]
pub(crate) fn implicit_counts(
    model: &JumpModel,
    x: &[i64],
    a: &[f64],
    active: &[bool],
    p: &[i64],
    tau: f64,
    theta: f64,
    cfg: &LeapConfig,
) -> Option<Vec<i64>> {
    let d = model.dim();
    let n = model.num_steps();
    let mut base: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut y = base.clone();
    for r in (0..n).filter(|&r| active[r]) {
        for &(j, g) in &model.changes[r] {
            base[j] += (p[r] as f64 - theta * tau * a[r]) * g as f64;
            y[j] += p[r] as f64 * g as f64;
        }
    }
    let residual = |y: &[f64]| -> Vec<f64> {
        let mut f: Vec<f64> = y.iter().zip(&base).map(|(a, b)| a - b).collect();
        for r in (0..n).filter(|&r| active[r]) {
            let ar = continuous_propensity(model, r, y, None);
            for &(j, g) in &model.changes[r] {
                f[j] -= theta * tau * ar * g as f64;
            }
        }
        f
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = 1.0 + norm(&base);
    let mut f = residual(&y);
    let mut grad = vec![0.0; d];
    let mut converged = norm(&f) <= cfg.newton_tol * scale;
    for _ in 0..cfg.newton_max_iter {
        if converged {
            break;
        }
        let mut jac = DMatrix::<f64>::identity(d, d);
        for r in (0..n).filter(|&r| active[r]) {
            continuous_propensity(model, r, &y, Some(&mut grad));
            for &(j, g) in &model.changes[r] {
                for (m, &dm) in grad.iter().enumerate() {
                    if dm != 0.0 {
                        jac[(j, m)] -= theta * tau * g as f64 * dm;
                    }
                }
            }
        }
        let delta = jac.lu().solve(&DVector::from_iterator(d, f.iter().map(|v| -v)))?;
        let f_norm = norm(&f);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, b)| a + lambda * b).collect();
            let ft = residual(&trial);
            if norm(&ft) < f_norm || lambda < 1e-3 {
                y = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
        converged = norm(&f) <= cfg.newton_tol * scale;
    }
    if !converged || y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(
        (0..n)
            .map(|r| {
                if !active[r] {
                    return 0;
                }
                let corr = theta * tau * (continuous_propensity(model, r, &y, None) - a[r]);
                (p[r] + corr.round() as i64).max(0)
            })
            .collect(),
    )
}

/// Number of times step `r` can fire before a reactant runs out.
fn firings_left(model: &JumpModel, x: &[i64], r: usize) -> i64 {
    model.changes[r].iter().filter(|&&(_, g)| g < 0).map(|&(j, g)| x[j] / -g).min().unwrap_or(i64::MAX)
}

/// Runs until `t_end`; returns (absorbed, rejected leaps).
pub(crate) fn run<O: Observer>(
    model: &JumpModel,
    x0: &[i64],
    t_end: f64,
    cfg: &LeapConfig,
    theta: f64,
    rng: &mut ChaCha8Rng,
    obs: &mut O,
) -> (bool, usize) {
    let n = model.num_steps();
    let mut x = x0.to_vec();
    let mut a = vec![0.0; n];
    let mut t = 0.0;
    let mut rejected = 0;
    obs.record(t, &x, None);
    'outer: while t < t_end {
        model.propensities(&x, &mut a);
        let a0: f64 = a.iter().sum();
        if a0 <= 0.0 {
            return (true, rejected);
        }
        let critical: Vec<bool> =
            (0..n).map(|r| a[r] > 0.0 && firings_left(model, &x, r) < cfg.critical_threshold).collect();
        let a_nc: Vec<f64> = (0..n).map(|r| if critical[r] { 0.0 } else { a[r] }).collect();
        let a_c: Vec<f64> = (0..n).map(|r| if critical[r] { a[r] } else { 0.0 }).collect();
        let mut tau1 = match cfg.fixed_tau {
            Some(tau) => tau,
            None => select_tau(model, &x, &a_nc, cfg.epsilon),
        };
        if cfg.fixed_tau.is_none() && tau1 < 10.0 / a0 {
            for _ in 0..100 {
                model.propensities(&x, &mut a);
                let Some((wait, r)) = event(&a, rng) else {
                    return (true, rejected);
                };
                if t + wait >= t_end {
                    t = t_end;
                    obs.record(t, &x, None);
                    break 'outer;
                }
                t += wait;
                model.fire(&mut x, r, 1);
                obs.record(t, &x, None);
            }
            continue;
        }
        let a0c: f64 = a_c.iter().sum();
        loop {
            let tau2 = if a0c > 0.0 { Exp::new(a0c).expect("positive rate").sample(rng) } else { f64::INFINITY };
            let (mut tau, mut fire_critical) = if tau2 < tau1 { (tau2, true) } else { (tau1, false) };
            if tau >= t_end - t {
                tau = t_end - t;
                fire_critical = false;
            }
            let p: Vec<i64> = a_nc
                .iter()
                .map(|&ar| {
                    let lambda = ar * tau;
                    if lambda > 0.0 {
                        Poisson::new(lambda).expect("finite mean").sample(rng) as i64
                    } else {
                        0
                    }
                })
                .collect();
            let k = if theta == 0.0 {
                p
            } else {
                let active: Vec<bool> = a_nc.iter().map(|&v| v > 0.0).collect();
                match implicit_counts(model, &x, &a, &active, &p, tau, theta, cfg) {
                    Some(k) => k,
                    None => {
                        tau1 = tau * 0.5;
                        continue;
                    }
                }
            };
            let mut y = x.clone();
            for (r, &kr) in k.iter().enumerate() {
                if kr != 0 {
                    model.fire(&mut y, r, kr);
                }
            }
            if fire_critical {
                let r = choose(&a_c, rng.random::<f64>() * a0c);
                model.fire(&mut y, r, 1);
            }
            if y.iter().any(|&v| v < 0) {
                tau1 = tau * 0.5;
                rejected += 1;
                continue;
            }
            t = if tau == t_end - t { t_end } else { t + tau };
            x = y;
            obs.record(t, &x, None);
            break;
        }
    }
    (false, rejected)
}

fn leap_with(
    method: StochasticMethod,
    model: &JumpModel,
    x0: &[i64],
    t_end: f64,
    cfg: &LeapConfig,
    seed: u64,
) -> Result<JumpTrajectory, StochasticError> {
    Simulator::new(model.clone(), method).with_leap(*cfg).run(x0, t_end, seed)
}

pub fn explicit_tau_leap(
    model: &JumpModel,
    x0: &[i64],
    t_end: f64,
    cfg: &LeapConfig,
    seed: u64,
) -> Result<JumpTrajectory, StochasticError> {
    leap_with(StochasticMethod::Explicit, model, x0, t_end, cfg, seed)
}

pub fn implicit_tau_leap(
    model: &JumpModel,
    x0: &[i64],
    t_end: f64,
    cfg: &LeapConfig,
    seed: u64,
) -> Result<JumpTrajectory, StochasticError> {
    leap_with(StochasticMethod::Implicit, model, x0, t_end, cfg, seed)
}

pub fn trapezoidal_tau_leap(
    model: &JumpModel,
    x0: &[i64],
    t_end: f64,
    cfg: &LeapConfig,
    seed: u64,
) -> Result<JumpTrajectory, StochasticError> {
    leap_with(StochasticMethod::Trapezoidal, model, x0, t_end, cfg, seed)
}
