//! Adaptive integration of the induced kinetic differential equation.
//!
//! Two methods share one step-size controller: a linearly implicit
//! Rosenbrock scheme for stiff problems ([`Method::Stiff`]) and
//! Dormand–Prince 5(4) ([`Method::Explicit`]). The controller uses
//! `h_new = h · clamp(0.9 · err^(−1/(q+1)), 0.2, 5)` with `q` the order of the
//! embedded solution and `err` the RMS of the error weighted by
//! `atol + rtol · max(|y|, |y_new|)`.

mod builtin;
mod dopri;
mod rosenbrock;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{check_len, MassAction, ModelError, ReactionNetwork};

pub use builtin::{builtin, builtin_names, Builtin};
pub use rosenbrock::stiff_step;

/// An autonomous first-order system `y' = f(y)` with analytic Jacobian.
/// `t` is passed through for interface symmetry.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>);
}

impl OdeSystem for MassAction {
    fn dim(&self) -> usize {
        MassAction::dim(self)
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.rhs_into(y, dy);
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut DMatrix<f64>) {
        self.jacobian_into(y, jac);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stiff,
    Explicit,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stiff" | "rosenbrock" => Ok(Method::Stiff),
            "explicit" | "dopri" | "rk45" => Ok(Method::Explicit),
            _ => Err(format!("unknown method '{s}' (expected stiff or explicit)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    /// When set, the trajectory holds exactly these times (steps are
    /// shortened to land on them); otherwise every accepted step.
    pub output_times: Option<Vec<f64>>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Stiff,
            rtol: 1e-6,
            atol: 1e-12,
            max_steps: 10_000_000,
            initial_step: None,
            output_times: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_output_times(mut self, times: Vec<f64>) -> Self {
        self.output_times = Some(times);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("step limit of {steps} exceeded at t = {t}")]
    StepLimit { t: f64, steps: usize },
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("singular iteration matrix at t = {t}")]
    Singular { t: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

/// Formats a double so that parsing it back gives the same value.
pub(crate) fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Values of one species over time.
    pub fn column(&self, species: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[species]).collect()
    }

    /// CSV with header `t,<species...>`, one row per output time.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "t,{}", self.species.join(",")).unwrap();
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&fmt_f64(*t));
            for v in state {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn linear_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect()
}

/// `t0` followed by `n` logarithmically spaced times from `first` to `t1`.
pub fn log_times(t0: f64, first: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && first > t0 && first < t1 && first > 0.0);
    let (a, b) = (first.ln(), t1.ln());
    let mut times = vec![t0];
    times.extend((0..n).map(|i| if i == n - 1 { t1 } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }));
    times
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], rtol: f64, atol: f64) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    order: f64,
) -> f64 {
    let n = y0.len();
    if n == 0 {
        return 1.0;
    }
    let sc: Vec<f64> = y0.iter().map(|y| cfg.atol + cfg.rtol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    system.rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / (order + 1.0)) };
    (100.0 * h0).min(h1)
}

/// Integrates `system` from `(t0, y0)` to `t1`. Steps whose result has a
/// component below `−100·atol` are rejected when `nonnegative` is set.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    nonnegative: bool,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, SolverStats), SolverError> {
    if !(t1 > t0) {
        return Err(SolverError::Invalid(format!("t1 = {t1} must exceed t0 = {t0}")));
    }
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0 && cfg.max_steps >= 1) {
        return Err(SolverError::Invalid("tolerances must be positive and max_steps ≥ 1".into()));
    }
    check_len("state entries", system.dim(), y0.len())?;
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { t: t0 });
    }
    if let Some(out) = &cfg.output_times {
        if out.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolverError::Invalid("output times must be strictly increasing".into()));
        }
        if out.first().is_some_and(|&t| t < t0) || out.last().is_some_and(|&t| t > t1) {
            return Err(SolverError::Invalid("output times must lie within [t0, t1]".into()));
        }
    }
    let n = y0.len();
    let q = match cfg.method {
        Method::Stiff => rosenbrock::EMBEDDED_ORDER,
        Method::Explicit => dopri::EMBEDDED_ORDER,
    };
    let mut stats = SolverStats { accepted: 0, rejected: 0, method: cfg.method };
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut next_out = 0;
    let outputs = cfg.output_times.as_deref();
    match outputs {
        Some(out) => {
            while next_out < out.len() && out[next_out] <= t0 {
                times.push(out[next_out]);
                states.push(y0.to_vec());
                next_out += 1;
            }
        }
        None => {
            times.push(t0);
            states.push(y0.to_vec());
        }
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    system.rhs(t, &y, &mut f);
    let mut jac = DMatrix::zeros(n, n);
    let mut h = cfg.initial_step.unwrap_or_else(|| initial_step(system, t0, y0, &f, cfg, q + 1.0));
    h = h.min(t1 - t0);
    let mut last_rejected = false;
    let mut jac_current = false;
    let mut saw_nonfinite = false;

    while t < t1 && outputs.is_none_or(|o| next_out < o.len()) {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(SolverError::StepLimit { t, steps: cfg.max_steps });
        }
        let target = outputs.map_or(t1, |o| o[next_out]);
        let (h_use, clipped) = if t + h >= target { (target - t, true) } else { (h, false) };
        if h_use <= 4.0 * f64::EPSILON * t.abs() || h_use < 1e-300 {
            return Err(if saw_nonfinite {
                SolverError::NonFinite { t }
            } else {
                SolverError::StepUnderflow { t, h: h_use }
            });
        }
        let attempt = match cfg.method {
            Method::Stiff => {
                if !jac_current {
                    system.jacobian(t, &y, &mut jac);
                    jac_current = true;
                }
                rosenbrock::stiff_step_with(system, t, &y, &f, &jac, h_use).map(|(yn, e)| (yn, None, e))
            }
            Method::Explicit => {
                let (yn, fnew, e) = dopri::step(system, t, &y, &f, h_use);
                Ok((yn, Some(fnew), e))
            }
        };
        let (y_new, f_new, err) = match attempt {
            Ok(v) => v,
            Err(SolverError::Singular { .. }) => {
                stats.rejected += 1;
                h = h_use * 0.25;
                last_rejected = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let errn = error_norm(&err, &y, &y_new, cfg.rtol, cfg.atol);
        let finite = errn.is_finite() && y_new.iter().all(|v| v.is_finite());
        let negative = nonnegative && y_new.iter().any(|&v| v < -100.0 * cfg.atol);
        if finite && errn <= 1.0 && !negative {
            t = if clipped { target } else { t + h_use };
            y = y_new;
            match f_new {
                Some(fv) => f = fv,
                None => system.rhs(t, &y, &mut f),
            }
            jac_current = false;
            stats.accepted += 1;
            saw_nonfinite = false;
            let mut fac = (0.9 * errn.max(1e-10).powf(-1.0 / (q + 1.0))).clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            let proposed = h_use * fac;
            h = if clipped { h.max(proposed) } else { proposed };
            match outputs {
                Some(o) => {
                    if clipped && o[next_out] == target {
                        times.push(t);
                        states.push(y.clone());
                        next_out += 1;
                    }
                }
                None => {
                    times.push(t);
                    states.push(y.clone());
                }
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            saw_nonfinite |= !finite;
            let fac = if !finite {
                0.2
            } else if errn > 1.0 {
                (0.9 * errn.powf(-1.0 / (q + 1.0))).clamp(0.2, 0.9)
            } else {
                0.5
            };
            h = h_use * fac;
        }
    }
    Ok((times, states, stats))
}

/// Integrates the mass-action ODE of `network` with rates `k` from `c0`
/// over `t_span`.
pub fn simulate(
    network: &ReactionNetwork,
    k: &[f64],
    c0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory, SolverError> {
    let system = MassAction::new(network, k)?;
    check_len("initial state entries", system.dim(), c0.len())?;
    if c0.iter().any(|&c| !(c >= 0.0)) {
        return Err(SolverError::Invalid("initial concentrations must be nonnegative".into()));
    }
    let (times, states, stats) = integrate(&system, c0, t_span.0, t_span.1, cfg, true)?;
    Ok(Trajectory { species: network.internal_names(), times, states, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;

    #[test]
    fn linear_decay_matches_exponential() {
        let net = parse_network("A -> B, 1").unwrap();
        for method in [Method::Stiff, Method::Explicit] {
            let cfg = IntegratorConfig::default().with_method(method);
            let tr = simulate(&net, &[1.0], &[1.0, 0.0], (0.0, 1.0), &cfg).unwrap();
            let last = tr.last().unwrap();
            let e = (-1.0f64).exp();
            assert!((last[0] - e).abs() < 1e-5 * e, "{method:?} {}", last[0]);
            assert!((last[1] - (1.0 - e)).abs() < 1e-5);
            assert_eq!(*tr.times.last().unwrap(), 1.0);
        }
    }

    #[test]
    fn dense_times_are_hit_exactly() {
        let net = parse_network("A -> B, 1").unwrap();
        let times = linear_times(0.0, 2.0, 11);
        let cfg = IntegratorConfig::default().with_output_times(times.clone());
        let tr = simulate(&net, &[1.0], &[1.0, 0.0], (0.0, 2.0), &cfg).unwrap();
        assert_eq!(tr.times, times);
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - (-t).exp()).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let net = parse_network("A -> B, 1").unwrap();
        let cfg = IntegratorConfig::default();
        assert!(matches!(simulate(&net, &[1.0], &[1.0, 0.0], (1.0, 0.0), &cfg), Err(SolverError::Invalid(_))));
        assert!(matches!(simulate(&net, &[1.0], &[-1.0, 0.0], (0.0, 1.0), &cfg), Err(SolverError::Invalid(_))));
        assert!(matches!(simulate(&net, &[1.0], &[1.0], (0.0, 1.0), &cfg), Err(SolverError::Model(_))));
    }

    #[test]
    fn step_limit_reported() {
        let net = parse_network("A -> B, 1").unwrap();
        let cfg = IntegratorConfig { max_steps: 3, ..Default::default() };
        assert!(matches!(
            simulate(&net, &[1.0], &[1.0, 0.0], (0.0, 100.0), &cfg),
            Err(SolverError::StepLimit { steps: 3, .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x², finite-time blow-up at t = 1
        let net = parse_network("2 X -> 3 X, 1").unwrap();
        let err = simulate(&net, &[1.0], &[1.0], (0.0, 2.0), &IntegratorConfig::default()).unwrap_err();
        assert!(
            matches!(
                err,
                SolverError::StepUnderflow { .. } | SolverError::NonFinite { .. } | SolverError::StepLimit { .. }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn csv_header_and_precision() {
        let net = parse_network("A -> B, 1").unwrap();
        let cfg = IntegratorConfig::default().with_output_times(vec![0.0, 0.5]);
        let tr = simulate(&net, &[1.0], &[1.0, 0.0], (0.0, 0.5), &cfg).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,A,B"));
        let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[1], tr.states[1][0]);
    }

    #[test]
    fn log_spacing() {
        let t = log_times(0.0, 1e-5, 1e11, 17);
        assert_eq!(t.len(), 18);
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 1e11);
        assert!((t[2] / t[1] - 10.0).abs() < 1e-9);
    }
}
