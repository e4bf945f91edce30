//! Stochastic (jump Markov) model of a reaction network.
//!
//! Counts of the internal species jump by a column of γ each time a step
//! fires. Step `r` fires at rate `κ_r(x) = c_r ∏ C(x_m, α(m,r))`, the
//! number of distinct reactant combinations times the stochastic rate
//! constant. Deterministic coefficients convert to `c_r` through
//! [`convert_rate`].
//!
//! Simulation uses the direct method or τ-leaping (explicit, implicit,
//! trapezoidal). All methods take a seed; identical inputs and seed give
//! identical output.

mod direct;
mod ensemble;
mod leap;

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use direct::direct_method;
pub use ensemble::{ensemble, ensemble_samples, EnsembleStats};
pub use leap::{explicit_tau_leap, implicit_tau_leap, select_tau, trapezoidal_tau_leap};

use crate::deterministic::fmt_f64;
use crate::model::{ModelError, ReactionNetwork, AVOGADRO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("volume must be positive, got {0}")]
    Volume(f64),
    #[error("initial count of '{0}' is negative")]
    NegativeCount(String),
    #[error("end time must be positive, got {0}")]
    EndTime(f64),
    #[error("invalid leap settings: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Number of ways to pick `k` of `n` molecules, as a float.
fn binomial(n: i64, k: u32) -> f64 {
    if n < k as i64 {
        return 0.0;
    }
    let mut v = 1.0;
    for j in 0..k as i64 {
        v *= (n - j) as f64 / (j + 1) as f64;
    }
    v
}

/// `c_r ∏ C(x_m, α_m)` over the reactant side `(index into x, α)`.
pub fn propensity(reactants: &[(usize, u32)], x: &[i64], c: f64) -> f64 {
    reactants.iter().fold(c, |acc, &(m, a)| acc * binomial(x[m], a))
}

/// Stochastic rate constant of a step with deterministic coefficient
/// `k_det` and reactant coefficients `alpha`:
/// `k_det · ∏ α! · (N_A V)^(1 − order)`.
pub fn convert_rate(k_det: f64, alpha: &[u32], volume: f64, avogadro: f64) -> Result<f64, StochasticError> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(StochasticError::Volume(volume));
    }
    let order: u32 = alpha.iter().sum();
    let factorials: f64 = alpha.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product();
    Ok(k_det * factorials * (avogadro * volume).powi(1 - order as i32))
}

/// Per-step stochastic rate constants, with external species folded in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticRates {
    pub c: Vec<f64>,
    /// Volume (dm³) the constants were converted at.
    pub volume: Option<f64>,
    /// Deterministic coefficients they were converted from.
    pub derived_from: Option<Vec<f64>>,
}

impl StochasticRates {
    /// Converts deterministic coefficients at `volume`. External species
    /// enter through their fixed concentration, as in the deterministic
    /// model, and only internal reactants count towards the order.
    pub fn from_deterministic(network: &ReactionNetwork, k: &[f64], volume: f64) -> Result<Self, StochasticError> {
        crate::model::check_len("rate coefficients", network.num_steps(), k.len())?;
        let ext = network.external_factors();
        let c = network
            .steps()
            .iter()
            .enumerate()
            .map(|(r, step)| {
                let alpha: Vec<u32> =
                    step.reactants.iter().filter(|&&(m, _)| !network.species()[m].external).map(|&(_, a)| a).collect();
                convert_rate(k[r] * ext[r], &alpha, volume, AVOGADRO)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StochasticRates { c, volume: Some(volume), derived_from: Some(k.to_vec()) })
    }

    /// Uses `c` as stochastic constants directly; external levels still
    /// multiply in as `level^α`.
    pub fn direct(network: &ReactionNetwork, c: &[f64]) -> Result<Self, StochasticError> {
        crate::model::check_len("rate coefficients", network.num_steps(), c.len())?;
        let ext = network.external_factors();
        Ok(StochasticRates { c: c.iter().zip(&ext).map(|(a, b)| a * b).collect(), volume: None, derived_from: None })
    }
}

/// Counts ↔ concentrations at a volume.
pub fn counts_to_concentrations(x: &[i64], volume: f64) -> Vec<f64> {
    x.iter().map(|&v| v as f64 / (AVOGADRO * volume)).collect()
}

pub fn concentrations_to_counts(c: &[f64], volume: f64) -> Vec<i64> {
    c.iter().map(|&v| (v * AVOGADRO * volume).round() as i64).collect()
}

/// The jump process over the internal species.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    species: Vec<String>,
    /// Internal reactants per step, `(internal index, α)`.
    reactants: Vec<Vec<(usize, u32)>>,
    /// Nonzero entries of γ per step, `(internal index, γ)`.
    changes: Vec<Vec<(usize, i64)>>,
    c: Vec<f64>,
    /// Highest reactant order in which each species appears.
    max_order: Vec<u32>,
}

impl JumpModel {
    pub fn new(network: &ReactionNetwork, rates: &StochasticRates) -> Result<Self, StochasticError> {
        crate::model::check_len("rate constants", network.num_steps(), rates.c.len())?;
        if let Some(r) = rates.c.iter().position(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(ModelError::InvalidRate { step: r, rate: rates.c[r] }.into());
        }
        let internal = network.internal_indices();
        let mut map = vec![usize::MAX; network.num_species()];
        for (j, &i) in internal.iter().enumerate() {
            map[i] = j;
        }
        let mut reactants = Vec::new();
        let mut changes = Vec::new();
        let mut max_order = vec![0; internal.len()];
        for step in network.steps() {
            let re: Vec<(usize, u32)> =
                step.reactants.iter().filter(|&&(m, _)| map[m] != usize::MAX).map(|&(m, a)| (map[m], a)).collect();
            let order: u32 = re.iter().map(|&(_, a)| a).sum();
            for &(j, _) in &re {
                max_order[j] = max_order[j].max(order);
            }
            let mut delta = vec![0i64; internal.len()];
            for &(m, a) in &step.reactants {
                if map[m] != usize::MAX {
                    delta[map[m]] -= a as i64;
                }
            }
            for &(m, b) in &step.products {
                if map[m] != usize::MAX {
                    delta[map[m]] += b as i64;
                }
            }
            changes.push(delta.iter().enumerate().filter(|(_, &d)| d != 0).map(|(j, &d)| (j, d)).collect());
            reactants.push(re);
        }
        Ok(JumpModel { species: network.internal_names(), reactants, changes, c: rates.c.clone(), max_order })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn num_steps(&self) -> usize {
        self.c.len()
    }

    pub fn rate_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn propensities(&self, x: &[i64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = propensity(&self.reactants[r], x, self.c[r]);
        }
    }

    pub(crate) fn fire(&self, x: &mut [i64], r: usize, times: i64) {
        for &(j, d) in &self.changes[r] {
            x[j] += d * times;
        }
    }

    fn check_x0(&self, x0: &[i64]) -> Result<(), StochasticError> {
        crate::model::check_len("initial counts", self.dim(), x0.len())?;
        if let Some(j) = x0.iter().position(|&v| v < 0) {
            return Err(StochasticError::NegativeCount(self.species[j].clone()));
        }
        Ok(())
    }
}

/// Receives every new state; the state holds from `t` on.
pub(crate) trait Observer {
    fn record(&mut self, t: f64, x: &[i64], fired: Option<usize>);
}

/// A simulated path. Records are kept at every event (direct method) or
/// every leap; the state after the last record holds until `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    pub counts: Vec<Vec<i64>>,
    /// Step fired at each record after the first (direct method only).
    pub fired: Option<Vec<usize>>,
    pub t_end: f64,
    /// No step could fire before `t_end`.
    pub absorbed: bool,
    /// Leaps redrawn with a smaller τ to avoid negative counts.
    pub rejected_leaps: usize,
}

impl Observer for JumpTrajectory {
    fn record(&mut self, t: f64, x: &[i64], fired: Option<usize>) {
        self.times.push(t);
        self.counts.push(x.to_vec());
        if let (Some(f), Some(r)) = (self.fired.as_mut(), fired) {
            f.push(r);
        }
    }
}

impl JumpTrajectory {
    pub(crate) fn empty(species: &[String], t_end: f64, with_fired: bool) -> Self {
        JumpTrajectory {
            species: species.to_vec(),
            times: Vec::new(),
            counts: Vec::new(),
            fired: with_fired.then(Vec::new),
            t_end,
            absorbed: false,
            rejected_leaps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at time `t` (the last record at or before `t`).
    pub fn state_at(&self, t: f64) -> &[i64] {
        let k = self.times.partition_point(|&s| s <= t);
        &self.counts[k.saturating_sub(1)]
    }

    pub fn last(&self) -> &[i64] {
        self.counts.last().expect("trajectory has an initial record")
    }

    /// CSV with header `t,<species>` plus `,step` (1-based) for the direct
    /// method; the first row has an empty step cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for s in &self.species {
            write!(out, ",{s}").unwrap();
        }
        if self.fired.is_some() {
            out.push_str(",step");
        }
        out.push('\n');
        for (k, (t, x)) in self.times.iter().zip(&self.counts).enumerate() {
            out.push_str(&fmt_f64(*t));
            for v in x {
                write!(out, ",{v}").unwrap();
            }
            if let Some(f) = &self.fired {
                out.push(',');
                if k > 0 {
                    write!(out, "{}", f[k - 1] + 1).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Simulation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StochasticMethod {
    Direct,
    Explicit,
    Implicit,
    Trapezoidal,
}

impl FromStr for StochasticMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" | "ssa" => Ok(StochasticMethod::Direct),
            "explicit" => Ok(StochasticMethod::Explicit),
            "implicit" => Ok(StochasticMethod::Implicit),
            "trapezoidal" => Ok(StochasticMethod::Trapezoidal),
            other => Err(format!("unknown method '{other}' (direct, explicit, implicit, trapezoidal)")),
        }
    }
}

/// τ-leaping settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeapConfig {
    /// Leap-condition tolerance: bound on the relative change of
    /// propensities over one leap.
    pub epsilon: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Steps that can fire fewer than this many times before exhausting a
    /// reactant are simulated exactly.
    pub critical_threshold: i64,
    /// Use this τ instead of the leap-condition selector (no fallback to
    /// exact steps).
    pub fixed_tau: Option<f64>,
}

impl Default for LeapConfig {
    fn default() -> Self {
        LeapConfig { epsilon: 0.03, newton_tol: 1e-8, newton_max_iter: 50, critical_threshold: 10, fixed_tau: None }
    }
}

impl LeapConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_fixed_tau(mut self, tau: f64) -> Self {
        self.fixed_tau = Some(tau);
        self
    }

    fn validate(&self) -> Result<(), StochasticError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(StochasticError::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(t) = self.fixed_tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(StochasticError::Config(format!("fixed tau must be positive, got {t}")));
            }
        }
        if self.newton_tol <= 0.0 || self.newton_max_iter == 0 {
            return Err(StochasticError::Config("Newton tolerance and iteration limit must be positive".into()));
        }
        Ok(())
    }
}

/// Generator for run `run` of a seeded experiment. Each run has its own
/// stream, so runs are independent and can be simulated in any order.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// A model plus a method, ready to run.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: JumpModel,
    pub method: StochasticMethod,
    pub leap: LeapConfig,
}

impl Simulator {
    pub fn new(model: JumpModel, method: StochasticMethod) -> Self {
        Simulator { model, method, leap: LeapConfig::default() }
    }

    pub fn with_leap(mut self, leap: LeapConfig) -> Self {
        self.leap = leap;
        self
    }

    pub(crate) fn run_observed<O: Observer>(
        &self,
        x0: &[i64],
        t_end: f64,
        rng: &mut ChaCha8Rng,
        obs: &mut O,
    ) -> Result<(bool, usize), StochasticError> {
        self.model.check_x0(x0)?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(StochasticError::EndTime(t_end));
        }
        match self.method {
            StochasticMethod::Direct => Ok((direct::run(&self.model, x0, t_end, rng, obs), 0)),
            m => {
                self.leap.validate()?;
                let theta = match m {
                    StochasticMethod::Explicit => 0.0,
                    StochasticMethod::Implicit => 1.0,
                    _ => 0.5,
                };
                Ok(leap::run(&self.model, x0, t_end, &self.leap, theta, rng, obs))
            }
        }
    }

    /// One path from `x0` on `[0, t_end]`, run 0 of `seed`.
    pub fn run(&self, x0: &[i64], t_end: f64, seed: u64) -> Result<JumpTrajectory, StochasticError> {
        let mut traj = JumpTrajectory::empty(self.model.species(), t_end, self.method == StochasticMethod::Direct);
        let (absorbed, rejected) = self.run_observed(x0, t_end, &mut run_rng(seed, 0), &mut traj)?;
        traj.absorbed = absorbed;
        traj.rejected_leaps = rejected;
        Ok(traj)
    }
}
