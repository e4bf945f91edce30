//! Ensembles of independent runs sampled on a fixed time grid.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{run_rng, Observer, Simulator, StochasticError};
use crate::deterministic::fmt_f64;

/// Samples a path at grid times: the state at `g` is the last state with
/// time `≤ g`.
struct GridSampler<'a> {
    grid: &'a [f64],
    next: usize,
    current: Vec<i64>,
    samples: Vec<Vec<i64>>,
}

impl Observer for GridSampler<'_> {
    fn record(&mut self, t: f64, x: &[i64], _fired: Option<usize>) {
        while self.next < self.grid.len() && self.grid[self.next] < t {
            self.samples.push(self.current.clone());
            self.next += 1;
        }
        self.current.clear();
        self.current.extend_from_slice(x);
    }
}

impl GridSampler<'_> {
    fn finish(mut self) -> Vec<Vec<i64>> {
        while self.samples.len() < self.grid.len() {
            self.samples.push(self.current.clone());
        }
        self.samples
    }
}

/// Counts at `times` for each of `n_runs` runs: `[run][time][species]`.
/// Run `i` uses stream `i` of `seed`, so results do not depend on thread
/// scheduling.
pub fn ensemble_samples(
    sim: &Simulator,
    x0: &[i64],
    n_runs: usize,
    seed: u64,
    times: &[f64],
) -> Result<Vec<Vec<Vec<i64>>>, StochasticError> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(StochasticError::Config("output times must be nonnegative and sorted".into()));
    }
    let t_end = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut sampler = GridSampler { grid: times, next: 0, current: Vec::new(), samples: Vec::new() };
            sim.run_observed(x0, t_end, &mut run_rng(seed, run as u64), &mut sampler)?;
            Ok(sampler.finish())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    /// `mean[time][species]`.
    pub mean: Vec<Vec<f64>>,
    /// Unbiased sample variance; zero for a single run.
    pub variance: Vec<Vec<f64>>,
    pub runs: usize,
}

impl EnsembleStats {
    pub fn from_samples(species: &[String], times: &[f64], samples: &[Vec<Vec<i64>>]) -> Self {
        let n = samples.len();
        let d = species.len();
        let mut mean = vec![vec![0.0; d]; times.len()];
        let mut variance = vec![vec![0.0; d]; times.len()];
        for (k, (m, v)) in mean.iter_mut().zip(variance.iter_mut()).enumerate() {
            for j in 0..d {
                // Welford, in run order
                let (mut mu, mut m2) = (0.0, 0.0);
                for (i, run) in samples.iter().enumerate() {
                    let x = run[k][j] as f64;
                    let delta = x - mu;
                    mu += delta / (i + 1) as f64;
                    m2 += delta * (x - mu);
                }
                m[j] = mu;
                v[j] = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
            }
        }
        EnsembleStats { species: species.to_vec(), times: times.to_vec(), mean, variance, runs: n }
    }

    /// CSV with header `t,mean_<s>…,var_<s>…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.species {
            write!(out, ",mean_{s}").unwrap();
        }
        for s in &self.species {
            write!(out, ",var_{s}").unwrap();
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&fmt_f64(*t));
            for v in self.mean[k].iter().chain(&self.variance[k]) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-time mean and variance over `n_runs` runs.
pub fn ensemble(
    sim: &Simulator,
    x0: &[i64],
    n_runs: usize,
    seed: u64,
    times: &[f64],
) -> Result<EnsembleStats, StochasticError> {
    if n_runs == 0 {
        return Err(StochasticError::Config("at least one run is needed".into()));
    }
    let samples = ensemble_samples(sim, x0, n_runs, seed, times)?;
    Ok(EnsembleStats::from_samples(sim.model.species(), times, &samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;
    use crate::stochastic::{JumpModel, StochasticMethod, StochasticRates};

    fn death() -> Simulator {
        let n = parse_network("X -> 0, 1").unwrap();
        let m = JumpModel::new(&n, &StochasticRates::direct(&n, &[1.0]).unwrap()).unwrap();
        Simulator::new(m, StochasticMethod::Direct)
    }

    #[test]
    fn single_run_matches_trajectory() {
        let sim = death();
        let times = [0.0, 0.5, 1.0, 2.0];
        let stats = ensemble(&sim, &[30], 1, 4, &times).unwrap();
        let tr = sim.run(&[30], 2.0, 4).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert_eq!(stats.mean[k][0], tr.state_at(t)[0] as f64);
            assert_eq!(stats.variance[k][0], 0.0);
        }
    }

    #[test]
    fn binomial_moments() {
        let (x0, t) = (50i64, 0.7f64);
        let stats = ensemble(&death(), &[x0], 4000, 9, &[t]).unwrap();
        let p = (-t).exp();
        let mean = x0 as f64 * p;
        let var = x0 as f64 * p * (1.0 - p);
        let se = (var / 4000.0).sqrt();
        assert!((stats.mean[0][0] - mean).abs() < 4.0 * se);
        // the sample variance of n draws has sd ≈ var·sqrt(2/(n−1)) here
        assert!((stats.variance[0][0] - var).abs() < 4.0 * var * (2.0f64 / 3999.0).sqrt() * 1.5);
    }

    #[test]
    fn deterministic_under_parallelism() {
        let a = ensemble(&death(), &[20], 64, 3, &[0.1, 1.0]).unwrap();
        let b = ensemble(&death(), &[20], 64, 3, &[0.1, 1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv().lines().next().unwrap(), "t,mean_X,var_X");
    }
}
