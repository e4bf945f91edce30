//! Rate-coefficient estimation from concentration time series.
//!
//! The fit minimizes `Σᵢ ‖c(tᵢ; k) − obsᵢ‖²` over the rate coefficients,
//! where `c(t; k)` solves the mass-action ODE from known initial
//! concentrations. Parameters are `ln k`, which keeps every trial point
//! positive and makes the problem scale invariant.

mod lm;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{levenberg_marquardt, standard_errors, LmConfig, LmOutcome};

use crate::deterministic::{fmt_f64, simulate, IntegratorConfig, SolverError};
use crate::model::{arrhenius, ModelError, ReactionNetwork, GAS_CONSTANT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("data line {line}: {message}")]
    Data { line: usize, message: String },
    #[error("species '{0}' is not an internal species of the network")]
    UnknownSpecies(String),
    #[error("initial rate coefficients must be positive and finite")]
    InitialRates,
    #[error("model evaluation failed at the initial point: {0}")]
    Initial(SolverError),
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How synthetic observations were perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    None,
    /// Independent draws from `U(lo, hi)` added to each value.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Independent `N(0, σ²)` draws added to each value.
    Gaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub noise: Noise,
    pub seed: u64,
}

/// Observations of some internal species at a set of times. Missing
/// values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub species: Vec<String>,
    /// `observations[row][column]`.
    pub observations: Vec<Vec<Option<f64>>>,
    pub noise: Option<NoiseRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Reads CSV with header `t,<species…>`; blank cells are missing
    /// values. Rows are sorted by time.
    pub fn from_csv(text: &str) -> Result<Self, EstimationError> {
        let mut reader =
            csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let data_err = |line: usize, message: String| EstimationError::Data { line, message };
        let header = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
        if header.get(0) != Some("t") || header.len() < 2 {
            return Err(data_err(1, "header must be 't' followed by species names".into()));
        }
        let species: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows: Vec<(f64, Vec<Option<f64>>)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                data_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let parse = |cell: &str| -> Result<f64, EstimationError> {
                let v: f64 = cell.parse().map_err(|_| data_err(line, format!("'{cell}' is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(data_err(line, format!("'{cell}' is not finite")))
                }
            };
            let t = parse(&rec[0])?;
            if t < 0.0 {
                return Err(data_err(line, "times must be nonnegative".into()));
            }
            let obs = rec
                .iter()
                .skip(1)
                .map(|c| if c.is_empty() { Ok(None) } else { parse(c).map(Some) })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((t, obs));
        }
        if rows.is_empty() {
            return Err(data_err(1, "no data rows".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, observations) = rows.into_iter().unzip();
        Ok(Dataset { times, species, observations, noise: None })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.species {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.observations) {
            out.push_str(&fmt_f64(*t));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Number of observed (non-missing) values.
    pub fn num_values(&self) -> usize {
        self.observations.iter().flatten().filter(|v| v.is_some()).count()
    }
}

fn model_config() -> IntegratorConfig {
    IntegratorConfig::default().with_tolerances(1e-10, 1e-12)
}

/// Model solution at `times` (any order, repeats allowed) for the
/// internal species at `columns`.
fn solve_at(
    network: &ReactionNetwork,
    k: &[f64],
    c0: &[f64],
    times: &[f64],
    columns: &[usize],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<f64>>, SolverError> {
    let mut grid: Vec<f64> = times.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let t_last = *grid.last().unwrap_or(&0.0);
    let states: Vec<Vec<f64>> = if t_last > 0.0 {
        let tr = simulate(network, k, c0, (0.0, t_last), &cfg.clone().with_output_times(grid.clone()))?;
        tr.states
    } else {
        crate::model::check_len("initial state entries", network.num_internal(), c0.len())?;
        vec![c0.to_vec(); grid.len()]
    };
    Ok(times
        .iter()
        .map(|t| {
            let i = grid.partition_point(|g| g < t);
            columns.iter().map(|&j| states[i][j]).collect()
        })
        .collect())
}

/// Noisy observations of the solution from `c0` with coefficients
/// `k_true`. `observed` selects species (all internal species if `None`).
pub fn synth_data(
    network: &ReactionNetwork,
    k_true: &[f64],
    c0: &[f64],
    times: &[f64],
    observed: Option<&[String]>,
    noise: Noise,
    seed: u64,
) -> Result<Dataset, EstimationError> {
    let names = network.internal_names();
    let species: Vec<String> = observed.map_or_else(|| names.clone(), |o| o.to_vec());
    let columns = column_indices(network, &species)?;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| t < 0.0) {
        return Err(EstimationError::Data { line: 0, message: "times must be nonnegative and increasing".into() });
    }
    let clean = solve_at(network, k_true, c0, times, &columns, &model_config())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = match noise {
        Noise::Gaussian { sigma } => Some(
            Normal::new(0.0, sigma).map_err(|e| EstimationError::Data { line: 0, message: format!("noise: {e}") })?,
        ),
        _ => None,
    };
    let observations = clean
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| {
                    Some(match noise {
                        Noise::None => v,
                        Noise::Uniform { lo, hi } => v + lo + (hi - lo) * rng.random::<f64>(),
                        Noise::Gaussian { .. } => v + normal.unwrap().sample(&mut rng),
                    })
                })
                .collect()
        })
        .collect();
    Ok(Dataset { times: times.to_vec(), species, observations, noise: Some(NoiseRecord { noise, seed }) })
}

fn column_indices(network: &ReactionNetwork, species: &[String]) -> Result<Vec<usize>, EstimationError> {
    let names = network.internal_names();
    species
        .iter()
        .map(|s| names.iter().position(|n| n == s).ok_or_else(|| EstimationError::UnknownSpecies(s.clone())))
        .collect()
}

/// A fitting problem: network, data, and the known initial state.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    pub network: &'a ReactionNetwork,
    pub dataset: &'a Dataset,
    pub c0: &'a [f64],
}

impl FitProblem<'_> {
    fn residuals(&self, k: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>, EstimationError> {
        let columns = column_indices(self.network, &self.dataset.species)?;
        let model = solve_at(self.network, k, self.c0, &self.dataset.times, &columns, cfg)?;
        Ok(model
            .iter()
            .zip(&self.dataset.observations)
            .flat_map(|(m, o)| m.iter().zip(o).filter_map(|(mv, ov)| ov.map(|ov| mv - ov)))
            .collect())
    }
}

/// Sum of squared residuals at `k`; missing observations are skipped.
pub fn objective(problem: &FitProblem, k: &[f64]) -> Result<f64, EstimationError> {
    Ok(problem.residuals(k, &model_config())?.iter().map(|r| r * r).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub lm: LmConfig,
    /// Integrator tolerances for model evaluations.
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { lm: LmConfig::default(), rtol: 1e-10, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub k_hat: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Finite-difference standard errors of `k_hat`, when the problem has
    /// more values than parameters and a regular Jacobian.
    pub std_errors: Option<Vec<f64>>,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Levenberg–Marquardt estimate of all rate coefficients from `k_init`.
pub fn fit_rates(problem: &FitProblem, k_init: &[f64], cfg: &FitConfig) -> Result<FitResult, EstimationError> {
    crate::model::check_len("initial rate coefficients", problem.network.num_steps(), k_init.len())?;
    if k_init.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(EstimationError::InitialRates);
    }
    let icfg = IntegratorConfig::default().with_tolerances(cfg.rtol, cfg.atol);
    // fail early with the real error if the starting point cannot be solved
    problem.residuals(k_init, &icfg).map_err(|e| match e {
        EstimationError::Solver(s) => EstimationError::Initial(s),
        other => other,
    })?;
    let f = |p: &[f64]| {
        let k: Vec<f64> = p.iter().map(|v| v.exp()).collect();
        problem.residuals(&k, &icfg).ok()
    };
    let p0: Vec<f64> = k_init.iter().map(|k| k.ln()).collect();
    let out = levenberg_marquardt(f, &p0, &cfg.lm)
        .ok_or_else(|| EstimationError::IllPosed("model evaluation failed while differentiating".into()))?;
    let k_hat: Vec<f64> = out.params.iter().map(|p| p.exp()).collect();
    // dk = k dp
    let std_errors =
        standard_errors(&out.jacobian, out.sse).map(|se| se.iter().zip(&k_hat).map(|(s, k)| s * k).collect());
    Ok(FitResult { k_hat, sse: out.sse, iterations: out.iterations, converged: out.converged, std_errors })
}

/// Arrhenius parameters `k(T) = k0 Tⁿ exp(−A/(R T))` of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrheniusParams {
    pub k0: f64,
    pub n: f64,
    /// Activation energy, J/mol.
    pub activation: f64,
}

impl ArrheniusParams {
    pub fn rate(&self, temperature: f64) -> Result<f64, ModelError> {
        arrhenius(self.k0, self.n, self.activation, temperature, GAS_CONSTANT)
    }
}

/// Data recorded at one temperature.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub temperature: f64,
    pub dataset: Dataset,
    pub c0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrheniusFit {
    pub params: Vec<ArrheniusParams>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits Arrhenius parameters of every step jointly to experiments at
/// several temperatures. With `fit_exponent` false the exponents stay at
/// their initial values. Needs at least three distinct temperatures (two
/// with a fixed exponent).
pub fn fit_arrhenius(
    network: &ReactionNetwork,
    experiments: &[Experiment],
    init: &[ArrheniusParams],
    fit_exponent: bool,
    cfg: &FitConfig,
) -> Result<ArrheniusFit, EstimationError> {
    crate::model::check_len("Arrhenius parameter sets", network.num_steps(), init.len())?;
    let mut temps: Vec<f64> = experiments.iter().map(|e| e.temperature).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    let needed = if fit_exponent { 3 } else { 2 };
    if temps.len() < needed {
        return Err(EstimationError::IllPosed(format!(
            "{} distinct temperature(s) cannot determine {needed} Arrhenius parameters per step",
            temps.len()
        )));
    }
    if init.iter().any(|p| !(p.k0 > 0.0 && p.k0.is_finite())) {
        return Err(EstimationError::InitialRates);
    }
    let per = if fit_exponent { 3 } else { 2 };
    // parameters per step: ln k0, A/(R·1000) and optionally n
    let unpack = |p: &[f64]| -> Vec<ArrheniusParams> {
        init.iter()
            .enumerate()
            .map(|(r, p0)| ArrheniusParams {
                k0: p[per * r].exp(),
                activation: p[per * r + 1] * GAS_CONSTANT * 1000.0,
                n: if fit_exponent { p[per * r + 2] } else { p0.n },
            })
            .collect()
    };
    let icfg = IntegratorConfig::default().with_tolerances(cfg.rtol, cfg.atol);
    let f = |p: &[f64]| -> Option<Vec<f64>> {
        let params = unpack(p);
        let mut res = Vec::new();
        for e in experiments {
            let k: Vec<f64> = params.iter().map(|a| a.rate(e.temperature)).collect::<Result<_, _>>().ok()?;
            let problem = FitProblem { network, dataset: &e.dataset, c0: &e.c0 };
            res.extend(problem.residuals(&k, &icfg).ok()?);
        }
        Some(res)
    };
    let p0: Vec<f64> = init
        .iter()
        .flat_map(|a| {
            let mut v = vec![a.k0.ln(), a.activation / (GAS_CONSTANT * 1000.0)];
            if fit_exponent {
                v.push(a.n);
            }
            v
        })
        .collect();
    if f(&p0).is_none() {
        return Err(EstimationError::IllPosed("model evaluation failed at the initial parameters".into()));
    }
    let out = levenberg_marquardt(f, &p0, &cfg.lm)
        .ok_or_else(|| EstimationError::IllPosed("model evaluation failed while differentiating".into()))?;
    Ok(ArrheniusFit { params: unpack(&out.params), sse: out.sse, iterations: out.iterations, converged: out.converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::linear_times;
    use crate::parser::parse_network;

    fn two_x() -> ReactionNetwork {
        parse_network("2 X <-> X, 0.33, 0.72").unwrap()
    }

    #[test]
    fn reference_grid_has_36_rows() {
        let times = linear_times(0.0, 7.0, 36);
        let d =
            synth_data(&two_x(), &[0.33, 0.72], &[2.0], &times, None, Noise::Uniform { lo: 0.0, hi: 0.01 }, 1).unwrap();
        assert_eq!(d.len(), 36);
        assert_eq!(d.species, vec!["X"]);
        let one = synth_data(&two_x(), &[0.33, 0.72], &[2.0], &[1.0], None, Noise::None, 1).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn zero_noise_is_the_solution() {
        let times = [0.0, 0.5, 3.0];
        let d = synth_data(&two_x(), &[0.33, 0.72], &[2.0], &times, None, Noise::None, 3).unwrap();
        // x' = −0.33x² + 0.72x has the logistic solution with x∞ = 0.72/0.33
        let (a, b) = (0.72, 0.33);
        let sol = |t: f64| {
            let xi = a / b;
            xi / (1.0 + (xi / 2.0 - 1.0) * (-a * t).exp())
        };
        for (t, row) in times.iter().zip(&d.observations) {
            assert!((row[0].unwrap() - sol(*t)).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let text = "t,A,B\n1.0,0.5,\n0.0,1,0\n2, ,0.25\n";
        let d = Dataset::from_csv(text).unwrap();
        assert_eq!(d.times, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.observations[1], vec![Some(0.5), None]);
        assert_eq!(d.observations[2], vec![None, Some(0.25)]);
        assert_eq!(d.num_values(), 4);
        assert_eq!(Dataset::from_csv(&d.to_csv()).unwrap(), d);
    }

    #[test]
    fn malformed_csv() {
        assert!(matches!(Dataset::from_csv("t,A\n0,abc\n"), Err(EstimationError::Data { line: 2, .. })));
        assert!(matches!(Dataset::from_csv("time,A\n0,1\n"), Err(EstimationError::Data { line: 1, .. })));
        assert!(Dataset::from_csv("t,A\n0,1,2\n").is_err());
        assert!(Dataset::from_csv("t,A\n").is_err());
    }

    #[test]
    fn objective_matches_direct_sum() {
        let net = two_x();
        let times = linear_times(0.0, 2.0, 5);
        let d = synth_data(&net, &[0.33, 0.72], &[2.0], &times, None, Noise::Gaussian { sigma: 0.01 }, 5).unwrap();
        let problem = FitProblem { network: &net, dataset: &d, c0: &[2.0] };
        let k = [0.4, 0.6];
        let tr = simulate(&net, &k, &[2.0], (0.0, 2.0), &model_config().with_output_times(times.clone())).unwrap();
        let direct: f64 = tr.states.iter().zip(&d.observations).map(|(s, o)| (s[0] - o[0].unwrap()).powi(2)).sum();
        assert!((objective(&problem, &k).unwrap() - direct).abs() < 1e-12);
        let clean = synth_data(&net, &[0.33, 0.72], &[2.0], &times, None, Noise::None, 5).unwrap();
        let p = FitProblem { network: &net, dataset: &clean, c0: &[2.0] };
        assert!(objective(&p, &[0.33, 0.72]).unwrap() < 1e-18);
    }

    #[test]
    fn start_at_truth() {
        let net = two_x();
        let times = linear_times(0.0, 7.0, 36);
        let d = synth_data(&net, &[0.33, 0.72], &[2.0], &times, None, Noise::None, 0).unwrap();
        let fit =
            fit_rates(&FitProblem { network: &net, dataset: &d, c0: &[2.0] }, &[0.33, 0.72], &FitConfig::default())
                .unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2);
        assert!((fit.k_hat[0] - 0.33).abs() < 1e-6 && (fit.k_hat[1] - 0.72).abs() < 1e-6);
    }

    #[test]
    fn first_order_recovery() {
        let net = parse_network("A -> B, 0.8").unwrap();
        let times = linear_times(0.0, 4.0, 21);
        let d = synth_data(&net, &[0.8], &[1.0, 0.0], &times, Some(&["A".into()]), Noise::None, 0).unwrap();
        let problem = FitProblem { network: &net, dataset: &d, c0: &[1.0, 0.0] };
        let fit = fit_rates(&problem, &[1.6], &FitConfig::default()).unwrap();
        assert!((fit.k_hat[0] - 0.8).abs() < 1e-5, "{fit:?}");
        // grid search oracle: the objective is larger one grid step away
        let at = |k: f64| objective(&problem, &[k]).unwrap();
        assert!(at(fit.k_hat[0]) <= at(fit.k_hat[0] + 1e-3) && at(fit.k_hat[0]) <= at(fit.k_hat[0] - 1e-3));
    }

    #[test]
    fn column_order_does_not_matter() {
        let net = parse_network("A -> B, 0.8\nB -> C, 0.3").unwrap();
        let times = linear_times(0.0, 5.0, 11);
        let c0 = [1.0, 0.0, 0.0];
        let noise = Noise::Gaussian { sigma: 0.005 };
        let d = synth_data(&net, &[0.8, 0.3], &c0, &times, Some(&["A".into(), "B".into()]), noise, 2).unwrap();
        let mut swapped = d.clone();
        swapped.species.reverse();
        swapped.observations.iter_mut().for_each(|r| r.reverse());
        let cfg = FitConfig::default();
        let a = fit_rates(&FitProblem { network: &net, dataset: &d, c0: &c0 }, &[0.5, 0.5], &cfg).unwrap();
        let b = fit_rates(&FitProblem { network: &net, dataset: &swapped, c0: &c0 }, &[0.5, 0.5], &cfg).unwrap();
        for j in 0..2 {
            assert!((a.k_hat[j] - b.k_hat[j]).abs() < 1e-7);
        }
        assert!(a.std_errors.is_some());
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert!(json["k_hat"].is_array() && json["converged"].is_boolean());
    }

    #[test]
    fn unknown_species_and_bad_start() {
        let net = two_x();
        let d =
            Dataset { times: vec![0.0], species: vec!["Q".into()], observations: vec![vec![Some(1.0)]], noise: None };
        let p = FitProblem { network: &net, dataset: &d, c0: &[2.0] };
        assert!(matches!(objective(&p, &[1.0, 1.0]), Err(EstimationError::UnknownSpecies(_))));
        assert!(matches!(fit_rates(&p, &[0.0, 1.0], &FitConfig::default()), Err(EstimationError::InitialRates)));
    }

    #[test]
    fn arrhenius_recovery_and_ill_posedness() {
        let net = parse_network("A -> B, 1").unwrap();
        let truth = ArrheniusParams { k0: 50.0, n: 0.5, activation: 2.0e4 };
        let times = linear_times(0.0, 5.0, 11);
        let experiments: Vec<Experiment> = [300.0, 330.0, 360.0, 400.0]
            .iter()
            .map(|&temp| {
                let k = truth.rate(temp).unwrap();
                let dataset = synth_data(&net, &[k], &[1.0, 0.0], &times, None, Noise::None, 0).unwrap();
                Experiment { temperature: temp, dataset, c0: vec![1.0, 0.0] }
            })
            .collect();
        let init = [ArrheniusParams { k0: 10.0, n: 0.5, activation: 1.5e4 }];
        let fit = fit_arrhenius(&net, &experiments, &init, false, &FitConfig::default()).unwrap();
        let p = fit.params[0];
        assert!((p.k0 / truth.k0 - 1.0).abs() < 1e-3, "{p:?}");
        assert!((p.activation / truth.activation - 1.0).abs() < 1e-3, "{p:?}");
        let single = &experiments[..1];
        assert!(matches!(
            fit_arrhenius(&net, single, &init, true, &FitConfig::default()),
            Err(EstimationError::IllPosed(_))
        ));
    }
}
