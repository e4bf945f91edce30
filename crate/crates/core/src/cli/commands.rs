//! Subcommand implementations.

use std::path::Path;

use super::{
    check_output, compute, emit, read_text, usage, CliError, CliResult, DecomposeArgs, FitArgs, NetworkSource,
    SimulateArgs, StepsArgs, StochasticArgs, SynthArgs, VolpertArgs,
};
use crate::decomposition::{
    self, atomic_matrix, generate_steps, initial_preset, parse_overall, parse_species_file, species_indices,
    DecomposeOptions, DecompositionError, ElementaryStep, ElementaryStepSet, LpError, StepRules,
};
use crate::deterministic::{
    builtin, builtin_names, linear_times, log_times, simulate as integrate, Builtin, IntegratorConfig, Method,
    SolverError,
};
use crate::estimation::{fit_rates, synth_data, Dataset, EstimationError, FitConfig, FitProblem, Noise};
use crate::graphs::{export_dot, volpert_graph, volpert_index};
use crate::model::{ReactionNetwork, Species};
use crate::parser::{parse_document, parse_step_list};
use crate::plot::{line_plot, PlotOptions};
use crate::stochastic::{ensemble, JumpModel, LeapConfig, Simulator, StochasticMethod, StochasticRates};

struct Loaded {
    network: ReactionNetwork,
    builtin: Option<Builtin>,
}

/// Builtins resolve before files; `--file` and `--builtin` are explicit.
/// With `rates_optional`, file networks may omit rate coefficients.
fn load(src: &NetworkSource, rates_optional: bool) -> CliResult<Loaded> {
    let from_builtin = |name: &str| {
        builtin(name)
            .map(|b| Loaded { network: b.network.clone(), builtin: Some(b) })
            .ok_or_else(|| usage(format!("unknown builtin '{name}' (available: {})", builtin_names().join(", "))))
    };
    let from_file = |path: &Path| -> CliResult<Loaded> {
        let text = read_text(path)?;
        let network = parse_document(&text)
            .and_then(|d| d.to_network(!rates_optional))
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(Loaded { network, builtin: None })
    };
    match (&src.builtin, &src.file, &src.network) {
        (Some(_), Some(_), _) => Err(usage("give either --builtin or --file, not both")),
        (Some(b), None, None) => from_builtin(b),
        (None, Some(f), None) => from_file(f),
        (None, None, Some(n)) => match builtin(n) {
            Some(_) => from_builtin(n),
            None => from_file(Path::new(n)),
        },
        (None, None, None) => Err(usage("no network given (name a builtin or a network file)")),
        _ => Err(usage("network given twice")),
    }
}

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::Invalid(_) | SolverError::Model(_) => usage(e.to_string()),
        other => compute(other),
    }
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

fn plot_series(times: &[f64], names: &[String], rows: &[Vec<f64>], log_time: bool, y_label: &str) -> String {
    let series: Vec<Vec<f64>> = (0..names.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    line_plot(times, names, &series, &PlotOptions { log_time, x_label: "t".into(), y_label: y_label.into() })
}

pub(super) fn simulate(a: SimulateArgs) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    check_output(a.plot.as_deref())?;
    let Loaded { network, builtin } = load(&a.source, a.k.is_some())?;
    let k = a.k.clone().or_else(|| builtin.as_ref().map(|b| b.k.clone())).unwrap_or_else(|| network.rates());
    let c0 =
        a.c0.clone()
            .or_else(|| builtin.as_ref().map(|b| b.c0.clone()))
            .ok_or_else(|| usage("--c0 is required for network files"))?;
    let t0 = a.t0.unwrap_or(0.0);
    let t1 = a.t1.or(builtin.as_ref().map(|b| b.horizon)).ok_or_else(|| usage("--t1 is required for network files"))?;
    if !(t1 > t0) {
        return Err(usage(format!("--t1 ({t1}) must exceed --t0 ({t0})")));
    }
    let method: Method = a.method.as_deref().unwrap_or("stiff").parse().map_err(usage)?;
    let d = IntegratorConfig::default();
    let (rtol, atol) = (a.rtol.unwrap_or(d.rtol), a.atol.unwrap_or(d.atol));
    let mut cfg = d.with_method(method).with_tolerances(rtol, atol);
    if let Some(n) = a.points {
        if n < 2 {
            return Err(usage("--points must be at least 2"));
        }
        let times = if a.logt && t0 == 0.0 {
            log_times(0.0, 1e-6 * t1.min(1.0), t1, n - 1)
        } else if a.logt && t0 > 0.0 {
            let (l0, l1) = (t0.ln(), t1.ln());
            (0..n).map(|i| if i == n - 1 { t1 } else { (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp() }).collect()
        } else {
            linear_times(t0, t1, n)
        };
        cfg = cfg.with_output_times(times);
    }
    let tr = integrate(&network, &k, &c0, (t0, t1), &cfg).map_err(solver_error)?;
    eprintln!("{:?} integrator: {} accepted, {} rejected steps", tr.stats.method, tr.stats.accepted, tr.stats.rejected);
    emit(a.out.as_deref(), &tr.to_csv())?;
    if let Some(p) = &a.plot {
        super::write_atomic(p, &plot_series(&tr.times, &tr.species, &tr.states, a.logt, "concentration"))?;
    }
    Ok(())
}

pub(super) fn stochastic(a: StochasticArgs, default_method: &str) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    check_output(a.plot.as_deref())?;
    let rates_optional = a.k.is_some() || a.stochastic_rates.is_some();
    let Loaded { network, builtin } = load(&a.source, rates_optional)?;
    let method: StochasticMethod = a.method.as_deref().unwrap_or(default_method).parse().map_err(usage)?;
    let x0 =
        a.x0.clone()
            .or_else(|| builtin.as_ref().map(|b| b.x0.clone()))
            .ok_or_else(|| usage("--x0 is required for network files"))?;
    let rates = match &a.stochastic_rates {
        Some(c) => StochasticRates::direct(&network, c),
        None => {
            let k = a.k.clone().or_else(|| builtin.as_ref().map(|b| b.k.clone())).unwrap_or_else(|| network.rates());
            let volume = a
                .volume
                .or(builtin.as_ref().map(|b| b.volume))
                .ok_or_else(|| usage("--volume or --stochastic-rates is required for network files"))?;
            StochasticRates::from_deterministic(&network, &k, volume)
        }
    }
    .map_err(|e| usage(e.to_string()))?;
    let t_end =
        a.t_end.or(builtin.as_ref().map(|b| b.horizon)).ok_or_else(|| usage("--T is required for network files"))?;
    positive("--T", t_end)?;
    let model = JumpModel::new(&network, &rates).map_err(|e| usage(e.to_string()))?;
    let mut leap = LeapConfig::default();
    if let Some(e) = a.epsilon {
        leap = leap.with_epsilon(e);
    }
    if let Some(t) = a.tau {
        leap = leap.with_fixed_tau(t);
    }
    let sim = Simulator::new(model, method).with_leap(leap);
    let seed = a.seed.unwrap_or(0);
    let runs = a.runs.unwrap_or(1);
    if runs == 0 {
        return Err(usage("--runs must be positive"));
    }
    let points = a.points.unwrap_or(101);
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let grid = linear_times(0.0, t_end, points);
    let species = sim.model.species().to_vec();
    if runs > 1 {
        let stats = ensemble(&sim, &x0, runs, seed, &grid).map_err(|e| usage(e.to_string()))?;
        emit(a.out.as_deref(), &stats.to_csv())?;
        if let Some(p) = &a.plot {
            super::write_atomic(p, &plot_series(&grid, &species, &stats.mean, false, "mean molecule count"))?;
        }
    } else {
        let tr = sim.run(&x0, t_end, seed).map_err(|e| usage(e.to_string()))?;
        if tr.rejected_leaps > 0 {
            eprintln!("{} leaps rejected for negative counts and retried", tr.rejected_leaps);
        }
        emit(a.out.as_deref(), &tr.to_csv())?;
        if let Some(p) = &a.plot {
            let rows: Vec<Vec<f64>> =
                grid.iter().map(|&t| tr.state_at(t).iter().map(|&v| v as f64).collect()).collect();
            super::write_atomic(p, &plot_series(&grid, &species, &rows, false, "molecule count"))?;
        }
    }
    Ok(())
}

pub(super) fn volpert(a: VolpertArgs) -> CliResult<()> {
    check_output(a.dot.as_deref())?;
    let Loaded { network, .. } = load(&a.source, true)?;
    let names = a.initial.as_ref().ok_or_else(|| usage("--initial is required"))?;
    let initial = names
        .iter()
        .map(|n| network.species_index(n.trim()).ok_or_else(|| usage(format!("unknown species '{}'", n.trim()))))
        .collect::<CliResult<Vec<_>>>()?;
    let ix = volpert_index(&network, &initial);
    emit(None, &ix.table(&network))?;
    if let Some(p) = &a.dot {
        super::write_atomic(p, &export_dot(&volpert_graph(&network), Some(&ix)))?;
    }
    Ok(())
}

struct SpeciesInput {
    species: Vec<Species>,
    overall: Option<&'static str>,
}

fn load_species(arg: Option<&str>) -> CliResult<SpeciesInput> {
    let arg = arg.ok_or_else(|| usage("no species file given"))?;
    let fixture = match arg.to_ascii_lowercase().as_str() {
        "permanganate" => Some((decomposition::PERMANGANATE_SPECIES, decomposition::PERMANGANATE_OVERALL)),
        "hbr" => Some((decomposition::HBR_SPECIES, decomposition::HBR_OVERALL)),
        _ => None,
    };
    let (text, overall) = match fixture {
        Some((s, o)) => (s.to_string(), Some(o)),
        None => (read_text(Path::new(arg))?, None),
    };
    let species = parse_species_file(&text).map_err(|e| usage(format!("{arg}: {e}")))?;
    Ok(SpeciesInput { species, overall })
}

fn rules(strict: bool, max_order: Option<u32>) -> CliResult<StepRules> {
    let mut r = if strict { StepRules::strict() } else { StepRules::default() };
    if let Some(m) = max_order {
        if m == 0 {
            return Err(usage("--max-order must be positive"));
        }
        r.max_reactant_order = m;
    }
    Ok(r)
}

pub(super) fn steps(a: StepsArgs) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    let input = load_species(a.species.as_deref())?;
    let atomic = atomic_matrix(&input.species).map_err(|e| usage(e.to_string()))?;
    let set =
        generate_steps(&input.species, &atomic, &rules(a.strict, a.max_order)?).map_err(|e| usage(e.to_string()))?;
    let summary =
        format!("# reactant complexes examined: {}\n# steps generated: {}\n", set.complexes_examined, set.steps.len());
    match &a.out {
        Some(p) => {
            super::write_atomic(p, &format!("{summary}{}", set.to_step_list()))?;
            emit(None, &summary.replace("# ", ""))
        }
        None => emit(None, &format!("{summary}{}", set.to_step_list())),
    }
}

/// Steps of a step-list file, re-indexed over `species`.
fn whitelist(species: &[Species], path: &Path) -> CliResult<ElementaryStepSet> {
    let net = parse_step_list(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let map =
        net.species()
            .iter()
            .map(|s| {
                species.iter().position(|t| t.name == s.name).ok_or_else(|| {
                    usage(format!("{}: species '{}' is not in the species file", path.display(), s.name))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
    let side = |v: &[(usize, u32)]| v.iter().map(|&(i, n)| (map[i], n)).collect::<Vec<_>>();
    let steps = net.steps().iter().map(|s| ElementaryStep::new(side(&s.reactants), side(&s.products))).collect();
    Ok(ElementaryStepSet { species: species.to_vec(), steps, complexes_examined: 0 })
}

pub(super) fn decompose(a: DecomposeArgs) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    let input = load_species(a.species.as_deref())?;
    let overall_text = a.overall.as_deref().or(input.overall).ok_or_else(|| usage("--overall is required"))?;
    let overall = parse_overall(&input.species, overall_text).map_err(|e| usage(e.to_string()))?;
    let max = a.max_steps.ok_or_else(|| usage("--max-steps is required"))?;
    let mut opts = DecomposeOptions::new(max);
    opts.rules = rules(a.strict, None)?;
    opts.keep_overall = a.keep_overall;
    if let Some(b) = a.node_budget {
        opts.enumeration.node_budget = b;
    }
    if let Some(names) = &a.initial {
        let names: Vec<&str> = match names.as_slice() {
            [one] => initial_preset(one).map(<[&str]>::to_vec).unwrap_or_else(|| vec![one.as_str()]),
            many => many.iter().map(String::as_str).collect(),
        };
        opts.initial = Some(species_indices(&input.species, &names).map_err(|e| usage(e.to_string()))?);
    }
    let given = a.steps.as_deref().map(|p| whitelist(&input.species, p)).transpose()?;
    let report = decomposition::decompose(&input.species, given, &overall, &opts).map_err(|e| match e {
        DecompositionError::Lp(LpError::Infeasible) => {
            compute("infeasible: no combination of the steps gives the overall reaction")
        }
        DecompositionError::Lp(other) => compute(other),
        other => usage(other.to_string()),
    })?;
    let text = report.to_text();
    match &a.out {
        Some(p) => {
            let is_csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            super::write_atomic(p, &if is_csv { report.to_csv() } else { text.clone() })?;
            let head = text.split("\n#").next().unwrap_or("");
            emit(None, head.trim_end_matches('\n'))?;
            emit(None, "\n")
        }
        None => emit(None, &text),
    }
}

fn parse_noise(s: &str) -> CliResult<Noise> {
    let bad = || usage(format!("bad --noise '{s}' (none, uniform:LO,HI or gaussian:SIGMA)"));
    let (kind, params) = s.split_once(':').unwrap_or((s, ""));
    let nums =
        || -> CliResult<Vec<f64>> { params.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect() };
    match kind.trim().to_ascii_lowercase().as_str() {
        "none" if params.is_empty() => Ok(Noise::None),
        "uniform" => match nums()?.as_slice() {
            &[lo, hi] if lo <= hi => Ok(Noise::Uniform { lo, hi }),
            _ => Err(bad()),
        },
        "gaussian" => match nums()?.as_slice() {
            &[sigma] if sigma >= 0.0 => Ok(Noise::Gaussian { sigma }),
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

fn estimation_error(e: EstimationError) -> CliError {
    match e {
        EstimationError::Data { .. }
        | EstimationError::UnknownSpecies(_)
        | EstimationError::InitialRates
        | EstimationError::Model(_) => usage(e.to_string()),
        EstimationError::Solver(s) => solver_error(s),
        other => compute(other),
    }
}

pub(super) fn synth(a: SynthArgs) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    let Loaded { network, builtin } = load(&a.source, a.k.is_some())?;
    let k = a.k.clone().or_else(|| builtin.as_ref().map(|b| b.k.clone())).unwrap_or_else(|| network.rates());
    let c0 =
        a.c0.clone()
            .or_else(|| builtin.as_ref().map(|b| b.c0.clone()))
            .ok_or_else(|| usage("--c0 is required for network files"))?;
    let t1 = a.t1.or(builtin.as_ref().map(|b| b.horizon)).ok_or_else(|| usage("--t1 is required for network files"))?;
    positive("--t1", t1)?;
    let points = a.points.unwrap_or(51);
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let noise = parse_noise(a.noise.as_deref().unwrap_or("none"))?;
    let times = linear_times(0.0, t1, points);
    let data = synth_data(&network, &k, &c0, &times, a.observe.as_deref(), noise, a.seed.unwrap_or(0))
        .map_err(estimation_error)?;
    emit(a.out.as_deref(), &data.to_csv())
}

pub(super) fn fit(a: FitArgs) -> CliResult<()> {
    check_output(a.out.as_deref())?;
    let Loaded { network, builtin } = load(&a.source, a.k0.is_some())?;
    let path = a.data.as_deref().ok_or_else(|| usage("--data is required"))?;
    let dataset = Dataset::from_csv(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let c0 = match a.c0.clone().or_else(|| builtin.as_ref().map(|b| b.c0.clone())) {
        Some(c) => c,
        None => initial_from_data(&network, &dataset)
            .ok_or_else(|| usage("--c0 is required unless the data has a complete row at t = 0"))?,
    };
    let k0 = a.k0.clone().unwrap_or_else(|| network.rates());
    let mut cfg = FitConfig::default();
    if let Some(n) = a.max_iter {
        cfg.lm.max_iter = n;
    }
    let problem = FitProblem { network: &network, dataset: &dataset, c0: &c0 };
    let result = fit_rates(&problem, &k0, &cfg).map_err(estimation_error)?;
    if !result.converged {
        eprintln!("warning: not converged after {} iterations", result.iterations);
    }
    let mut json = result.to_json();
    json.push('\n');
    emit(a.out.as_deref(), &json)
}

/// The t = 0 row, if it observes every internal species.
fn initial_from_data(network: &ReactionNetwork, data: &Dataset) -> Option<Vec<f64>> {
    if data.times.first() != Some(&0.0) {
        return None;
    }
    network
        .internal_names()
        .iter()
        .map(|n| data.species.iter().position(|s| s == n).and_then(|j| data.observations[0][j]))
        .collect()
}
