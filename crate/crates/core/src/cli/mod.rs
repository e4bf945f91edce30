//! Command-line front end.
//!
//! Every subcommand takes its options from flags, from a JSON file given
//! with `--config`, or both; flags win. Exit codes: 0 success, 1 usage,
//! input or parse error, 2 computational failure.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input.
    Usage(String),
    /// The computation itself failed.
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Compute(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => m,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub(crate) fn compute(msg: impl std::fmt::Display) -> CliError {
    CliError::Compute(msg.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rxnkit", version, about = "Reaction kinetics toolkit")]
struct Cli {
    /// JSON file with options for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the mass-action kinetic equations.
    Simulate(SimulateArgs),
    /// Exact stochastic simulation (direct method by default).
    Ssa(StochasticArgs),
    /// τ-leaping stochastic simulation (explicit by default).
    Leap(StochasticArgs),
    /// Volpert indexing and graph export.
    Volpert(VolpertArgs),
    /// Generate the elementary steps of a species set.
    Steps(StepsArgs),
    /// Decompose an overall reaction into elementary steps.
    Decompose(DecomposeArgs),
    /// Synthetic data from a deterministic run.
    Synth(SynthArgs),
    /// Estimate rate coefficients from data.
    Fit(FitArgs),
}

/// Where the network comes from. A bare name is tried as a builtin first.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct NetworkSource {
    /// Builtin name or network file.
    pub network: Option<String>,
    #[arg(long, conflicts_with = "file")]
    pub builtin: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: NetworkSource,
    /// Rate coefficients (default: those in the network).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k: Option<Vec<f64>>,
    /// Initial concentrations of the internal species.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub c0: Option<Vec<f64>>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// stiff or explicit.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of output times (default: every accepted step).
    #[arg(long)]
    pub points: Option<usize>,
    /// Logarithmic time axis for the plot and for `--points`.
    #[arg(long)]
    pub logt: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct StochasticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: NetworkSource,
    /// direct, explicit, implicit or trapezoidal.
    #[arg(long)]
    pub method: Option<String>,
    /// Initial molecule counts of the internal species.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    /// Volume in dm³, for converting deterministic rate coefficients.
    #[arg(long)]
    pub volume: Option<f64>,
    /// Deterministic rate coefficients (default: those in the network).
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    /// Stochastic rate constants, used as given.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["k", "volume"])]
    pub stochastic_rates: Option<Vec<f64>>,
    /// End time.
    #[arg(long = "T", visible_alias = "t-end")]
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// More than one run writes per-time ensemble statistics.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output grid size for ensembles and plots.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Fixed leap size.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct VolpertArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: NetworkSource,
    /// Initially present species.
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<String>>,
    /// Write the Volpert graph in DOT format.
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct StepsArgs {
    /// Species file (`name = formula` lines) or a fixture name:
    /// permanganate, hbr.
    pub species: Option<String>,
    /// At most two product molecules, and species may appear on both sides.
    #[arg(long)]
    pub strict: bool,
    /// Largest reactant complex order.
    #[arg(long)]
    pub max_order: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct DecomposeArgs {
    /// Species file or fixture name (permanganate, hbr).
    pub species: Option<String>,
    /// Overall reaction (default: the fixture's).
    #[arg(long)]
    pub overall: Option<String>,
    /// Largest total number of steps in a decomposition.
    #[arg(long)]
    pub max_steps: Option<u32>,
    /// Initially present species, or a preset name (bold, bold+H,
    /// noncomplex); enables Volpert pruning.
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<String>>,
    /// Use only the steps in this step-list file.
    #[arg(long)]
    pub steps: Option<PathBuf>,
    /// Keep steps equal to the overall reaction.
    #[arg(long)]
    pub keep_overall: bool,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub node_budget: Option<u64>,
    /// Text report, or one CSV row per decomposition if the name ends in
    /// `.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct SynthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: NetworkSource,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub c0: Option<Vec<f64>>,
    #[arg(long)]
    pub t1: Option<f64>,
    /// Number of equally spaced times from 0 to t1.
    #[arg(long)]
    pub points: Option<usize>,
    /// Observed species (default: all internal species).
    #[arg(long, value_delimiter = ',')]
    pub observe: Option<Vec<String>>,
    /// none, uniform:LO,HI or gaussian:SIGMA.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub(crate) struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: NetworkSource,
    /// Data CSV with header `t,<species…>`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Initial rate coefficients.
    #[arg(long, value_delimiter = ',')]
    pub k0: Option<Vec<f64>>,
    /// Initial concentrations (default: the builtin's).
    #[arg(long, value_delimiter = ',')]
    pub c0: Option<Vec<f64>>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// JSON report (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays the set flags on the config file. Booleans only count when
/// true, options only when present.
fn merge<T: Serialize + DeserializeOwned + Default>(flags: T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = read_text(path)?;
    let mut base: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Value::Object(known) = serde_json::to_value(T::default()).expect("serializable") else {
        unreachable!("argument structs serialize to objects")
    };
    let obj = base.as_object().ok_or_else(|| usage(format!("{}: expected a JSON object", path.display())))?;
    // serde cannot deny unknown fields of flattened structs, so check here
    if let Some(key) =
        obj.keys().find(|k| !known.contains_key(*k) && !(k.as_str() == "t_end" && known.contains_key("T")))
    {
        return Err(usage(format!("{}: unknown option '{key}'", path.display())));
    }
    serde_json::from_value::<T>(base.clone()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Value::Object(over) = serde_json::to_value(&flags).expect("serializable") else {
        unreachable!("argument structs serialize to objects")
    };
    let obj = base.as_object_mut().expect("checked above");
    for (key, v) in over {
        if !(v.is_null() || v == Value::Bool(false)) {
            obj.insert(key, v);
        }
    }
    serde_json::from_value(base).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// Fails early if an output file could not be created.
pub(crate) fn check_output(path: Option<&Path>) -> CliResult<()> {
    let Some(path) = path else { return Ok(()) };
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(usage(format!("output directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(usage(format!("output path {} is a directory", path.display())));
    }
    Ok(())
}

/// Writes via a temporary file in the same directory and a rename, so
/// readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// To the file if given, else standard output.
pub(crate) fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes()).map_err(|e| usage(format!("cannot write output: {e}")))
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("RXNKIT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("RXNKIT_THREADS must be a positive integer, got '{v}'")))?;
    // a pool may already exist when called from a test harness
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => commands::simulate(merge(a, cfg)?),
        Command::Ssa(a) => commands::stochastic(merge(a, cfg)?, "direct"),
        Command::Leap(a) => commands::stochastic(merge(a, cfg)?, "explicit"),
        Command::Volpert(a) => commands::volpert(merge(a, cfg)?),
        Command::Steps(a) => commands::steps(merge(a, cfg)?),
        Command::Decompose(a) => commands::decompose(merge(a, cfg)?),
        Command::Synth(a) => commands::synth(merge(a, cfg)?),
        Command::Fit(a) => commands::fit(merge(a, cfg)?),
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}
