//! The Brusselator deterministically and with the direct method at
//! V = 1e-21 dm³ (about 600 molecules per µmol/dm³).
//!
//!     cargo run --release --example brusselator_ssa

use rxnkit::deterministic::{builtin, linear_times, simulate, IntegratorConfig};
use rxnkit::stochastic::{counts_to_concentrations, JumpModel, Simulator, StochasticMethod, StochasticRates};

fn local_maxima(v: &[f64]) -> usize {
    v.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

fn main() {
    let b = builtin("Brusselator").expect("builtin");
    let grid = linear_times(0.0, b.horizon, 201);
    let cfg = IntegratorConfig::default().with_output_times(grid.clone());
    let det = simulate(&b.network, &b.k, &b.c0, (0.0, b.horizon), &cfg).expect("integrates");
    let x = det.column(0);
    println!("deterministic: {} maxima of X, range [{:.3e}, {:.3e}]", local_maxima(&x), min(&x), max(&x));

    let rates = StochasticRates::from_deterministic(&b.network, &b.k, b.volume).expect("rates");
    println!("stochastic rate constants: {:?}", rates.c);
    let sim = Simulator::new(JumpModel::new(&b.network, &rates).expect("model"), StochasticMethod::Direct);
    let tr = sim.run(&b.x0, b.horizon, 1).expect("runs");
    let xs: Vec<f64> = grid.iter().map(|&t| counts_to_concentrations(tr.state_at(t), b.volume)[0]).collect();
    println!(
        "direct method: {} events, {} maxima of X, range [{:.3e}, {:.3e}]",
        tr.len() - 1,
        local_maxima(&xs),
        min(&xs),
        max(&xs)
    );
    println!("{:>6} {:>12} {:>12}", "t", "X det", "X ssa");
    for i in (0..grid.len()).step_by(10) {
        println!("{:>6.2} {:>12.4e} {:>12.4e}", grid[i], x[i], xs[i]);
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
