//! The autocatalator with the direct method and the three τ-leaping
//! variants: ensemble means and run times.
//!
//!     cargo run --release --example autocatalator_leap

use std::time::Instant;

use rxnkit::deterministic::{builtin, linear_times};
use rxnkit::stochastic::{ensemble, JumpModel, Simulator, StochasticMethod, StochasticRates};

fn main() {
    let b = builtin("Autocatalator").expect("builtin");
    let rates = StochasticRates::from_deterministic(&b.network, &b.k, b.volume).expect("rates");
    let model = JumpModel::new(&b.network, &rates).expect("model");
    let grid = linear_times(0.0, b.horizon, 11);
    for method in [
        StochasticMethod::Direct,
        StochasticMethod::Explicit,
        StochasticMethod::Implicit,
        StochasticMethod::Trapezoidal,
    ] {
        let sim = Simulator::new(model.clone(), method);
        let start = Instant::now();
        let stats = ensemble(&sim, &b.x0, 200, 5, &grid).expect("runs");
        let means: Vec<String> = stats.mean.iter().map(|m| format!("{:.1}", m[0])).collect();
        println!("{method:?}: {:.3} s, mean X on the grid: {}", start.elapsed().as_secs_f64(), means.join(" "));
    }
    let tr = Simulator::new(model, StochasticMethod::Trapezoidal).run(&b.x0, b.horizon, 1).expect("runs");
    println!("one trapezoidal path: {} leaps, {} rejected, final {:?}", tr.len() - 1, tr.rejected_leaps, tr.last());
}
