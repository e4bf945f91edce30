//! Robertson's stiff kinetics benchmark on [0, 1e11]: mass conservation and
//! the step counts of the stiff and explicit integrators.
//!
//!     cargo run --release --example robertson_stiff

use std::time::Instant;

use rxnkit::conserved_quantities;
use rxnkit::deterministic::{builtin, log_times, simulate, IntegratorConfig, Method};

fn main() {
    let rob = builtin("Robertson").expect("builtin");
    println!("conserved quantities: {:?}", conserved_quantities(&rob.network));

    let times = log_times(0.0, 1e-6, rob.horizon, 35);
    let cfg = IntegratorConfig::default().with_output_times(times);
    let start = Instant::now();
    let tr = simulate(&rob.network, &rob.k, &rob.c0, (0.0, rob.horizon), &cfg).expect("integrates");
    let elapsed = start.elapsed();

    println!("{:>12} {:>14} {:>14} {:>14} {:>10}", "t", "A", "B", "C", "|sum-1|");
    let mut worst: f64 = 0.0;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let drift = (s.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max(drift);
        println!("{t:>12.3e} {:>14.6e} {:>14.6e} {:>14.6e} {drift:>10.2e}", s[0], s[1], s[2]);
    }
    println!(
        "stiff: {} accepted, {} rejected steps, max mass drift {worst:.2e}, {:.3} s",
        tr.stats.accepted,
        tr.stats.rejected,
        elapsed.as_secs_f64()
    );

    for method in [Method::Stiff, Method::Explicit] {
        let cfg = IntegratorConfig::default().with_method(method);
        let tr = simulate(&rob.network, &rob.k, &rob.c0, (0.0, 100.0), &cfg).expect("integrates");
        println!("{method:?} to t = 100: {} accepted, {} rejected", tr.stats.accepted, tr.stats.rejected);
    }
}
