//! Estimating the rate coefficients of 2 X <-> X from noisy synthetic data:
//! x0 = 2, t = 0, 0.2, ..., 7, noise uniform on [0, 0.01].
//!
//!     cargo run --release --example fit_two_x

use rxnkit::deterministic::{builtin, linear_times};
use rxnkit::estimation::{fit_rates, synth_data, FitConfig, FitProblem, Noise};

fn main() {
    let b = builtin("TwoXRevX").expect("builtin");
    let times = linear_times(0.0, 7.0, 36);
    for (label, noise) in [
        ("uniform(0, 0.01)", Noise::Uniform { lo: 0.0, hi: 0.01 }),
        ("gaussian(0.01)", Noise::Gaussian { sigma: 0.01 }),
        ("none", Noise::None),
    ] {
        let data = synth_data(&b.network, &b.k, &b.c0, &times, None, noise, 1).expect("data");
        let problem = FitProblem { network: &b.network, dataset: &data, c0: &b.c0 };
        let fit = fit_rates(&problem, &[0.7, 0.2], &FitConfig::default()).expect("fit");
        println!(
            "{label:>17}: k_hat = ({:.6}, {:.6}), sse {:.3e}, {} iterations, std errors {:?}",
            fit.k_hat[0], fit.k_hat[1], fit.sse, fit.iterations, fit.std_errors
        );
    }
    println!("true k = {:?}", b.k);
}
