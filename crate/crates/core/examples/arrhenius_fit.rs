//! Fitting Arrhenius parameters of A -> B -> C from runs at four
//! temperatures.
//!
//!     cargo run --release --example arrhenius_fit

use rxnkit::deterministic::linear_times;
use rxnkit::estimation::{fit_arrhenius, synth_data, ArrheniusParams, Experiment, FitConfig, Noise};
use rxnkit::parse_network;

fn main() {
    let net = parse_network("A -> B, 1\nB -> C, 1").expect("parses");
    let truth = [
        ArrheniusParams { k0: 2.0e3, n: 0.0, activation: 2.5e4 },
        ArrheniusParams { k0: 5.0e1, n: 0.0, activation: 1.2e4 },
    ];
    let times = linear_times(0.0, 10.0, 21);
    let c0 = vec![1.0, 0.0, 0.0];
    let experiments: Vec<Experiment> = [290.0, 310.0, 330.0, 350.0]
        .iter()
        .enumerate()
        .map(|(i, &temperature)| {
            let k: Vec<f64> = truth.iter().map(|p| p.rate(temperature).expect("rate")).collect();
            let noise = Noise::Gaussian { sigma: 0.002 };
            let dataset = synth_data(&net, &k, &c0, &times, None, noise, i as u64).expect("data");
            Experiment { temperature, dataset, c0: c0.clone() }
        })
        .collect();
    let init =
        [ArrheniusParams { k0: 1e3, n: 0.0, activation: 2e4 }, ArrheniusParams { k0: 1e2, n: 0.0, activation: 1.5e4 }];
    let fit = fit_arrhenius(&net, &experiments, &init, false, &FitConfig::default()).expect("fit");
    for (r, (p, t)) in fit.params.iter().zip(&truth).enumerate() {
        println!(
            "step {}: k0 {:.4e} (true {:.4e}), activation {:.1} J/mol (true {:.1})",
            r + 1,
            p.k0,
            t.k0,
            p.activation,
            t.activation
        );
    }
    println!("sse {:.3e} after {} iterations, converged: {}", fit.sse, fit.iterations, fit.converged);
}
