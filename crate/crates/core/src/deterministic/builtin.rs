//! Built-in benchmark networks.

use crate::model::{ReactionNetwork, AVOGADRO};
use crate::parser::parse_network;

#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub network: ReactionNetwork,
    pub k: Vec<f64>,
    /// Initial concentrations of the internal species.
    pub c0: Vec<f64>,
    /// Reference volume (dm³) for the stochastic model.
    pub volume: f64,
    /// Initial molecule counts for the stochastic model.
    pub x0: Vec<i64>,
    /// A horizon that shows the interesting dynamics.
    pub horizon: f64,
}

const ROBERTSON: &str = "\
A -> B, 0.04
2 B -> B + C, 3e7
B + C -> A + C, 1e4
";

// A and P are external, held at 1 mol/dm³.
const BRUSSELATOR: &str = "\
external: A, P
A -> X, 1.92
X -> Y, 5.76
2 X + Y -> 3 X, 5.6
X -> P, 4.8
";

const AUTOCATALATOR: &str = "\
external: A, P
A -> X, 110.2
X -> Y, 0.094
X + 2 Y -> 3 Y, 0.011
Y -> P, 90.34
";

const TWO_X_REV_X: &str = "2 X <-> X, 0.33, 0.72\n";

pub fn builtin_names() -> &'static [&'static str] {
    &["Robertson", "Brusselator", "Autocatalator", "TwoXRevX"]
}

/// Looks up a built-in network by name (case-insensitive).
pub fn builtin(name: &str) -> Option<Builtin> {
    let canonical = *builtin_names().iter().find(|n| n.eq_ignore_ascii_case(name))?;
    let make = |text: &str| parse_network(text).expect("builtin network parses");
    let b = match canonical {
        "Robertson" => {
            let network = make(ROBERTSON);
            let volume = 1e4 / AVOGADRO;
            Builtin {
                name: canonical,
                k: network.rates(),
                network,
                c0: vec![1.0, 0.0, 0.0],
                volume,
                x0: vec![10_000, 0, 0],
                horizon: 1e11,
            }
        }
        "Brusselator" => {
            let network = make(BRUSSELATOR);
            let volume = 1e-21;
            let x0 = vec![500, 720];
            Builtin {
                name: canonical,
                k: network.rates(),
                c0: x0.iter().map(|&x| x as f64 / (AVOGADRO * volume)).collect(),
                network,
                volume,
                x0,
                horizon: 10.0,
            }
        }
        "Autocatalator" => {
            let network = make(AUTOCATALATOR);
            // N_A·V = 1, so counts and concentrations coincide numerically
            Builtin {
                name: canonical,
                k: network.rates(),
                network,
                c0: vec![15.0, 80.0],
                volume: 1.0 / AVOGADRO,
                x0: vec![15, 80],
                horizon: 10.0,
            }
        }
        "TwoXRevX" => {
            let network = make(TWO_X_REV_X);
            Builtin {
                name: canonical,
                k: network.rates(),
                network,
                c0: vec![2.0],
                volume: 10.0 / AVOGADRO,
                x0: vec![20],
                horizon: 7.0,
            }
        }
        _ => unreachable!(),
    };
    Some(b)
}
