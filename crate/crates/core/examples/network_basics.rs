//! Parsing a network, its stoichiometric matrices, conserved quantities
//! and the mass-action right-hand side.
//!
//!     cargo run --example network_basics

use rxnkit::{conserved_quantities, mass_action_rhs, parse_formula, parse_network, serialize_network, stoichiometry};

const TEXT: &str = "\
# Michaelis-Menten with product release
E + S <-> ES, 1e6, 1e2
ES -> E + P, 10
";

fn main() {
    let net = parse_network(TEXT).expect("parses");
    println!("species: {:?}", net.species_names());
    let st = stoichiometry(&net);
    println!("alpha (reactants):{}", st.alpha);
    println!("beta (products):{}", st.beta);
    println!("gamma = beta - alpha:{}", st.gamma);

    for v in conserved_quantities(&net) {
        let terms: Vec<String> = net
            .species_names()
            .iter()
            .zip(&v)
            .filter(|(_, c)| **c != 0)
            .map(|(n, c)| if *c == 1 { n.clone() } else { format!("{c} {n}") })
            .collect();
        println!("conserved: {}", terms.join(" + "));
    }

    let c = [1e-6, 1e-3, 0.0, 0.0];
    println!("rhs at {c:?}: {:?}", mass_action_rhs(&net, &net.rates(), &c).expect("dims"));

    println!("\ncanonical form:\n{}", serialize_network(&net));

    for f in ["H2C2O4", "MnO4{-}", "Mn(C2O4)2{2-}"] {
        println!("{f}: {}", parse_formula(f).expect("formula"));
    }
}
