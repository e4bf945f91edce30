//! Volpert indices of Robertson's network from different initial species,
//! and the graph in DOT format.
//!
//!     cargo run --example volpert_robertson

use rxnkit::deterministic::builtin;
use rxnkit::graphs::{export_dot, volpert_graph, volpert_index};

fn main() {
    let net = builtin("Robertson").expect("builtin").network;
    for start in [&["A"][..], &["C"], &["B"], &["A", "B", "C"]] {
        let initial: Vec<usize> = start.iter().map(|s| net.species_index(s).expect("species")).collect();
        println!("initial {start:?}:");
        print!("{}", volpert_index(&net, &initial).table(&net));
        println!();
    }
    let ix = volpert_index(&net, &[0]);
    print!("{}", export_dot(&volpert_graph(&net), Some(&ix)));
}
