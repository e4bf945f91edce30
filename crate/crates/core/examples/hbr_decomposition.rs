//! Decomposing H2 + Br2 -> 2 HBr into elementary steps over H2, Br2, HBr,
//! H and Br.
//!
//!     cargo run --example hbr_decomposition

use rxnkit::decomposition::{
    atomic_matrix, decompose, generate_steps, parse_overall, parse_species_file, DecomposeOptions, StepRules,
    HBR_OVERALL, HBR_SPECIES,
};

fn main() {
    let species = parse_species_file(HBR_SPECIES).expect("fixture");
    let e = atomic_matrix(&species).expect("compositions");
    println!("atomic matrix rows {:?}: {:?}", e.rows, e.entries);

    for (name, rules) in [("default", StepRules::default()), ("strict", StepRules::strict())] {
        let set = generate_steps(&species, &e, &rules).expect("generates");
        println!("{name} rules: {} complexes, {} steps", set.complexes_examined, set.steps.len());
    }

    let overall = parse_overall(&species, HBR_OVERALL).expect("overall");
    let report = decompose(&species, None, &overall, &DecomposeOptions::new(4)).expect("feasible");
    print!("\n{}", report.to_text());
}
