//! Candidate elementary steps of the permanganate/oxalic acid system, their
//! Volpert pruning and LP bounds for the overall reaction.
//!
//!     cargo run --release --example permanganate_steps

use std::time::Instant;

use rxnkit::decomposition::{
    atomic_matrix, generate_steps, initial_preset, lp_bounds, parse_overall, parse_species_file, species_indices,
    volpert_filter, StepRules, PERMANGANATE_OVERALL, PERMANGANATE_SPECIES,
};

fn main() {
    let species = parse_species_file(PERMANGANATE_SPECIES).expect("fixture parses");
    let e = atomic_matrix(&species).expect("compositions present");
    println!("atomic matrix: {} x {} (rows {})", e.rows.len(), e.num_species(), e.rows.join(", "));

    for (label, rules) in [("default", StepRules::default()), ("strict", StepRules::strict())] {
        let start = Instant::now();
        let set = generate_steps(&species, &e, &rules).expect("generation");
        println!(
            "{label:8} rules: {} reactant complexes, {} steps ({:.2?})",
            set.complexes_examined,
            set.steps.len(),
            start.elapsed()
        );
    }

    let set = generate_steps(&species, &e, &StepRules::default()).unwrap();
    for preset in ["bold", "bold+H", "noncomplex"] {
        let initial = species_indices(&species, initial_preset(preset).unwrap()).unwrap();
        let f = volpert_filter(&set, &initial);
        let names: Vec<&str> = f.ungenerable.iter().map(|&i| species[i].name.as_str()).collect();
        println!(
            "initial {preset:10}: {} steps survive, cannot be formed: {}",
            f.surviving.len(),
            if names.is_empty() { "none".to_string() } else { names.join(", ") }
        );
    }

    let overall = parse_overall(&species, PERMANGANATE_OVERALL).unwrap();
    let m = species.len();
    let keep: Vec<usize> = (0..set.steps.len()).filter(|&r| set.steps[r].gamma(m) != overall).collect();
    let set = set.subset(&keep);
    let start = Instant::now();
    let bounds = lp_bounds(&set.gamma_columns(), &overall).expect("overall reaction is reachable");
    println!(
        "LP: every decomposition has at least {} steps (relaxation optimum {}), {:.2?}",
        bounds.min_total_steps(),
        bounds.min_total,
        start.elapsed()
    );
    for (r, lb) in bounds.forced_steps() {
        println!("  always present, at least {lb} x {}", set.format_step(r));
    }
}
