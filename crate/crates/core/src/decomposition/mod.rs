//! Decomposition of overall reactions into elementary steps.
//!
//! The pipeline is: atomic matrix of the species, generation of all
//! balanced candidate steps, optional Volpert pruning from an initial
//! species set, exact LP bounds, and enumeration of every nonnegative
//! integer combination of steps that reproduces the overall reaction.

mod enumerate;
pub mod simplex;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

pub use enumerate::{
    enumerate_decompositions, lp_bounds, DecompositionSolution, Enumeration, EnumerationOptions, LpBounds, LpError,
};

use crate::graphs::volpert_index;
use crate::model::{normalize_side, ReactionNetwork, ReactionStep, Side, Species};
use crate::parser::{format_side, parse_document, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("species '{0}' has no composition")]
    MissingComposition(String),
    #[error("species '{0}' contains no atoms, so product complexes are unbounded; set a maximum product order")]
    AtomFreeSpecies(String),
    #[error("unknown species '{0}'")]
    UnknownSpecies(String),
    #[error("overall reaction: {0}")]
    Overall(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Elements (sorted) plus a final charge row, by species.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicMatrix {
    /// Element symbols followed by `"charge"`.
    pub rows: Vec<String>,
    /// `entries[row][species]`.
    pub entries: Vec<Vec<i64>>,
}

impl AtomicMatrix {
    pub fn num_species(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, species: usize) -> Vec<i64> {
        self.entries.iter().map(|r| r[species]).collect()
    }

    /// `E·side` for a complex.
    pub fn apply(&self, side: &[(usize, u32)]) -> Vec<i64> {
        self.entries.iter().map(|r| side.iter().map(|&(i, n)| r[i] * n as i64).sum()).collect()
    }
}

pub fn atomic_matrix(species: &[Species]) -> Result<AtomicMatrix, DecompositionError> {
    let comps = species
        .iter()
        .map(|s| s.composition.as_ref().ok_or_else(|| DecompositionError::MissingComposition(s.name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let elements: BTreeSet<&String> = comps.iter().flat_map(|c| c.atoms.keys()).collect();
    let mut entries: Vec<Vec<i64>> =
        elements.iter().map(|e| comps.iter().map(|c| c.count(e) as i64).collect()).collect();
    entries.push(comps.iter().map(|c| c.charge as i64).collect());
    let mut rows: Vec<String> = elements.into_iter().cloned().collect();
    rows.push("charge".to_string());
    Ok(AtomicMatrix { rows, entries })
}

/// Which candidate steps `generate_steps` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRules {
    /// Reactant complexes have order 1 up to this.
    pub max_reactant_order: u32,
    /// Cap on product order; `None` leaves it to atom balance.
    pub max_product_order: Option<u32>,
    /// No species on both sides of a step.
    pub disjoint_sides: bool,
}

impl Default for StepRules {
    /// Bimolecular reactant side, any balanced product side sharing no
    /// species with it. On the permanganate fixture this gives 1022 steps.
    fn default() -> Self {
        StepRules { max_reactant_order: 2, max_product_order: None, disjoint_sides: true }
    }
}

impl StepRules {
    /// Order at most two on both sides; only identical sides are excluded.
    pub fn strict() -> Self {
        StepRules { max_reactant_order: 2, max_product_order: Some(2), disjoint_sides: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementaryStep {
    pub reactants: Side,
    pub products: Side,
}

impl ElementaryStep {
    pub fn new(
        reactants: impl IntoIterator<Item = (usize, u32)>,
        products: impl IntoIterator<Item = (usize, u32)>,
    ) -> Self {
        ElementaryStep { reactants: normalize_side(reactants), products: normalize_side(products) }
    }

    /// Net change `b − a` over `num_species` species.
    pub fn gamma(&self, num_species: usize) -> Vec<i64> {
        let mut g = vec![0i64; num_species];
        for &(i, n) in &self.reactants {
            g[i] -= n as i64;
        }
        for &(i, n) in &self.products {
            g[i] += n as i64;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryStepSet {
    pub species: Vec<Species>,
    pub steps: Vec<ElementaryStep>,
    /// Reactant complexes for which a balance system was solved.
    pub complexes_examined: usize,
}

impl ElementaryStepSet {
    pub fn gamma_columns(&self) -> Vec<Vec<i64>> {
        self.steps.iter().map(|s| s.gamma(self.species.len())).collect()
    }

    /// The steps as a network with unit rate coefficients.
    pub fn to_network(&self) -> ReactionNetwork {
        let steps = self
            .steps
            .iter()
            .map(|s| ReactionStep { reactants: s.reactants.clone(), products: s.products.clone(), rate: 1.0 })
            .collect();
        ReactionNetwork::new(self.species.clone(), steps).expect("generated steps are valid")
    }

    /// Reads steps from a network, ignoring rate coefficients.
    pub fn from_network(network: &ReactionNetwork) -> Self {
        ElementaryStepSet {
            species: network.species().to_vec(),
            steps: network
                .steps()
                .iter()
                .map(|s| ElementaryStep { reactants: s.reactants.clone(), products: s.products.clone() })
                .collect(),
            complexes_examined: 0,
        }
    }

    pub fn format_step(&self, r: usize) -> String {
        let net = self.to_network_unchecked();
        format!("{} -> {}", format_side(&net, &self.steps[r].reactants), format_side(&net, &self.steps[r].products))
    }

    fn to_network_unchecked(&self) -> ReactionNetwork {
        ReactionNetwork::new(self.species.clone(), Vec::new()).expect("valid species")
    }

    /// Step-list file: species with formulas, then one step per line.
    pub fn to_step_list(&self) -> String {
        let net = self.to_network_unchecked();
        let mut out = String::new();
        let names: Vec<&str> = self.species.iter().map(|s| s.name.as_str()).collect();
        writeln!(out, "species: {}", names.join(", ")).unwrap();
        for s in &self.species {
            if let Some(c) = &s.composition {
                writeln!(out, "{} = {}", s.name, c).unwrap();
            }
        }
        for step in &self.steps {
            writeln!(out, "{} -> {}", format_side(&net, &step.reactants), format_side(&net, &step.products)).unwrap();
        }
        out
    }

    /// Keeps the steps at `keep` (in that order).
    pub fn subset(&self, keep: &[usize]) -> Self {
        ElementaryStepSet {
            species: self.species.clone(),
            steps: keep.iter().map(|&r| self.steps[r].clone()).collect(),
            complexes_examined: self.complexes_examined,
        }
    }
}

/// Multisets of species indices of order `lo..=hi`, as sides, in
/// lexicographic order of the sorted index lists.
fn complexes(num_species: usize, lo: u32, hi: u32) -> Vec<Side> {
    fn rec(start: usize, m: usize, left: u32, cur: &mut Vec<usize>, out: &mut Vec<Side>) {
        if left == 0 {
            out.push(normalize_side(cur.iter().map(|&i| (i, 1))));
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i, m, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for order in lo..=hi {
        rec(0, num_species, order, &mut Vec::new(), &mut out);
    }
    out
}

/// All product complexes `b` with `E·b = target`, at most `cap` in order.
fn balanced_complexes(e: &AtomicMatrix, target: &[i64], cap: Option<u32>, excluded: &[bool]) -> Vec<Side> {
    struct Ctx<'a> {
        e: &'a AtomicMatrix,
        cols: Vec<Vec<i64>>,
        cap: Option<u32>,
        excluded: &'a [bool],
    }
    fn rec(ctx: &Ctx, out: &mut Vec<Side>, start: usize, rest: &mut Vec<i64>, cur: &mut Vec<usize>) {
        if rest.iter().all(|&v| v == 0) {
            out.push(normalize_side(cur.iter().map(|&i| (i, 1))));
        }
        if ctx.cap.is_some_and(|c| cur.len() as u32 >= c) {
            return;
        }
        let atoms = ctx.e.rows.len() - 1;
        for i in start..ctx.cols.len() {
            if ctx.excluded[i] {
                continue;
            }
            let col = &ctx.cols[i];
            if (0..atoms).any(|k| col[k] > rest[k]) {
                continue;
            }
            for (r, c) in rest.iter_mut().zip(col) {
                *r -= c;
            }
            cur.push(i);
            rec(ctx, out, i, rest, cur);
            cur.pop();
            for (r, c) in rest.iter_mut().zip(col) {
                *r += c;
            }
        }
    }
    let cols = (0..e.num_species()).map(|i| e.column(i)).collect();
    let ctx = Ctx { e, cols, cap, excluded };
    let mut out = Vec::new();
    rec(&ctx, &mut out, 0, &mut target.to_vec(), &mut Vec::new());
    out
}

/// Every balanced step `a → b` whose reactant complex has order
/// 1..=`max_reactant_order`, subject to `rules`. One balance system is
/// solved per reactant complex; with order two that is `2M + C(M,2)`.
pub fn generate_steps(
    species: &[Species],
    atomic: &AtomicMatrix,
    rules: &StepRules,
) -> Result<ElementaryStepSet, DecompositionError> {
    let m = species.len();
    if rules.max_product_order.is_none() {
        let atoms = atomic.rows.len() - 1;
        if let Some(i) = (0..m).find(|&i| (0..atoms).all(|k| atomic.entries[k][i] == 0)) {
            return Err(DecompositionError::AtomFreeSpecies(species[i].name.clone()));
        }
    }
    let reactants = complexes(m, 1, rules.max_reactant_order);
    let steps: Vec<ElementaryStep> = reactants
        .par_iter()
        .flat_map_iter(|a| {
            let mut excluded = vec![false; m];
            if rules.disjoint_sides {
                for &(i, _) in a {
                    excluded[i] = true;
                }
            }
            balanced_complexes(atomic, &atomic.apply(a), rules.max_product_order, &excluded)
                .into_iter()
                .filter(move |b| b != a)
                .map(move |b| ElementaryStep { reactants: a.clone(), products: b })
        })
        .collect();
    Ok(ElementaryStepSet { species: species.to_vec(), steps, complexes_examined: reactants.len() })
}

/// Result of Volpert pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolpertFilter {
    /// Indices of steps with a finite Volpert index.
    pub surviving: Vec<usize>,
    /// Species that can never be formed.
    pub ungenerable: Vec<usize>,
}

/// Drops steps that cannot fire when only `initial` is present at the
/// start, whatever the rate coefficients.
pub fn volpert_filter(set: &ElementaryStepSet, initial: &[usize]) -> VolpertFilter {
    let ix = volpert_index(&set.to_network(), initial);
    VolpertFilter { surviving: ix.reachable_steps(), ungenerable: ix.unreachable_species() }
}

/// Reads a species file: one `name = formula` line per species, `#`
/// comments allowed.
pub fn parse_species_file(text: &str) -> Result<Vec<Species>, DecompositionError> {
    let doc = parse_document(text)?;
    let mut species: Vec<Species> = doc.species.iter().map(Species::new).collect();
    for (name, comp) in &doc.annotations {
        let i = doc.species.iter().position(|s| s == name).expect("registered");
        species[i].composition = Some(comp.clone());
    }
    if let Some(s) = species.iter().find(|s| s.composition.is_none()) {
        return Err(DecompositionError::MissingComposition(s.name.clone()));
    }
    Ok(species)
}

/// Net change of an overall reaction such as `H2 + Br2 -> 2 HBr` over the
/// given species.
pub fn parse_overall(species: &[Species], text: &str) -> Result<Vec<i64>, DecompositionError> {
    let names: Vec<&str> = species.iter().map(|s| s.name.as_str()).collect();
    let doc = parse_document(&format!("species: {}\n{}", names.join(", "), text.trim()))
        .map_err(|e| DecompositionError::Overall(e.kind.to_string()))?;
    if let Some(extra) = doc.species.get(names.len()) {
        return Err(DecompositionError::UnknownSpecies(extra.clone()));
    }
    match doc.reactions.as_slice() {
        [r] if !r.reversible => {
            let mut g = vec![0i64; names.len()];
            for (n, c) in &r.lhs {
                g[names.iter().position(|s| s == n).unwrap()] -= *c as i64;
            }
            for (n, c) in &r.rhs {
                g[names.iter().position(|s| s == n).unwrap()] += *c as i64;
            }
            Ok(g)
        }
        _ => Err(DecompositionError::Overall("expected exactly one irreversible reaction".into())),
    }
}

/// Resolves species names to indices.
pub fn species_indices(species: &[Species], names: &[impl AsRef<str>]) -> Result<Vec<usize>, DecompositionError> {
    names
        .iter()
        .map(|n| {
            let n = n.as_ref();
            species.iter().position(|s| s.name == n).ok_or_else(|| DecompositionError::UnknownSpecies(n.to_string()))
        })
        .collect()
}

/// The 19-species permanganate/oxalic acid fixture.
pub const PERMANGANATE_SPECIES: &str = include_str!("../../data/permanganate.species");
/// Its overall reaction.
pub const PERMANGANATE_OVERALL: &str = include_str!("../../data/permanganate.overall");
/// Five-species hydrogen/bromine toy system.
pub const HBR_SPECIES: &str = include_str!("../../data/hbr.species");
pub const HBR_OVERALL: &str = include_str!("../../data/hbr.overall");

/// Named initial species sets for the permanganate fixture: `bold` (the
/// five species present at the start), `bold+H` (those plus H⁺, which the
/// overall reaction consumes) and `noncomplex` (every species that is not a
/// bracketed complex).
pub fn initial_preset(name: &str) -> Option<&'static [&'static str]> {
    const BOLD: &[&str] = &["H2C2O4", "Mn2p", "MnO4m", "MnO2", "MnC2O42m"];
    const BOLD_H: &[&str] = &["H2C2O4", "Mn2p", "MnO4m", "MnO2", "MnC2O42m", "Hp"];
    const NONCOMPLEX: &[&str] =
        &["H2C2O4", "HC2O4m", "Hp", "C2O4mm", "Mn2p", "MnC2O4", "MnO4m", "MnO2", "Mn3p", "CO2", "H2O", "CO2m"];
    match name {
        "bold" => Some(BOLD),
        "bold+H" => Some(BOLD_H),
        "noncomplex" => Some(NONCOMPLEX),
        _ => None,
    }
}

/// Settings of the full pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeOptions {
    pub rules: StepRules,
    /// Keep candidate steps whose net change equals the overall reaction.
    pub keep_overall: bool,
    /// Prune with Volpert indexing from these species.
    pub initial: Option<Vec<usize>>,
    pub enumeration: EnumerationOptions,
}

impl DecomposeOptions {
    pub fn new(max_total: u32) -> Self {
        DecomposeOptions {
            rules: StepRules::default(),
            keep_overall: false,
            initial: None,
            enumeration: EnumerationOptions::new(max_total),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub overall: Vec<i64>,
    pub complexes_examined: usize,
    pub generated: usize,
    /// Candidate steps equal to the overall reaction, dropped.
    pub removed_overall: usize,
    /// The steps the decompositions are expressed in.
    pub steps: ElementaryStepSet,
    pub ungenerable: Vec<usize>,
    pub bounds: LpBounds,
    pub enumeration: Enumeration,
}

/// Generation (or a given step set), overall-step removal, Volpert
/// pruning, LP bounds and enumeration.
pub fn decompose(
    species: &[Species],
    given_steps: Option<ElementaryStepSet>,
    overall: &[i64],
    options: &DecomposeOptions,
) -> Result<DecompositionReport, DecompositionError> {
    let set = match given_steps {
        Some(s) => s,
        None => generate_steps(species, &atomic_matrix(species)?, &options.rules)?,
    };
    let generated = set.steps.len();
    let m = set.species.len();
    let keep: Vec<usize> =
        (0..generated).filter(|&r| options.keep_overall || set.steps[r].gamma(m) != overall).collect();
    let removed_overall = generated - keep.len();
    let mut set = set.subset(&keep);
    let mut ungenerable = Vec::new();
    if let Some(initial) = &options.initial {
        let f = volpert_filter(&set, initial);
        set = set.subset(&f.surviving);
        ungenerable = f.ungenerable;
    }
    let columns = set.gamma_columns();
    let bounds = lp_bounds(&columns, overall)?;
    let enumeration = enumerate_decompositions(&columns, overall, &options.enumeration);
    Ok(DecompositionReport {
        overall: overall.to_vec(),
        complexes_examined: set.complexes_examined,
        generated,
        removed_overall,
        steps: set,
        ungenerable,
        bounds,
        enumeration,
    })
}

impl DecompositionReport {
    /// Human-readable summary with one block of `multiplicity × step` lines
    /// per decomposition.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "reactant complexes examined: {}", self.complexes_examined).unwrap();
        writeln!(out, "steps generated: {}", self.generated).unwrap();
        if self.removed_overall > 0 {
            writeln!(out, "steps equal to the overall reaction removed: {}", self.removed_overall).unwrap();
        }
        writeln!(out, "steps used: {}", self.steps.steps.len()).unwrap();
        if !self.ungenerable.is_empty() {
            let names: Vec<&str> = self.ungenerable.iter().map(|&i| self.steps.species[i].name.as_str()).collect();
            writeln!(out, "species that cannot be formed: {}", names.join(", ")).unwrap();
        }
        writeln!(out, "LP lower bound on steps: {} (exact {})", self.bounds.min_total_steps(), self.bounds.min_total)
            .unwrap();
        for (r, lb) in self.bounds.forced_steps() {
            writeln!(out, "in every decomposition, at least {lb} × {}", self.steps.format_step(r)).unwrap();
        }
        let status = if self.enumeration.complete { "complete" } else { "incomplete, node budget exhausted" };
        writeln!(out, "decompositions found: {} ({status})", self.enumeration.solutions.len()).unwrap();
        for (k, sol) in self.enumeration.solutions.iter().enumerate() {
            writeln!(out, "\n# decomposition {} ({} steps)", k + 1, sol.total).unwrap();
            for &(r, v) in &sol.multiplicities {
                writeln!(out, "{v} × {}", self.steps.format_step(r)).unwrap();
            }
        }
        out
    }

    /// One row `x_1,…,x_R` per decomposition.
    pub fn to_csv(&self) -> String {
        let n = self.steps.steps.len();
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|r| format!("x_{r}")).collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for sol in &self.enumeration.solutions {
            let row: Vec<String> = sol.dense(n).iter().map(u32::to_string).collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}
