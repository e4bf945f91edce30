//! Volpert graphs and Volpert indexing.
//!
//! The Volpert graph is the directed bipartite multigraph with an edge of
//! multiplicity `α(m,r)` from species `m` to step `r` and one of
//! multiplicity `β(m,r)` from step `r` to species `m`.
//!
//! Indexing starts from a set of initially present species (index 0) and
//! relaxes to the unique fixpoint of
//!
//! * index of a step = 1 + max index of its reactants (1 for an empty side),
//! * index of a non-initial species = min index of the steps producing it.
//!
//! Objects never reached stay [`VolpertIndex::Unreachable`]: they cannot
//! appear whatever the rate coefficients are.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;

use crate::model::ReactionNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Species(usize),
    Step(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: Vertex,
    pub to: Vertex,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolpertGraph {
    pub species: Vec<String>,
    pub steps: Vec<String>,
    pub edges: Vec<Edge>,
}

impl VolpertGraph {
    /// Sum of edge multiplicities.
    pub fn edge_units(&self) -> u32 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    pub fn multiplicity(&self, from: Vertex, to: Vertex) -> u32 {
        self.edges.iter().filter(|e| e.from == from && e.to == to).map(|e| e.multiplicity).sum()
    }
}

/// Step labels used in graphs and reports: `R1`, `R2`, ...
pub fn step_label(r: usize) -> String {
    format!("R{}", r + 1)
}

pub fn volpert_graph(network: &ReactionNetwork) -> VolpertGraph {
    let mut edges = Vec::new();
    for (r, step) in network.steps().iter().enumerate() {
        for &(m, n) in &step.reactants {
            edges.push(Edge { from: Vertex::Species(m), to: Vertex::Step(r), multiplicity: n });
        }
        for &(m, n) in &step.products {
            edges.push(Edge { from: Vertex::Step(r), to: Vertex::Species(m), multiplicity: n });
        }
    }
    VolpertGraph { species: network.species_names(), steps: (0..network.num_steps()).map(step_label).collect(), edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VolpertIndex {
    Index(u32),
    Unreachable,
}

impl VolpertIndex {
    pub fn value(self) -> Option<u32> {
        match self {
            VolpertIndex::Index(i) => Some(i),
            VolpertIndex::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, VolpertIndex::Index(_))
    }
}

impl fmt::Display for VolpertIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolpertIndex::Index(i) => write!(f, "{i}"),
            VolpertIndex::Unreachable => write!(f, "unreachable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolpertIndexing {
    pub species: Vec<VolpertIndex>,
    pub steps: Vec<VolpertIndex>,
}

impl VolpertIndexing {
    pub fn unreachable_species(&self) -> Vec<usize> {
        (0..self.species.len()).filter(|&i| !self.species[i].is_reachable()).collect()
    }

    pub fn reachable_steps(&self) -> Vec<usize> {
        (0..self.steps.len()).filter(|&r| self.steps[r].is_reachable()).collect()
    }

    /// Plain-text table of species and step indices.
    pub fn table(&self, network: &ReactionNetwork) -> String {
        let mut out = String::new();
        for (s, idx) in network.species().iter().zip(&self.species) {
            writeln!(out, "{}\t{}", s.name, idx).unwrap();
        }
        for (r, idx) in self.steps.iter().enumerate() {
            writeln!(out, "{}\t{}", step_label(r), idx).unwrap();
        }
        out
    }
}

/// Volpert indices from the species in `initial`. External species count as
/// initially present.
pub fn volpert_index(network: &ReactionNetwork, initial: &[usize]) -> VolpertIndexing {
    let m = network.num_species();
    let initial: HashSet<usize> =
        initial.iter().copied().chain((0..m).filter(|&i| network.species()[i].external)).collect();
    let mut species: Vec<Option<u32>> = (0..m).map(|i| initial.contains(&i).then_some(0)).collect();
    let mut steps: Vec<Option<u32>> = vec![None; network.num_steps()];
    // Worklist relaxation: indices only decrease and are bounded below, so
    // this terminates at the unique fixpoint.
    let mut changed = true;
    while changed {
        changed = false;
        for (r, step) in network.steps().iter().enumerate() {
            let idx =
                step.reactants.iter().try_fold(0u32, |acc, &(i, _)| species[i].map(|v| acc.max(v))).map(|v| v + 1);
            if let Some(v) = idx {
                if steps[r].is_none_or(|old| v < old) {
                    steps[r] = Some(v);
                    changed = true;
                }
                for &(i, _) in &step.products {
                    if species[i].is_none_or(|old| v < old) {
                        species[i] = Some(v);
                        changed = true;
                    }
                }
            }
        }
    }
    let wrap = |v: Option<u32>| v.map_or(VolpertIndex::Unreachable, VolpertIndex::Index);
    VolpertIndexing { species: species.into_iter().map(wrap).collect(), steps: steps.into_iter().map(wrap).collect() }
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT digraph: species as ellipses, steps as boxes, multiplicities above
/// one as edge labels. With an indexing, vertices are annotated with their
/// index and unreachable ones are grayed out.
pub fn export_dot(graph: &VolpertGraph, indexing: Option<&VolpertIndexing>) -> String {
    let mut out = String::from("digraph {\n");
    let style = |idx: Option<VolpertIndex>, label: &str| match idx {
        None => format!("label={}", dot_id(label)),
        Some(VolpertIndex::Index(i)) => format!("label={}", dot_id(&format!("{label} [{i}]"))),
        Some(VolpertIndex::Unreachable) => {
            format!("label={}, style=filled, color=gray, fontcolor=gray40", dot_id(label))
        }
    };
    for (i, s) in graph.species.iter().enumerate() {
        let idx = indexing.map(|ix| ix.species[i]);
        writeln!(out, "  {} [shape=ellipse, {}];", dot_id(s), style(idx, s)).unwrap();
    }
    for (r, s) in graph.steps.iter().enumerate() {
        let idx = indexing.map(|ix| ix.steps[r]);
        writeln!(out, "  {} [shape=box, {}];", dot_id(s), style(idx, s)).unwrap();
    }
    let name = |v: Vertex| match v {
        Vertex::Species(i) => dot_id(&graph.species[i]),
        Vertex::Step(r) => dot_id(&graph.steps[r]),
    };
    for e in &graph.edges {
        if e.multiplicity > 1 {
            writeln!(out, "  {} -> {} [label=\"{}\"];", name(e.from), name(e.to), e.multiplicity).unwrap();
        } else {
            writeln!(out, "  {} -> {};", name(e.from), name(e.to)).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
