//! Reaction kinetics toolkit.
//!
//! Parses chemical reaction networks, builds and integrates their
//! mass-action kinetic equations, simulates the stochastic jump model,
//! analyzes network structure with Volpert graphs and indexing, decomposes
//! overall reactions into elementary steps, and estimates rate coefficients
//! from time series.

pub mod cli;
pub mod decomposition;
pub mod deterministic;
pub mod estimation;
pub mod graphs;
pub mod model;
pub mod parser;
pub mod plot;
pub mod stochastic;

pub use model::{
    arrhenius, conserved_quantities, mass_action_jacobian, mass_action_rhs, stoichiometry, MassAction, ModelError,
    ReactionNetwork, ReactionStep, Species, Stoichiometry, GAS_CONSTANT,
};
pub use parser::{parse_formula, parse_network, serialize_network, Composition, ParseError};
