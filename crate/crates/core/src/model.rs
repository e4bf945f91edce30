//! Reaction network data model and the mass-action kinetics built on it.
//!
//! A network of `M` species and `R` steps
//! `Σ_m α(m,r) X(m) → Σ_m β(m,r) X(m)` induces the kinetic ODE
//! `ċ = γ · (k ⊙ c^α)` with `γ = β − α`, where `c^α` is the vector of
//! monomials `∏_m c_m^α(m,r)` and `0^0 = 1`.
//!
//! Rate coefficients carry units of `(concentration)^(1 − order) · time⁻¹`;
//! the order of a step is the sum of its reactant coefficients. Units are
//! never checked.
//!
//! External species are held at a fixed level. They are not part of the
//! state vector; their level raised to the reactant coefficient multiplies
//! into the effective rate of every step that consumes them.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::parser::Composition;

/// Universal gas constant in J·mol⁻¹·K⁻¹.
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Avogadro constant in mol⁻¹.
pub const AVOGADRO: f64 = 6.022_140_76e23;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate species name '{0}'")]
    DuplicateSpecies(String),
    #[error("species name must be nonempty")]
    EmptyName,
    #[error("step {step} references unknown species index {index}")]
    UnknownSpecies { step: usize, index: usize },
    #[error("step {0} has identical reactant and product sides")]
    NullStep(usize),
    #[error("step {step} has invalid rate coefficient {rate}")]
    InvalidRate { step: usize, rate: f64 },
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("no species named '{0}'")]
    NoSuchSpecies(String),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub composition: Option<Composition>,
    /// Held at a constant level and excluded from the dynamic state.
    pub external: bool,
}

impl Species {
    pub fn new(name: impl Into<String>) -> Self {
        Species { name: name.into(), composition: None, external: false }
    }

    pub fn external(name: impl Into<String>) -> Self {
        Species { external: true, ..Species::new(name) }
    }

    pub fn with_composition(mut self, composition: Composition) -> Self {
        self.composition = Some(composition);
        self
    }
}

/// A stoichiometric side: `(species index, coefficient)` pairs, sorted by
/// index, coefficients strictly positive.
pub type Side = Vec<(usize, u32)>;

pub(crate) fn normalize_side(side: impl IntoIterator<Item = (usize, u32)>) -> Side {
    let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
    for (i, n) in side {
        if n > 0 {
            *merged.entry(i).or_insert(0) += n;
        }
    }
    merged.into_iter().collect()
}

pub(crate) fn side_order(side: &[(usize, u32)]) -> u32 {
    side.iter().map(|&(_, n)| n).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionStep {
    pub reactants: Side,
    pub products: Side,
    pub rate: f64,
}

impl ReactionStep {
    pub fn new(
        reactants: impl IntoIterator<Item = (usize, u32)>,
        products: impl IntoIterator<Item = (usize, u32)>,
        rate: f64,
    ) -> Self {
        ReactionStep { reactants: normalize_side(reactants), products: normalize_side(products), rate }
    }

    pub fn order(&self) -> u32 {
        side_order(&self.reactants)
    }

    pub fn reactant_coeff(&self, species: usize) -> u32 {
        self.reactants.iter().find(|&&(i, _)| i == species).map_or(0, |&(_, n)| n)
    }

    pub fn product_coeff(&self, species: usize) -> u32 {
        self.products.iter().find(|&&(i, _)| i == species).map_or(0, |&(_, n)| n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    steps: Vec<ReactionStep>,
    /// Fixed level per species; only read for external species.
    external_levels: Vec<f64>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<Species>, steps: Vec<ReactionStep>) -> Result<Self, ModelError> {
        let mut seen = HashMap::new();
        for s in &species {
            if s.name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if seen.insert(s.name.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateSpecies(s.name.clone()));
            }
        }
        for (r, step) in steps.iter().enumerate() {
            for &(i, _) in step.reactants.iter().chain(&step.products) {
                if i >= species.len() {
                    return Err(ModelError::UnknownSpecies { step: r, index: i });
                }
            }
            if step.reactants == step.products {
                return Err(ModelError::NullStep(r));
            }
            if !(step.rate >= 0.0 && step.rate.is_finite()) {
                return Err(ModelError::InvalidRate { step: r, rate: step.rate });
            }
        }
        let external_levels = vec![1.0; species.len()];
        Ok(ReactionNetwork { species, steps, external_levels })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn steps(&self) -> &[ReactionStep] {
        &self.steps
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    /// Indices of the species that make up the dynamic state, in order.
    pub fn internal_indices(&self) -> Vec<usize> {
        (0..self.species.len()).filter(|&i| !self.species[i].external).collect()
    }

    pub fn internal_names(&self) -> Vec<String> {
        self.internal_indices().into_iter().map(|i| self.species[i].name.clone()).collect()
    }

    pub fn num_internal(&self) -> usize {
        self.species.iter().filter(|s| !s.external).count()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.rate).collect()
    }

    pub fn external_level(&self, species: usize) -> f64 {
        self.external_levels[species]
    }

    pub fn set_external_level(&mut self, name: &str, level: f64) -> Result<(), ModelError> {
        let i = self.species_index(name).ok_or_else(|| ModelError::NoSuchSpecies(name.into()))?;
        self.external_levels[i] = level;
        Ok(())
    }

    pub fn set_rates(&mut self, k: &[f64]) -> Result<(), ModelError> {
        check_len("rate coefficients", self.steps.len(), k.len())?;
        for (r, (step, &kr)) in self.steps.iter_mut().zip(k).enumerate() {
            if !(kr >= 0.0 && kr.is_finite()) {
                return Err(ModelError::InvalidRate { step: r, rate: kr });
            }
            step.rate = kr;
        }
        Ok(())
    }

    /// Product of external levels raised to their reactant coefficients,
    /// per step.
    pub fn external_factors(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|step| {
                step.reactants
                    .iter()
                    .filter(|&&(i, _)| self.species[i].external)
                    .map(|&(i, n)| self.external_levels[i].powi(n as i32))
                    .product()
            })
            .collect()
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { what, expected, got })
    }
}

/// The molecularity matrices of a network, rows ordered as the species
/// (externals included), columns as the steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Stoichiometry {
    pub alpha: DMatrix<i64>,
    pub beta: DMatrix<i64>,
    pub gamma: DMatrix<i64>,
}

pub fn stoichiometry(network: &ReactionNetwork) -> Stoichiometry {
    let (m, r) = (network.num_species(), network.num_steps());
    let mut alpha = DMatrix::zeros(m, r);
    let mut beta = DMatrix::zeros(m, r);
    for (j, step) in network.steps().iter().enumerate() {
        for &(i, n) in &step.reactants {
            alpha[(i, j)] = n as i64;
        }
        for &(i, n) in &step.products {
            beta[(i, j)] = n as i64;
        }
    }
    let gamma = &beta - &alpha;
    Stoichiometry { alpha, beta, gamma }
}

/// Mass-action kinetics of a network with a fixed rate vector, restricted
/// to the internal species. Construct once and evaluate many times.
#[derive(Debug, Clone)]
pub struct MassAction {
    dim: usize,
    /// Per step: effective rate (k times external factor).
    rates: Vec<f64>,
    /// Per step: reactants over internal indices.
    reactants: Vec<Vec<(usize, u32)>>,
    /// Per step: net change over internal indices, zero entries dropped.
    changes: Vec<Vec<(usize, f64)>>,
}

impl MassAction {
    pub fn new(network: &ReactionNetwork, k: &[f64]) -> Result<Self, ModelError> {
        check_len("rate coefficients", network.num_steps(), k.len())?;
        for (r, &kr) in k.iter().enumerate() {
            if !(kr >= 0.0 && kr.is_finite()) {
                return Err(ModelError::InvalidRate { step: r, rate: kr });
            }
        }
        let internal = network.internal_indices();
        let mut position = vec![usize::MAX; network.num_species()];
        for (p, &i) in internal.iter().enumerate() {
            position[i] = p;
        }
        let factors = network.external_factors();
        let gamma = stoichiometry(network).gamma;
        let mut reactants = Vec::with_capacity(k.len());
        let mut changes = Vec::with_capacity(k.len());
        for (r, step) in network.steps().iter().enumerate() {
            reactants.push(
                step.reactants
                    .iter()
                    .filter(|&&(i, _)| !network.species()[i].external)
                    .map(|&(i, n)| (position[i], n))
                    .collect(),
            );
            changes.push(
                internal
                    .iter()
                    .enumerate()
                    .filter(|&(_, &i)| gamma[(i, r)] != 0)
                    .map(|(p, &i)| (p, gamma[(i, r)] as f64))
                    .collect(),
            );
        }
        let rates = k.iter().zip(&factors).map(|(k, f)| k * f).collect();
        Ok(MassAction { dim: internal.len(), rates, reactants, changes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_steps(&self) -> usize {
        self.rates.len()
    }

    /// Reaction rates `k_r · ∏ c_m^α(m,r)` at state `c`.
    pub fn step_rates(&self, c: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.rates[r] * monomial(&self.reactants[r], c);
        }
    }

    pub fn rhs_into(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for r in 0..self.rates.len() {
            let w = self.rates[r] * monomial(&self.reactants[r], c);
            if w != 0.0 {
                for &(i, g) in &self.changes[r] {
                    out[i] += g * w;
                }
            }
        }
    }

    pub fn rhs(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.rhs_into(c, &mut out);
        out
    }

    /// Analytic Jacobian `∂rhs_i/∂c_j`, written into a `dim × dim` matrix.
    pub fn jacobian_into(&self, c: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for r in 0..self.rates.len() {
            let reactants = &self.reactants[r];
            for (q, &(j, n)) in reactants.iter().enumerate() {
                // d/dc_j of c_j^n times the remaining factors
                let mut d = self.rates[r] * n as f64 * pow_u(c[j], n - 1);
                for (s, &(l, m)) in reactants.iter().enumerate() {
                    if s != q {
                        d *= pow_u(c[l], m);
                    }
                }
                if d != 0.0 {
                    for &(i, g) in &self.changes[r] {
                        jac[(i, j)] += g * d;
                    }
                }
            }
        }
    }

    pub fn jacobian(&self, c: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        self.jacobian_into(c, &mut jac);
        jac
    }
}

/// `x^n` with `0^0 = 1`.
fn pow_u(x: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(n as i32),
    }
}

fn monomial(reactants: &[(usize, u32)], c: &[f64]) -> f64 {
    reactants.iter().map(|&(i, n)| pow_u(c[i], n)).product()
}

/// `γ · (k ⊙ c^α)` over the internal species.
pub fn mass_action_rhs(network: &ReactionNetwork, k: &[f64], c: &[f64]) -> Result<Vec<f64>, ModelError> {
    let system = MassAction::new(network, k)?;
    check_len("state entries", system.dim(), c.len())?;
    Ok(system.rhs(c))
}

pub fn mass_action_jacobian(network: &ReactionNetwork, k: &[f64], c: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    let system = MassAction::new(network, k)?;
    check_len("state entries", system.dim(), c.len())?;
    Ok(system.jacobian(c))
}

/// Integer basis of the left kernel of `γ` restricted to the internal
/// species: every returned `v` satisfies `vᵀγ = 0`. Computed over exact
/// rationals; each vector is scaled to coprime integers with its first
/// nonzero entry positive.
pub fn conserved_quantities(network: &ReactionNetwork) -> Vec<Vec<i64>> {
    let internal = network.internal_indices();
    let gamma = stoichiometry(network).gamma;
    // Rows of γᵀ restricted to internal columns; the kernel of this matrix
    // is the left kernel of γ.
    let rows: Vec<Vec<BigInt>> =
        (0..network.num_steps()).map(|r| internal.iter().map(|&i| BigInt::from(gamma[(i, r)])).collect()).collect();
    integer_kernel(&rows, internal.len())
}

/// Kernel of an integer matrix (given by rows, `cols` columns) as coprime
/// integer vectors.
pub(crate) fn integer_kernel(rows: &[Vec<BigInt>], cols: usize) -> Vec<Vec<i64>> {
    let mut a: Vec<Vec<BigRational>> =
        rows.iter().map(|row| row.iter().map(|v| BigRational::from_integer(v.clone())).collect()).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..a.len()).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for v in a[row].iter_mut() {
            *v *= &inv;
        }
        for i in 0..a.len() {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..cols {
                    let sub = &f * &a[row][j];
                    a[i][j] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == a.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[r][f].clone();
            }
            to_coprime(&v)
        })
        .collect()
}

fn to_coprime(v: &[BigRational]) -> Vec<i64> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let sign = match ints.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => -BigInt::one(),
        _ => BigInt::one(),
    };
    ints.iter()
        .map(|x| {
            let y: BigInt = x / &gcd * &sign;
            i64::try_from(y).expect("conservation law entry exceeds i64")
        })
        .collect()
}

/// `k0 · Tⁿ · exp(−A / (R·T))`.
pub fn arrhenius(k0: f64, n: f64, activation: f64, temperature: f64, gas_constant: f64) -> Result<f64, ModelError> {
    if !(temperature > 0.0) {
        return Err(ModelError::NonPositiveTemperature(temperature));
    }
    Ok(k0 * temperature.powf(n) * (-activation / (gas_constant * temperature)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robertson() -> ReactionNetwork {
        let species = ["A", "B", "C"].map(Species::new).to_vec();
        let steps = vec![
            ReactionStep::new([(0, 1)], [(1, 1)], 0.04),
            ReactionStep::new([(1, 2)], [(1, 1), (2, 1)], 3e7),
            ReactionStep::new([(1, 1), (2, 1)], [(0, 1), (2, 1)], 1e4),
        ];
        ReactionNetwork::new(species, steps).unwrap()
    }

    #[test]
    fn robertson_gamma_columns() {
        let s = stoichiometry(&robertson());
        let cols: Vec<Vec<i64>> = (0..3).map(|j| s.gamma.column(j).iter().copied().collect()).collect();
        assert_eq!(cols, vec![vec![-1, 1, 0], vec![0, -1, 1], vec![1, -1, 0]]);
        assert_eq!(s.gamma, &s.beta - &s.alpha);
    }

    #[test]
    fn empty_step_list() {
        let n = ReactionNetwork::new(vec![Species::new("A")], vec![]).unwrap();
        let s = stoichiometry(&n);
        assert_eq!(s.alpha.ncols(), 0);
        assert_eq!(s.gamma.nrows(), 1);
        assert_eq!(conserved_quantities(&n), vec![vec![1]]);
    }

    #[test]
    fn autocatalytic_step() {
        let n =
            ReactionNetwork::new(vec![Species::new("X")], vec![ReactionStep::new([(0, 1)], [(0, 2)], 1.0)]).unwrap();
        let s = stoichiometry(&n);
        assert_eq!((s.alpha[(0, 0)], s.beta[(0, 0)], s.gamma[(0, 0)]), (1, 2, 1));
        assert!(conserved_quantities(&n).is_empty());
    }

    #[test]
    fn robertson_rhs_polynomial() {
        let (a, b, c) = (0.7, 2e-5, 0.3);
        let rhs = mass_action_rhs(&robertson(), &[0.04, 3e7, 1e4], &[a, b, c]).unwrap();
        let expected = [-0.04 * a + 1e4 * b * c, 0.04 * a - 3e7 * b * b - 1e4 * b * c, 3e7 * b * b];
        for (x, y) in rhs.iter().zip(expected) {
            assert!((x - y).abs() <= 1e-15 * y.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_state_gives_zero_rhs() {
        let rhs = mass_action_rhs(&robertson(), &[0.04, 3e7, 1e4], &[0.0; 3]).unwrap();
        assert_eq!(rhs, vec![0.0; 3]);
    }

    #[test]
    fn two_x_reversible_rhs() {
        let n = ReactionNetwork::new(
            vec![Species::new("X")],
            vec![ReactionStep::new([(0, 2)], [(0, 1)], 0.33), ReactionStep::new([(0, 1)], [(0, 2)], 0.72)],
        )
        .unwrap();
        let rhs = mass_action_rhs(&n, &[0.33, 0.72], &[2.0]).unwrap();
        assert!((rhs[0] - 0.12).abs() < 1e-14);
        let jac = mass_action_jacobian(&n, &[0.33, 0.0], &[1.5]).unwrap();
        assert!((jac[(0, 0)] - (-2.0 * 0.33 * 1.5)).abs() < 1e-14);
    }

    #[test]
    fn linear_jacobian() {
        let n = ReactionNetwork::new(
            vec![Species::new("A"), Species::new("B")],
            vec![ReactionStep::new([(0, 1)], [(1, 1)], 1.0)],
        )
        .unwrap();
        let jac = mass_action_jacobian(&n, &[1.0], &[0.3, 0.9]).unwrap();
        assert_eq!(jac, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]));
        assert_eq!(conserved_quantities(&n), vec![vec![1, 1]]);
    }

    #[test]
    fn robertson_jacobian_matches_central_differences() {
        let net = robertson();
        let k = [0.04, 3e7, 1e4];
        let c = [1.0, 0.0, 0.0];
        let jac = mass_action_jacobian(&net, &k, &c).unwrap();
        for j in 0..3 {
            let h = 1e-7;
            let mut up = c;
            let mut dn = c;
            up[j] += h;
            dn[j] -= h;
            let fu = mass_action_rhs(&net, &k, &up).unwrap();
            let fd = mass_action_rhs(&net, &k, &dn).unwrap();
            for i in 0..3 {
                let fdiff = (fu[i] - fd[i]) / (2.0 * h);
                let scale = jac[(i, j)].abs().max(1.0);
                assert!((fdiff - jac[(i, j)]).abs() / scale <= 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn robertson_conserves_total() {
        assert_eq!(conserved_quantities(&robertson()), vec![vec![1, 1, 1]]);
    }

    #[test]
    fn external_species_fold_into_rates() {
        let mut n = ReactionNetwork::new(
            vec![Species::external("A"), Species::new("X")],
            vec![ReactionStep::new([(0, 1)], [(1, 1)], 2.0), ReactionStep::new([(1, 1)], [], 0.5)],
        )
        .unwrap();
        n.set_external_level("A", 3.0).unwrap();
        let rhs = mass_action_rhs(&n, &[2.0, 0.5], &[4.0]).unwrap();
        assert_eq!(rhs, vec![6.0 - 2.0]);
        assert!(matches!(mass_action_rhs(&n, &[2.0, 0.5], &[4.0, 1.0]), Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn arrhenius_values() {
        assert_eq!(arrhenius(3.5, 0.0, 0.0, 420.0, GAS_CONSTANT).unwrap(), 3.5);
        assert!((arrhenius(1.0, 1.0, 0.0, 300.0, GAS_CONSTANT).unwrap() - 300.0).abs() < 1e-12);
        let v = arrhenius(1.0, 0.0, GAS_CONSTANT * 300.0, 300.0, GAS_CONSTANT).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert!(arrhenius(1.0, 0.0, 0.0, 0.0, GAS_CONSTANT).is_err());
    }

    #[test]
    fn invalid_networks() {
        assert!(matches!(
            ReactionNetwork::new(vec![Species::new("A"), Species::new("A")], vec![]),
            Err(ModelError::DuplicateSpecies(_))
        ));
        assert!(matches!(
            ReactionNetwork::new(vec![Species::new("A")], vec![ReactionStep::new([(0, 1)], [(0, 1)], 1.0)]),
            Err(ModelError::NullStep(0))
        ));
        assert!(matches!(
            ReactionNetwork::new(vec![Species::new("A")], vec![ReactionStep::new([(0, 1)], [(3, 1)], 1.0)]),
            Err(ModelError::UnknownSpecies { .. })
        ));
    }
}
