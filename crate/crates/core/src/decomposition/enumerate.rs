//! LP preprocessing and branch-and-bound enumeration of decompositions.
//!
//! Steps are given as columns of their net stoichiometric change, the
//! overall reaction as a target vector. A decomposition is a nonnegative
//! integer `x` with `Σ x_r γ_r = target`.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use super::simplex::{ceil_int, FeasibleTableau, LpOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("infeasible: no nonnegative combination of the steps gives the overall reaction")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpBounds {
    /// Exact minimum of `Σ x_r` over the rational relaxation.
    pub min_total: BigRational,
    /// Exact minimum of each `x_r` over the rational relaxation.
    pub lower_bounds: Vec<BigRational>,
    /// A relaxation optimum attaining `min_total`.
    pub witness: Vec<BigRational>,
}

impl LpBounds {
    /// Lower bound on the number of steps of any integer decomposition.
    pub fn min_total_steps(&self) -> u64 {
        ceil_int(&self.min_total).to_u64().unwrap_or(u64::MAX)
    }

    /// Steps that take part in every decomposition, with the integer lower
    /// bound on their multiplicity.
    pub fn forced_steps(&self) -> Vec<(usize, u64)> {
        self.lower_bounds
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_zero())
            .map(|(r, b)| (r, ceil_int(b).to_u64().unwrap_or(u64::MAX)))
            .collect()
    }
}

fn constraint_rows(columns: &[Vec<i64>], target: &[i64], from: usize) -> Vec<Vec<i64>> {
    (0..target.len()).map(|i| columns[from..].iter().map(|c| c[i]).collect()).collect()
}

/// Exact LP bounds: minimum total step count and per-step minimum
/// multiplicities of the rational relaxation.
pub fn lp_bounds(columns: &[Vec<i64>], target: &[i64]) -> Result<LpBounds, LpError> {
    let n = columns.len();
    let rows = constraint_rows(columns, target, 0);
    let tableau = FeasibleTableau::new(&rows, target).ok_or(LpError::Infeasible)?;
    let (min_total, witness) = match tableau.minimize(&vec![1; n]) {
        LpOutcome::Optimal { value, x } => (value, x),
        LpOutcome::Unbounded => return Err(LpError::Unbounded),
        LpOutcome::Infeasible => return Err(LpError::Infeasible),
    };
    // Any known feasible point with x_r = 0 already proves min x_r = 0, so
    // an LP is only solved for steps positive in every point seen so far.
    let mut known = vec![tableau.solution(), witness.clone()];
    let mut lower_bounds = vec![BigRational::zero(); n];
    for r in 0..n {
        if known.iter().any(|x| x[r].is_zero()) {
            continue;
        }
        let mut c = vec![0; n];
        c[r] = 1;
        match tableau.minimize(&c) {
            LpOutcome::Optimal { value, x } => {
                lower_bounds[r] = value;
                known.push(x);
            }
            _ => return Err(LpError::Unbounded),
        }
    }
    Ok(LpBounds { min_total, lower_bounds, witness })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecompositionSolution {
    /// `(step, multiplicity)` pairs with positive multiplicity, by step.
    pub multiplicities: Vec<(usize, u32)>,
    pub total: u32,
}

impl DecompositionSolution {
    pub fn from_dense(x: &[u32]) -> Self {
        let multiplicities: Vec<(usize, u32)> =
            x.iter().enumerate().filter(|(_, &v)| v > 0).map(|(r, &v)| (r, v)).collect();
        let total = multiplicities.iter().map(|&(_, v)| v).sum();
        DecompositionSolution { multiplicities, total }
    }

    pub fn dense(&self, num_steps: usize) -> Vec<u32> {
        let mut x = vec![0; num_steps];
        for &(r, v) in &self.multiplicities {
            x[r] = v;
        }
        x
    }

    /// Integer check of `Σ x_r γ_r = target`.
    pub fn verify(&self, columns: &[Vec<i64>], target: &[i64]) -> bool {
        let mut acc = vec![0i64; target.len()];
        for &(r, v) in &self.multiplicities {
            for (a, g) in acc.iter_mut().zip(&columns[r]) {
                *a += v as i64 * g;
            }
        }
        acc == target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    /// Only decompositions with at most this many steps are listed.
    pub max_total: u32,
    /// Search nodes allowed before giving up with a partial result.
    pub node_budget: u64,
}

impl EnumerationOptions {
    pub fn new(max_total: u32) -> Self {
        EnumerationOptions { max_total, node_budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Sorted, duplicate-free.
    pub solutions: Vec<DecompositionSolution>,
    /// False if the node budget ran out before the search finished.
    pub complete: bool,
    pub nodes: u64,
}

struct Search<'a> {
    columns: &'a [Vec<i64>],
    nodes: AtomicU64,
    exhausted: AtomicBool,
    budget: u64,
}

impl Search<'_> {
    /// False if the subproblem on columns `from..` with `residual` and at
    /// most `budget` further steps is provably empty.
    fn promising(&self, from: usize, residual: &[i64], budget: u32) -> bool {
        let n = self.columns.len();
        if residual.iter().all(|&v| v == 0) {
            return true;
        }
        if budget == 0 || from == n {
            return false;
        }
        // a species that must change but no remaining step touches
        for (i, &v) in residual.iter().enumerate() {
            if v != 0 && self.columns[from..].iter().all(|c| c[i] == 0) {
                return false;
            }
        }
        let rows = constraint_rows(self.columns, residual, from);
        let Some(t) = FeasibleTableau::new(&rows, residual) else {
            return false;
        };
        match t.minimize(&vec![1; n - from]) {
            LpOutcome::Optimal { value, .. } => ceil_int(&value) <= BigInt::from(budget),
            _ => true,
        }
    }

    fn explore(
        &self,
        j: usize,
        residual: Vec<i64>,
        budget: u32,
        x: &mut Vec<u32>,
        out: &mut Vec<DecompositionSolution>,
    ) {
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.budget {
            self.exhausted.store(true, Ordering::Relaxed);
            return;
        }
        let n = self.columns.len();
        if j == n {
            if residual.iter().all(|&v| v == 0) {
                out.push(DecompositionSolution::from_dense(x));
            }
            return;
        }
        if !self.promising(j, &residual, budget) {
            return;
        }
        let col = &self.columns[j];
        let mut r = residual;
        for v in 0..=budget {
            x[j] = v;
            self.explore(j + 1, r.clone(), budget - v, x, out);
            for (a, g) in r.iter_mut().zip(col) {
                *a -= g;
            }
        }
        x[j] = 0;
    }
}

/// All nonnegative integer `x` with `Σ x_r γ_r = target` and
/// `Σ x_r ≤ max_total`, by depth-first branch and bound in step order with
/// an exact LP prune at every node. The first branching level runs in
/// parallel; the result is sorted and does not depend on scheduling.
pub fn enumerate_decompositions(columns: &[Vec<i64>], target: &[i64], options: &EnumerationOptions) -> Enumeration {
    let search =
        Search { columns, nodes: AtomicU64::new(0), exhausted: AtomicBool::new(false), budget: options.node_budget };
    let n = columns.len();
    let max = options.max_total;
    let mut solutions: Vec<DecompositionSolution> = if n == 0 {
        let mut out = Vec::new();
        search.explore(0, target.to_vec(), max, &mut Vec::new(), &mut out);
        out
    } else if !search.promising(0, target, max) {
        Vec::new()
    } else {
        (0..=max)
            .into_par_iter()
            .flat_map_iter(|v| {
                let mut x = vec![0; n];
                x[0] = v;
                let residual: Vec<i64> = target.iter().zip(&columns[0]).map(|(t, g)| t - v as i64 * g).collect();
                let mut out = Vec::new();
                search.explore(1, residual, max - v, &mut x, &mut out);
                out
            })
            .collect()
    };
    solutions.sort();
    Enumeration {
        solutions,
        complete: !search.exhausted.load(Ordering::Relaxed),
        nodes: search.nodes.load(Ordering::Relaxed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    // species A, B, C; steps A→B, B→C, A→C, C→A
    fn chain() -> Vec<Vec<i64>> {
        vec![vec![-1, 1, 0], vec![0, -1, 1], vec![-1, 0, 1], vec![1, 0, -1]]
    }

    #[test]
    fn bounds_of_single_step() {
        let b = lp_bounds(&[vec![-1, 1]], &[-1, 1]).unwrap();
        assert_eq!(b.min_total, q(1));
        assert_eq!(b.lower_bounds, vec![q(1)]);
        assert_eq!(b.forced_steps(), vec![(0, 1)]);
    }

    #[test]
    fn bounds_prefer_direct_step() {
        let b = lp_bounds(&chain(), &[-2, 0, 2]).unwrap();
        assert_eq!(b.min_total, q(2));
        assert!(b.lower_bounds.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn infeasible_target() {
        assert_eq!(lp_bounds(&chain(), &[-1, 0, 0]), Err(LpError::Infeasible));
        let e = enumerate_decompositions(&chain(), &[-1, 0, 0], &EnumerationOptions::new(5));
        assert!(e.solutions.is_empty() && e.complete);
    }

    #[test]
    fn enumerates_with_cycles() {
        let e = enumerate_decompositions(&chain(), &[-1, 0, 1], &EnumerationOptions::new(3));
        let dense: Vec<Vec<u32>> = e.solutions.iter().map(|s| s.dense(4)).collect();
        // A→C; A→B,B→C; A→C plus the A→C/C→A cycle
        assert_eq!(dense.len(), 3);
        for want in [vec![0, 0, 1, 0], vec![1, 1, 0, 0], vec![0, 0, 2, 1]] {
            assert!(dense.contains(&want), "{want:?} missing from {dense:?}");
        }
        assert!(e.solutions.iter().all(|s| s.verify(&chain(), &[-1, 0, 1])));
    }

    #[test]
    fn budget_below_bound_is_empty() {
        let e = enumerate_decompositions(&chain(), &[-2, 0, 2], &EnumerationOptions::new(1));
        assert!(e.solutions.is_empty());
    }

    #[test]
    fn doubled_step() {
        let e = enumerate_decompositions(&[vec![-1, 1]], &[-2, 2], &EnumerationOptions::new(4));
        assert_eq!(e.solutions, vec![DecompositionSolution { multiplicities: vec![(0, 2)], total: 2 }]);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let opts = EnumerationOptions { max_total: 6, node_budget: 3 };
        let e = enumerate_decompositions(&chain(), &[-1, 0, 1], &opts);
        assert!(!e.complete);
    }
}
