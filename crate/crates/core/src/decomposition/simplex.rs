//! Exact two-phase primal simplex over arbitrary-precision rationals.
//!
//! Solves `min cᵀx` subject to `A x = b`, `x ≥ 0`. Bland's rule (smallest
//! index enters, ties in the ratio test broken by smallest basic index)
//! rules out cycling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: BigRational, x: Vec<BigRational> },
    Infeasible,
    Unbounded,
}

/// A feasible basis of `A x = b, x ≥ 0` that can be reused for several
/// objectives.
#[derive(Debug, Clone)]
pub struct FeasibleTableau {
    /// Rows of `[B⁻¹A | B⁻¹b]` after phase one, redundant rows removed.
    rows: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    n: usize,
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn pivot(rows: &mut [Vec<BigRational>], obj: &mut [BigRational], r: usize, col: usize) {
    let p = rows[r][col].clone();
    for v in rows[r].iter_mut() {
        *v /= &p;
    }
    let pivot_row = rows[r].clone();
    let eliminate = |row: &mut [BigRational]| {
        let f = row[col].clone();
        if !f.is_zero() {
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
    };
    for (i, row) in rows.iter_mut().enumerate() {
        if i != r {
            eliminate(row);
        }
    }
    eliminate(obj);
}

/// Runs simplex iterations on a tableau whose objective row holds reduced
/// costs in the first `allowed` columns and `−value` in the last entry.
/// Returns false if unbounded.
fn iterate(rows: &mut [Vec<BigRational>], obj: &mut [BigRational], basis: &mut [usize], allowed: usize) -> bool {
    let last = obj.len() - 1;
    loop {
        let Some(col) = (0..allowed).find(|&j| obj[j].is_negative()) else {
            return true;
        };
        let mut best: Option<(usize, BigRational)> = None;
        for (i, row) in rows.iter().enumerate() {
            if row[col].is_positive() {
                let ratio = &row[last] / &row[col];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && basis[i] < basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = best else {
            return false;
        };
        pivot(rows, obj, r, col);
        basis[r] = col;
    }
}

impl FeasibleTableau {
    /// Phase one on `A x = b` with integer data. `None` if infeasible.
    pub fn new(a: &[Vec<i64>], b: &[i64]) -> Option<Self> {
        let m = a.len();
        let n = a.first().map_or(0, |r| r.len());
        // columns: n structural, m artificial, 1 right-hand side
        let width = n + m + 1;
        let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(m);
        for i in 0..m {
            let sign = if b[i] < 0 { -1 } else { 1 };
            let mut row = vec![BigRational::zero(); width];
            for j in 0..n {
                if a[i][j] != 0 {
                    row[j] = rat(sign * a[i][j]);
                }
            }
            row[n + i] = BigRational::one();
            row[width - 1] = rat(sign * b[i]);
            rows.push(row);
        }
        let mut basis: Vec<usize> = (n..n + m).collect();
        // objective: minimize the sum of artificials, expressed in reduced form
        let mut obj = vec![BigRational::zero(); width];
        for row in &rows {
            for j in 0..n {
                obj[j] -= &row[j];
            }
            obj[width - 1] -= &row[width - 1];
        }
        iterate(&mut rows, &mut obj, &mut basis, n);
        if !obj[width - 1].is_zero() {
            return None;
        }
        // drive remaining artificials out of the basis; rows where that is
        // impossible are linear combinations of the others
        let mut i = 0;
        while i < rows.len() {
            if basis[i] >= n {
                if let Some(col) = (0..n).find(|&j| !rows[i][j].is_zero()) {
                    pivot(&mut rows, &mut obj, i, col);
                    basis[i] = col;
                } else {
                    rows.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        let rows = rows
            .into_iter()
            .map(|mut r| {
                let rhs = r.pop().unwrap();
                r.truncate(n);
                r.push(rhs);
                r
            })
            .collect();
        Some(FeasibleTableau { rows, basis, n })
    }

    /// Current basic feasible solution.
    pub fn solution(&self) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.n];
        for (row, &j) in self.rows.iter().zip(&self.basis) {
            x[j] = row[self.n].clone();
        }
        x
    }

    /// Phase two for the objective `c` (integer weights), starting from this
    /// basis. The tableau is left untouched.
    pub fn minimize(&self, c: &[i64]) -> LpOutcome {
        let n = self.n;
        let mut rows = self.rows.clone();
        let mut basis = self.basis.clone();
        let mut obj: Vec<BigRational> = c.iter().map(|&v| rat(v)).collect();
        obj.push(BigRational::zero());
        for (row, &j) in rows.iter().zip(&basis) {
            let f = obj[j].clone();
            if !f.is_zero() {
                for (v, rv) in obj.iter_mut().zip(row) {
                    *v -= &f * rv;
                }
            }
        }
        if !iterate(&mut rows, &mut obj, &mut basis, n) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![BigRational::zero(); n];
        for (row, &j) in rows.iter().zip(&basis) {
            x[j] = row[n].clone();
        }
        LpOutcome::Optimal { value: -obj[n].clone(), x }
    }
}

/// `min cᵀx` subject to `A x = b`, `x ≥ 0`.
pub fn solve_lp(a: &[Vec<i64>], b: &[i64], c: &[i64]) -> LpOutcome {
    match FeasibleTableau::new(a, b) {
        None => LpOutcome::Infeasible,
        Some(t) => t.minimize(c),
    }
}

/// Smallest integer not below `q`.
pub fn ceil_int(q: &BigRational) -> BigInt {
    q.ceil().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn value(o: &LpOutcome) -> BigRational {
        match o {
            LpOutcome::Optimal { value, .. } => value.clone(),
            other => panic!("not optimal: {other:?}"),
        }
    }

    #[test]
    fn small_optimum() {
        // x + 2y + s = 4, 3x + y + t = 6; min −x − y → x = 8/5, y = 6/5
        let a = vec![vec![1, 2, 1, 0], vec![3, 1, 0, 1]];
        let o = solve_lp(&a, &[4, 6], &[-1, -1, 0, 0]);
        assert_eq!(value(&o), q(-14, 5));
        if let LpOutcome::Optimal { x, .. } = o {
            assert_eq!(x[0], q(8, 5));
            assert_eq!(x[1], q(6, 5));
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert_eq!(solve_lp(&[vec![1, 1]], &[-1], &[1, 1]), LpOutcome::Infeasible);
        assert_eq!(solve_lp(&[vec![1, -1]], &[1], &[0, -1]), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let a = vec![vec![1, 1, 0], vec![2, 2, 0], vec![0, -1, -1]];
        let o = solve_lp(&a, &[2, 4, -3], &[1, 1, 1]);
        // y + z = 3, x + y = 2 → min x + y + z = 3 at x = 0, y = 2, z = 1
        assert_eq!(value(&o), q(3, 1));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // a classic cycling example under the largest-coefficient rule
        let a = vec![vec![1, 0, 0, 1, -2, -1, 1], vec![0, 1, 0, 2, -1, -1, 3], vec![0, 0, 1, 0, 0, 1, 0]];
        let o = solve_lp(&a, &[0, 0, 1], &[0, 0, 0, -2, -3, 1, -12]);
        assert!(matches!(o, LpOutcome::Unbounded | LpOutcome::Optimal { .. }));
    }

    #[test]
    fn ceil() {
        assert_eq!(ceil_int(&q(7, 2)), BigInt::from(4));
        assert_eq!(ceil_int(&q(4, 1)), BigInt::from(4));
        assert_eq!(ceil_int(&q(-1, 2)), BigInt::from(0));
    }
}
