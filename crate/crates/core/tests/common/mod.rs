//! Statistical and numerical oracles shared by the integration tests.
#![allow(dead_code)]

use rxnkit::parse_network;
use rxnkit::stochastic::{JumpModel, StochasticRates};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Jump model with stochastic rate constants used as given.
pub fn jump_model(text: &str, c: &[f64]) -> JumpModel {
    let n = parse_network(text).expect("network parses");
    JumpModel::new(&n, &StochasticRates::direct(&n, c).expect("rates")).expect("model")
}

/// Asymptotic p-value of the one-sample Kolmogorov–Smirnov statistic for
/// `samples` against the continuous cdf `cdf`.
pub fn ks_pvalue(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    // Q_KS(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)
    let mut q = 0.0;
    for k in 1..200 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        q += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

/// Pearson chi-square p-value of observed counts against expected
/// probabilities. Cells with expected count below 5 are pooled.
pub fn chi_square_pvalue(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let (mut cells, mut o_acc, mut e_acc) = (Vec::new(), 0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += p * n as f64;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1) as f64;
    1.0 - ChiSquared::new(dof).expect("dof").cdf(stat)
}

/// Classical RK4 with fixed step for `dy/dt = f(y)` on `[0, t]`.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t: f64, h: f64) -> Vec<f64> {
    let steps = (t / h).ceil() as usize;
    let h = t / steps as f64;
    let mut y = y0.to_vec();
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Master equation of `2X -> X` (propensity `c1·x(x−1)/2`) and `X -> 2X`
/// (`c2·x`) truncated at `x_max`, solved from `x0` to `t`.
pub fn two_x_master_equation(c1: f64, c2: f64, x0: usize, x_max: usize, t: f64) -> Vec<f64> {
    let death = |x: usize| c1 * (x * x.saturating_sub(1)) as f64 / 2.0;
    let birth = |x: usize| if x < x_max { c2 * x as f64 } else { 0.0 };
    let f = |p: &[f64]| -> Vec<f64> {
        (0..=x_max)
            .map(|x| {
                let mut d = -(death(x) + birth(x)) * p[x];
                if x < x_max {
                    d += death(x + 1) * p[x + 1];
                }
                if x >= 1 {
                    d += birth(x - 1) * p[x - 1];
                }
                d
            })
            .collect()
    };
    let mut p0 = vec![0.0; x_max + 1];
    p0[x0] = 1.0;
    rk4(f, &p0, t, 1e-3)
}

/// Every nonnegative integer vector with entries summing to at most `max`,
/// by plain recursion.
pub fn bounded_vectors(n: usize, max: u32) -> Vec<Vec<u32>> {
    fn rec(i: usize, n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(i + 1, n, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, max, &mut Vec::new(), &mut out);
    out
}

/// Decompositions of `target` by exhaustive search: every `x` with
/// `Σ x ≤ max` and `Σ x_r·columns[r] = target`, sorted.
pub fn exhaustive_decompositions(columns: &[Vec<i64>], target: &[i64], max: u32) -> Vec<Vec<u32>> {
    fn rec(
        r: usize,
        columns: &[Vec<i64>],
        rest: &mut Vec<i64>,
        left: u32,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if r == columns.len() {
            if rest.iter().all(|&v| v == 0) {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(r + 1, columns, rest, left - v, cur, out);
            cur.pop();
            for (x, c) in rest.iter_mut().zip(&columns[r]) {
                *x -= c;
            }
        }
        for (x, c) in rest.iter_mut().zip(&columns[r]) {
            *x += c * (left as i64 + 1);
        }
    }
    let mut out = Vec::new();
    rec(0, columns, &mut target.to_vec(), max, &mut Vec::new(), &mut out);
    out.sort();
    out
}
