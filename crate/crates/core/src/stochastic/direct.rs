//! Gillespie's direct method.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{JumpModel, JumpTrajectory, Observer, Simulator, StochasticError, StochasticMethod};

/// Index `r` with `Σ_{s<r} a_s ≤ u < Σ_{s≤r} a_s`, never a zero-propensity
/// step even when rounding puts `u` at the very end.
pub(crate) fn choose(a: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (r, &v) in a.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last = r;
            if u < acc {
                return r;
            }
        }
    }
    last
}

/// One exact event: waiting time and fired step. `None` if every
/// propensity is zero.
pub(crate) fn event(a: &[f64], rng: &mut ChaCha8Rng) -> Option<(f64, usize)> {
    let a0: f64 = a.iter().sum();
    if a0 <= 0.0 {
        return None;
    }
    let wait = Exp::new(a0).expect("positive rate").sample(rng);
    let r = choose(a, rng.random::<f64>() * a0);
    Some((wait, r))
}

/// Runs until `t_end`; returns true if absorbed.
pub(crate) fn run<O: Observer>(model: &JumpModel, x0: &[i64], t_end: f64, rng: &mut ChaCha8Rng, obs: &mut O) -> bool {
    let mut x = x0.to_vec();
    let mut a = vec![0.0; model.num_steps()];
    let mut t = 0.0;
    obs.record(t, &x, None);
    loop {
        model.propensities(&x, &mut a);
        let Some((wait, r)) = event(&a, rng) else {
            return true;
        };
        if t + wait >= t_end {
            return false;
        }
        t += wait;
        model.fire(&mut x, r, 1);
        obs.record(t, &x, Some(r));
    }
}

/// Exact simulation on `[0, t_end]`, run 0 of `seed`.
pub fn direct_method(model: &JumpModel, x0: &[i64], t_end: f64, seed: u64) -> Result<JumpTrajectory, StochasticError> {
    Simulator::new(model.clone(), StochasticMethod::Direct).run(x0, t_end, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;
    use crate::stochastic::StochasticRates;

    fn model(text: &str, c: &[f64]) -> JumpModel {
        let n = parse_network(text).unwrap();
        JumpModel::new(&n, &StochasticRates::direct(&n, c).unwrap()).unwrap()
    }

    #[test]
    fn choose_skips_zeros() {
        assert_eq!(choose(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(choose(&[1.0, 2.0, 0.0], 3.0), 1);
        assert_eq!(choose(&[1.0, 2.0], 1.5), 1);
    }

    #[test]
    fn absorbed_at_zero() {
        let m = model("X -> 0, 1\n2 X -> Y, 1", &[1.0, 1.0]);
        let tr = direct_method(&m, &[0, 0], 5.0, 1).unwrap();
        assert_eq!(tr.len(), 1);
        assert!(tr.absorbed);
        assert_eq!(tr.fired, Some(vec![]));
    }

    #[test]
    fn events_follow_gamma_columns() {
        let m = model("A -> B, 0.04\n2 B -> B + C, 3\nB + C -> A + C, 1", &[0.04, 3.0, 1.0]);
        let tr = direct_method(&m, &[50, 0, 0], 200.0, 7).unwrap();
        let fired = tr.fired.as_ref().unwrap();
        let gamma = [[-1, 1, 0], [0, -1, 1], [1, -1, 0]];
        for k in 1..tr.len() {
            let d: Vec<i64> = (0..3).map(|j| tr.counts[k][j] - tr.counts[k - 1][j]).collect();
            assert_eq!(d, gamma[fired[k - 1]]);
            assert!(tr.times[k] > tr.times[k - 1]);
            assert!(tr.counts[k].iter().all(|&v| v >= 0));
            assert_eq!(tr.counts[k].iter().sum::<i64>(), 50);
        }
        assert!(tr.len() > 10);
    }

    #[test]
    fn reproducible() {
        let m = model("X -> 0, 1\n0 -> X, 5", &[1.0, 5.0]);
        let a = direct_method(&m, &[3], 10.0, 42).unwrap();
        let b = direct_method(&m, &[3], 10.0, 42).unwrap();
        let c = direct_method(&m, &[3], 10.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
