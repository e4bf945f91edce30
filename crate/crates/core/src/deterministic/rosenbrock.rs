//! Four-stage, third-order, L-stable and stiffly accurate Rosenbrock method
//! (Rodas3) with an embedded second-order solution.
//!
//! Stages solve `(I/(hγ) − J) Kᵢ = f(y + Σⱼ aᵢⱼ Kⱼ) + Σⱼ (cᵢⱼ/h) Kⱼ` with one
//! factorization per step. The time-derivative term is omitted, so the
//! method is only used on autonomous systems.

use nalgebra::{DMatrix, DVector};

use super::{OdeSystem, SolverError};

const GAMMA: f64 = 0.5;
// a(i,j) and c(i,j), row-major lower triangle for stages 2..4
const A: [f64; 6] = [0.0, 2.0, 0.0, 2.0, 0.0, 1.0];
const C: [f64; 6] = [4.0, 1.0, -1.0, 1.0, -1.0, -8.0 / 3.0];
const M: [f64; 4] = [2.0, 0.0, 1.0, 1.0];
// error estimate: difference to the embedded second-order solution
const E: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

/// Order of the embedded solution, which sets the controller exponent.
pub(crate) const EMBEDDED_ORDER: f64 = 2.0;

/// One Rosenbrock step from `(t, y)` with step `h`. Returns the new state
/// and the local error estimate.
pub fn stiff_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let n = system.dim();
    let mut f0 = vec![0.0; n];
    system.rhs(t, y, &mut f0);
    let mut jac = DMatrix::zeros(n, n);
    system.jacobian(t, y, &mut jac);
    stiff_step_with(system, t, y, &f0, &jac, h)
}

pub(crate) fn stiff_step_with<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    jac: &DMatrix<f64>,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    assert!(h > 0.0, "step size must be positive");
    let n = system.dim();
    let mut g = -jac.clone();
    let diag = 1.0 / (h * GAMMA);
    for i in 0..n {
        g[(i, i)] += diag;
    }
    let lu = g.lu();
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(4);
    let mut ystage = vec![0.0; n];
    let mut fstage = f0.to_vec();
    for stage in 0..4usize {
        let offset = stage * stage.saturating_sub(1) / 2;
        if stage > 0 && (0..stage).any(|j| A[offset + j] != 0.0) {
            for i in 0..n {
                ystage[i] = y[i] + (0..stage).map(|j| A[offset + j] * k[j][i]).sum::<f64>();
            }
            system.rhs(t, &ystage, &mut fstage);
        } else if stage > 0 {
            fstage.copy_from_slice(f0);
        }
        let mut rhs = DVector::from_column_slice(&fstage);
        for j in 0..stage {
            rhs.axpy(C[offset + j] / h, &k[j], 1.0);
        }
        let sol = lu.solve(&rhs).ok_or(SolverError::Singular { t })?;
        k.push(sol);
    }
    let mut y_new = y.to_vec();
    let mut err = vec![0.0; n];
    for i in 0..n {
        for s in 0..4 {
            y_new[i] += M[s] * k[s][i];
            err[i] += E[s] * k[s][i];
        }
    }
    Ok((y_new, err))
}
