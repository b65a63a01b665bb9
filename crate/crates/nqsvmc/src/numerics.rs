//! Small derivative-free optimization helper: BFGS with forward-difference
//! gradients and Armijo backtracking, used by the surrogate refinement stage.

use nalgebra::{DMatrix, DVector};

pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], fx: f64, step: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = step * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i];
        g[i] = if fp.is_finite() { (fp - fx) / h } else { 0.0 };
    }
    g
}

/// Minimizes `f` from `x0`. Stops when the finite-difference gradient drops
/// below `grad_tol` in the ∞-norm, after `max_iter` iterations, or when the
/// backtracking line search can no longer improve the value.
pub(crate) fn minimize_bfgs(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    max_iter: usize,
    grad_tol: f64,
    fd_step: f64,
) -> BfgsOutcome {
    let dim = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut h = DMatrix::<f64>::identity(dim, dim);
    let mut g = fd_gradient(f, x.as_slice(), fx, fd_step);
    let mut iterations = 0;

    while iterations < max_iter && g.amax() > grad_tol {
        iterations += 1;
        let mut d = -(&h * &g);
        if d.dot(&g) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            h = DMatrix::identity(dim, dim);
            d = -g.clone();
        }
        let slope = d.dot(&g);

        // Armijo backtracking; non-finite trial values just shrink the step.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &d;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };

        let g_new = fd_gradient(f, x_new.as_slice(), f_new, fd_step);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ with ρ = 1/(yᵀs).
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            let ss = &s * s.transpose();
            let hys = &hy * s.transpose();
            h = h.clone() - (&hys + hys.transpose()) * rho + ss * (rho * (1.0 + rho * yhy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    BfgsOutcome {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        grad_inf_norm: g.amax(),
    }
}
