//! Central finite differences used whenever an analytic derivative is absent.
//!
//! First derivatives use the step `eps^(1/3) * max(1, |x_i|)`, second
//! differences of values use `eps^(1/4) * max(1, |x_i|)`. The step actually
//! applied is recomputed from the perturbed coordinates so that the
//! representation error of `x + h` does not leak into the quotient.

use nalgebra::{DMatrix, DVector};

pub fn first_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * xi.abs().max(1.0)
}

pub fn second_step(xi: f64) -> f64 {
    f64::EPSILON.powf(0.25) * xi.abs().max(1.0)
}

fn perturbed(x: &[f64], k: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += delta;
    y
}

/// Derivatives of a matrix-valued function; entry `k` is `df/dx^k`.
pub fn matrix_derivatives<F>(f: F, x: &[f64]) -> Vec<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    (0..x.len())
        .map(|k| {
            let h = first_step(x[k]);
            let xp = perturbed(x, k, h);
            let xm = perturbed(x, k, -h);
            let width = xp[k] - xm[k];
            (f(&xp) - f(&xm)) / width
        })
        .collect()
}

/// Jacobian of a vector-valued function; column `k` is `df/dx^k`.
pub fn jacobian<F>(f: F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let cols: Vec<DVector<f64>> = (0..x.len())
        .map(|k| {
            let h = first_step(x[k]);
            let xp = perturbed(x, k, h);
            let xm = perturbed(x, k, -h);
            let width = xp[k] - xm[k];
            (f(&xp) - f(&xm)) / width
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Component Hessians obtained by differencing an analytic Jacobian.
/// Entry `i` is the symmetrized Hessian of component `i`.
pub fn hessians_from_jacobian<F>(jac: F, x: &[f64]) -> Vec<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = x.len();
    let d = matrix_derivatives(jac, x);
    let rows = d.first().map_or(0, |m| m.nrows());
    (0..rows)
        .map(|i| {
            let h = DMatrix::from_fn(n, n, |j, k| d[k][(i, j)]);
            (&h + h.transpose()) * 0.5
        })
        .collect()
}

/// Component Hessians from second differences of values.
pub fn hessians<F>(f: F, x: &[f64]) -> Vec<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = x.len();
    let f0 = f(x);
    let rows = f0.len();
    let mut out = vec![DMatrix::zeros(n, n); rows];
    let steps: Vec<f64> = x.iter().map(|&xi| second_step(xi)).collect();
    for j in 0..n {
        let xp = perturbed(x, j, steps[j]);
        let xm = perturbed(x, j, -steps[j]);
        let hp = xp[j] - x[j];
        let hm = x[j] - xm[j];
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..rows {
            // Non-uniform three-point stencil reduces to the usual one when hp == hm.
            out[i][(j, j)] = 2.0 * (hm * fp[i] - (hp + hm) * f0[i] + hp * fm[i]) / (hp * hm * (hp + hm));
        }
        for k in (j + 1)..n {
            let eval = |sj: f64, sk: f64| {
                let mut y = x.to_vec();
                y[j] += sj * steps[j];
                y[k] += sk * steps[k];
                f(&y)
            };
            let fpp = eval(1.0, 1.0);
            let fpm = eval(1.0, -1.0);
            let fmp = eval(-1.0, 1.0);
            let fmm = eval(-1.0, -1.0);
            for i in 0..rows {
                let v = (fpp[i] - fpm[i] - fmp[i] + fmm[i]) / (4.0 * steps[j] * steps[k]);
                out[i][(j, k)] = v;
                out[i][(k, j)] = v;
            }
        }
    }
    out
}
