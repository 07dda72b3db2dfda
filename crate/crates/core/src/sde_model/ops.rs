use nalgebra::{DMatrix, DVector};

use super::{DerivativePolicy, Diffeomorphism, ScalarField, SdeSystem, VectorField};
use crate::error::{Error, Result};

/// `1/2 sum_ij (sigma sigma^T)_ij H_ij`.
fn half_trace(sigma: &DMatrix<f64>, hessian: &DMatrix<f64>) -> f64 {
    let a = sigma * sigma.transpose();
    0.5 * a.component_mul(hessian).sum()
}

/// The generator `L f = 1/2 tr(sigma sigma^T D^2 f) + mu . grad f` at `x`.
pub fn generator_apply(sde: &SdeSystem, f: &ScalarField, x: &[f64]) -> Result<f64> {
    if f.dim() != sde.dim() {
        return Err(Error::DimensionMismatch { expected: sde.dim(), found: f.dim() });
    }
    let mu = sde.drift(x)?;
    let sigma = sde.diffusion(x)?;
    Ok(mu.dot(&f.gradient(x)) + half_trace(&sigma, &f.hessian(x)))
}

/// The generator applied componentwise to a vector field.
pub fn generator_vector(
    sde: &SdeSystem,
    y: &VectorField,
    x: &[f64],
    policy: DerivativePolicy,
) -> Result<DVector<f64>> {
    if y.dim() != sde.dim() {
        return Err(Error::DimensionMismatch { expected: sde.dim(), found: y.dim() });
    }
    let mu = sde.drift(x)?;
    let sigma = sde.diffusion(x)?;
    let jy = y.jacobian(x)?;
    let hy = y.hessian(x, policy)?;
    Ok(DVector::from_fn(sde.dim(), |i, _| {
        jy.row(i).transpose().dot(&mu) + half_trace(&sigma, &hy[i])
    }))
}

fn transformed_drift(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    jac: &DMatrix<f64>,
    hess: &[DMatrix<f64>],
) -> DVector<f64> {
    let mut out = jac * mu;
    for (i, h) in hess.iter().enumerate() {
        out[i] += half_trace(sigma, h);
    }
    out
}

/// The SDE satisfied by `Phi(X)` when `X` solves `sde`.
///
/// The transformed diffusion carries an analytic Jacobian (chain rule) when
/// `sde` does; the transformed drift Jacobian is left to finite differences.
pub fn ito_transform(sde: &SdeSystem, phi: &Diffeomorphism) -> Result<SdeSystem> {
    if phi.dim() != sde.dim() {
        return Err(Error::DimensionMismatch { expected: sde.dim(), found: phi.dim() });
    }
    if !phi.source().contains_domain(sde.domain()) {
        return Err(Error::InvalidArgument(
            "the SDE domain is not contained in the source of the coordinate change".into(),
        ));
    }
    let n = sde.dim();
    let m = sde.noise_dim();

    let (mu, sigma) = (sde.drift_fn().clone(), sde.diffusion_fn().clone());
    let (inv, jac, hess) = (phi.inverse_fn().clone(), phi.jacobian_fn().clone(), phi.hessian_fn().clone());
    let drift = move |y: &[f64]| {
        let x = inv(y);
        let x = x.as_slice();
        transformed_drift(&mu(x), &sigma(x), &jac(x), &hess(x))
    };

    let (sigma, inv, jac) = (sde.diffusion_fn().clone(), phi.inverse_fn().clone(), phi.jacobian_fn().clone());
    let diffusion = move |y: &[f64]| {
        let x = inv(y);
        jac(x.as_slice()) * sigma(x.as_slice())
    };

    let mut out = SdeSystem::new(n, m, drift, diffusion).with_domain(phi.target().clone());
    if let Some(dsigma) = sde.diffusion_jacobian_fn().cloned() {
        let sigma = sde.diffusion_fn().clone();
        let (inv, jac, hess) = (phi.inverse_fn().clone(), phi.jacobian_fn().clone(), phi.hessian_fn().clone());
        out = out.with_diffusion_jacobian(move |y: &[f64]| {
            let x = inv(y);
            let x = x.as_slice();
            let (s, ds, j, h) = (sigma(x), dsigma(x), jac(x), hess(x));
            let jinv = j.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
            // d/dx^p (J sigma)[i, a] = sum_j H_i[j, p] sigma[j, a] + (J dsigma_p)[i, a]
            let dx: Vec<DMatrix<f64>> = (0..n)
                .map(|p| {
                    let mut t = &j * &ds[p];
                    for i in 0..n {
                        for a in 0..m {
                            t[(i, a)] += (0..n).map(|jj| h[i][(jj, p)] * s[(jj, a)]).sum::<f64>();
                        }
                    }
                    t
                })
                .collect();
            (0..n)
                .map(|k| {
                    let mut acc = DMatrix::zeros(n, m);
                    for (p, d) in dx.iter().enumerate() {
                        acc += d * jinv[(p, k)];
                    }
                    acc
                })
                .collect()
        });
    }
    Ok(out)
}

/// `[Y, Z](x) = DZ(x) Y(x) - DY(x) Z(x)`.
pub fn lie_bracket(y: &VectorField, z: &VectorField, x: &[f64]) -> Result<DVector<f64>> {
    if y.dim() != z.dim() {
        return Err(Error::DimensionMismatch { expected: y.dim(), found: z.dim() });
    }
    Ok(z.jacobian(x)? * y.value(x)? - y.jacobian(x)? * z.value(x)?)
}

/// `Phi_* Y = (DPhi Y) o Phi^-1`, a field on the target box.
pub fn pushforward(phi: &Diffeomorphism, y: &VectorField) -> Result<VectorField> {
    if phi.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: phi.dim(), found: y.dim() });
    }
    let n = y.dim();
    let (inv, jac, yv) = (phi.inverse_fn().clone(), phi.jacobian_fn().clone(), y.value_fn().clone());
    let value = move |p: &[f64]| {
        let x = inv(p);
        jac(x.as_slice()) * yv(x.as_slice())
    };
    let (inv, jac, hess) = (phi.inverse_fn().clone(), phi.jacobian_fn().clone(), phi.hessian_fn().clone());
    let (yv, yj) = (y.value_fn().clone(), y.jacobian_fn().clone());
    let jacobian = move |p: &[f64]| {
        let x = inv(p);
        let x = x.as_slice();
        let (j, h, v, dv) = (jac(x), hess(x), yv(x), yj(x));
        // d/dx^q (J Y)^i = sum_j H_i[j, q] Y^j + (J DY)[i, q]
        let mut dx = &j * dv;
        for i in 0..n {
            let hv = &h[i] * &v;
            for q in 0..n {
                dx[(i, q)] += hv[q];
            }
        }
        let jinv = j.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        dx * jinv
    };
    Ok(VectorField::new(n, value, jacobian).with_domain(phi.target().clone()))
}

/// Residuals of the determining equations for a candidate symmetry `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminingResidual {
    /// `Dmu Y - L(Y)`, with `L` applied componentwise.
    pub drift: DVector<f64>,
    /// Column `a` is `[Y, sigma_a]`.
    pub diffusion: DMatrix<f64>,
}

impl DeterminingResidual {
    pub fn max_abs(&self) -> f64 {
        self.drift.iter().chain(self.diffusion.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluates both determining equations for `Y` on `sde` at `x`.
pub fn determining_residual(
    sde: &SdeSystem,
    y: &VectorField,
    x: &[f64],
    policy: DerivativePolicy,
) -> Result<DeterminingResidual> {
    if y.dim() != sde.dim() {
        return Err(Error::DimensionMismatch { expected: sde.dim(), found: y.dim() });
    }
    let yv = y.value(x)?;
    let jy = y.jacobian(x)?;
    let jmu = sde.drift_jacobian(x, policy)?;
    let drift = &jmu * &yv - generator_vector(sde, y, x, policy)?;

    let sigma = sde.diffusion(x)?;
    let dsigma = sde.diffusion_jacobian(x, policy)?;
    let n = sde.dim();
    let mut diffusion = DMatrix::zeros(n, sde.noise_dim());
    for a in 0..sde.noise_dim() {
        let col = sigma.column(a);
        let dcol_y = DVector::from_fn(n, |i, _| (0..n).map(|k| dsigma[k][(i, a)] * yv[k]).sum::<f64>());
        diffusion.set_column(a, &(dcol_y - &jy * col));
    }
    Ok(DeterminingResidual { drift, diffusion })
}
