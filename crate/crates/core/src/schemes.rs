//! One-step integration maps and numerical invariance checks.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::levy_term;
use crate::sde_model::{fd, DerivativePolicy, Diffeomorphism, SdeSystem, VectorField};

/// Coefficients of `dX = (aX + b) dt + (cX + d) dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSdeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl LinearSdeParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// `a = -2, b = c = d = 10`: finite mean, infinite second moment.
    pub fn benchmark() -> Self {
        Self::new(-2.0, 10.0, 10.0, 10.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite())
    }

    /// `ad - bc != 0`: the scalar equation alone then has no strong symmetry.
    pub fn lacks_scalar_symmetry(&self) -> bool {
        self.a * self.d - self.b * self.c != 0.0
    }

    /// `k = -d/c`, where the exact Euler and Milstein maps coincide.
    pub fn coincidence_k(&self) -> Option<f64> {
        (self.c != 0.0).then(|| -self.d / self.c)
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.a * x + self.b
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        self.c * x + self.d
    }

    pub fn to_sde(&self) -> SdeSystem {
        crate::sde_model::builtins::linear_sde(*self)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

fn check_noise(sde: &SdeSystem, dw: &[f64]) -> Result<()> {
    if dw.len() != sde.noise_dim() {
        return Err(Error::DimensionMismatch { expected: sde.noise_dim(), found: dw.len() });
    }
    Ok(())
}

/// `x + mu(x) dt + sigma(x) dW`.
pub fn euler_step(sde: &SdeSystem, x: &[f64], dt: f64, dw: &[f64]) -> Result<DVector<f64>> {
    check_dt(dt)?;
    check_noise(sde, dw)?;
    let mu = sde.drift(x)?;
    let sigma = sde.diffusion(x)?;
    Ok(DVector::from_column_slice(x) + mu * dt + sigma * DVector::from_column_slice(dw))
}

/// Euler step plus `sum_j sigma^j d_j(sigma^i) dWW` for a single noise, with
/// `dWW = ((dW)^2 - dt)/2`.
pub fn milstein_step(sde: &SdeSystem, x: &[f64], dt: f64, dw: &[f64], dww: f64) -> Result<DVector<f64>> {
    if sde.noise_dim() != 1 {
        return Err(Error::UnsupportedNoiseDimension(sde.noise_dim()));
    }
    let mut out = euler_step(sde, x, dt, dw)?;
    let sigma = sde.diffusion(x)?;
    let dsigma = sde.diffusion_jacobian(x, DerivativePolicy::FiniteDifferenceFallback)?;
    for i in 0..sde.dim() {
        let corr: f64 = (0..sde.dim()).map(|j| sigma[(j, 0)] * dsigma[j][(i, 0)]).sum();
        out[i] += corr * dww;
    }
    Ok(out)
}

/// Exact Euler map: Euler in the coordinates that straighten the symmetries of
/// the augmented linear system, mapped back. `k` fixes the chart.
pub fn exact_euler_linear_step(p: LinearSdeParams, k: f64, x: f64, dt: f64, dw: f64) -> f64 {
    let LinearSdeParams { a, b, c, d } = p;
    let growth = ((a - 0.5 * c * c) * dt + c * dw).exp();
    let e = d + c * k;
    growth * (x + (b + a * k - c * e) * dt + e * dw - k) + k
}

/// Exact Milstein counterpart of [`exact_euler_linear_step`].
pub fn exact_milstein_linear_step(p: LinearSdeParams, k: f64, x: f64, dt: f64, dw: f64) -> f64 {
    let LinearSdeParams { a, b, c, d } = p;
    let growth = ((a - 0.5 * c * c) * dt + c * dw).exp();
    let e = d + c * k;
    let half = 0.5 * c * e;
    growth * (x + (b + a * k - half) * dt + e * dw - half * dw * dw - k) + k
}

/// A one-step map `(x, dt, dW, dWW) -> x'`.
#[derive(Clone)]
pub enum OneStepScheme {
    Euler(SdeSystem),
    Milstein(SdeSystem),
    Conjugated { base: Box<OneStepScheme>, phi: Diffeomorphism },
    ExactLinearEuler { params: LinearSdeParams, k: f64 },
    ExactLinearMilstein { params: LinearSdeParams, k: f64 },
}

impl fmt::Debug for OneStepScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl OneStepScheme {
    /// Euler on the image of `sde` under `phi`, mapped back through `phi^-1`.
    pub fn conjugated_euler(sde: &SdeSystem, phi: &Diffeomorphism) -> Result<Self> {
        let image = crate::sde_model::ito_transform(sde, phi)?;
        Ok(Self::Conjugated { base: Box::new(Self::Euler(image)), phi: phi.clone() })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Euler(_) => "euler".into(),
            Self::Milstein(_) => "milstein".into(),
            Self::Conjugated { base, .. } => format!("conjugated_{}", base.label()),
            Self::ExactLinearEuler { k, .. } => format!("exact_euler(k={k})"),
            Self::ExactLinearMilstein { k, .. } => format!("exact_milstein(k={k})"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Euler(s) | Self::Milstein(s) => s.dim(),
            Self::Conjugated { phi, .. } => phi.dim(),
            Self::ExactLinearEuler { .. } | Self::ExactLinearMilstein { .. } => 1,
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            Self::Euler(s) | Self::Milstein(s) => s.noise_dim(),
            Self::Conjugated { base, .. } => base.noise_dim(),
            Self::ExactLinearEuler { .. } | Self::ExactLinearMilstein { .. } => 1,
        }
    }

    pub fn requires_levy(&self) -> bool {
        match self {
            Self::Milstein(_) | Self::ExactLinearMilstein { .. } => true,
            Self::Conjugated { base, .. } => base.requires_levy(),
            Self::Euler(_) | Self::ExactLinearEuler { .. } => false,
        }
    }

    /// Advances `x` by one step. When the scheme needs the iterated integral
    /// and `dww` is `None`, it is formed from `dw` by [`levy_term`].
    pub fn step(&self, x: &[f64], dt: f64, dw: &[f64], dww: Option<f64>) -> Result<DVector<f64>> {
        check_dt(dt)?;
        match self {
            Self::Euler(sde) => euler_step(sde, x, dt, dw),
            Self::Milstein(sde) => {
                check_noise(sde, dw)?;
                let dww = match dww {
                    Some(v) => v,
                    None => levy_term(dw[0], dt)?,
                };
                milstein_step(sde, x, dt, dw, dww)
            }
            Self::Conjugated { base, phi } => conjugated_step(base, phi, x, dt, dw, dww),
            Self::ExactLinearEuler { params, k } => {
                let (x, dw) = scalar_args(x, dw)?;
                Ok(DVector::from_element(1, exact_euler_linear_step(*params, *k, x, dt, dw)))
            }
            Self::ExactLinearMilstein { params, k } => {
                let (x, dw) = scalar_args(x, dw)?;
                Ok(DVector::from_element(1, exact_milstein_linear_step(*params, *k, x, dt, dw)))
            }
        }
    }

    /// Scalar fast path for one-dimensional schemes with a single noise.
    pub fn step_scalar(&self, x: f64, dt: f64, dw: f64) -> Result<f64> {
        match self {
            Self::ExactLinearEuler { params, k } => Ok(exact_euler_linear_step(*params, *k, x, dt, dw)),
            Self::ExactLinearMilstein { params, k } => Ok(exact_milstein_linear_step(*params, *k, x, dt, dw)),
            _ => Ok(self.step(&[x], dt, &[dw], None)?[0]),
        }
    }
}

fn scalar_args(x: &[f64], dw: &[f64]) -> Result<(f64, f64)> {
    if x.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: x.len() });
    }
    if dw.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: dw.len() });
    }
    Ok((x[0], dw[0]))
}

/// `phi^-1(base(phi(x), dt, dW))`; leaving the target box is a chart exit.
pub fn conjugated_step(
    base: &OneStepScheme,
    phi: &Diffeomorphism,
    x: &[f64],
    dt: f64,
    dw: &[f64],
    dww: Option<f64>,
) -> Result<DVector<f64>> {
    let y = phi.forward(x)?;
    let next = match base.step(y.as_slice(), dt, dw, dww) {
        Ok(v) => v,
        Err(Error::OutsideDomain { point }) => return Err(Error::ChartExit { point }),
        Err(e) => return Err(e),
    };
    phi.inverse(next.as_slice())
}

/// `phi^-1(F(phi(x))) - F(x)`: zero exactly when `F` commutes with `phi` at this input.
pub fn invariance_residual(
    scheme: &OneStepScheme,
    phi: &Diffeomorphism,
    x: &[f64],
    dt: f64,
    dw: &[f64],
    dww: Option<f64>,
) -> Result<DVector<f64>> {
    let conjugated = conjugated_step(scheme, phi, x, dt, dw, dww)?;
    Ok(conjugated - scheme.step(x, dt, dw, dww)?)
}

/// `Y(F(x)) - DF(x) Y(x)`, with `DF` by central differences in `x`.
pub fn infinitesimal_invariance_residual(
    scheme: &OneStepScheme,
    y: &VectorField,
    x: &[f64],
    dt: f64,
    dw: &[f64],
    dww: Option<f64>,
) -> Result<DVector<f64>> {
    let image = scheme.step(x, dt, dw, dww)?;
    let n = image.len();
    let df = fd::jacobian(
        |p: &[f64]| {
            scheme
                .step(p, dt, dw, dww)
                .unwrap_or_else(|_| DVector::from_element(n, f64::NAN))
        },
        x,
    );
    if df.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned(format!("difference stencil around {x:?} left the chart")));
    }
    Ok(y.value(image.as_slice())? - df * y.value(x)?)
}

/// Serializable choice of scheme for the scalar linear model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    Euler,
    Milstein,
    ExactEuler { k: f64 },
    ExactMilstein { k: f64 },
}

impl SchemeSpec {
    pub fn build(&self, params: LinearSdeParams) -> OneStepScheme {
        match *self {
            SchemeSpec::Euler => OneStepScheme::Euler(params.to_sde()),
            SchemeSpec::Milstein => OneStepScheme::Milstein(params.to_sde()),
            SchemeSpec::ExactEuler { k } => OneStepScheme::ExactLinearEuler { params, k },
            SchemeSpec::ExactMilstein { k } => OneStepScheme::ExactLinearMilstein { params, k },
        }
    }

    pub fn label(&self) -> String {
        match self {
            SchemeSpec::Euler => "euler".into(),
            SchemeSpec::Milstein => "milstein".into(),
            SchemeSpec::ExactEuler { k } => format!("exact_euler(k={k})"),
            SchemeSpec::ExactMilstein { k } => format!("exact_milstein(k={k})"),
        }
    }

    /// Scalar step without allocation; used by the ensemble engine.
    pub fn step_linear(&self, p: LinearSdeParams, x: f64, dt: f64, dw: f64) -> f64 {
        match *self {
            SchemeSpec::Euler => x + p.drift(x) * dt + p.diffusion(x) * dw,
            SchemeSpec::Milstein => {
                x + p.drift(x) * dt + p.diffusion(x) * dw + p.diffusion(x) * p.c * 0.5 * (dw * dw - dt)
            }
            SchemeSpec::ExactEuler { k } => exact_euler_linear_step(p, k, x, dt, dw),
            SchemeSpec::ExactMilstein { k } => exact_milstein_linear_step(p, k, x, dt, dw),
        }
    }
}
