//! SDE systems, vector fields and coordinate changes.
//!
//! All functions take points as `&[f64]`. Derivative tensors follow two
//! conventions:
//!
//! * a *derivative list* `D` of a matrix function has one entry per
//!   coordinate, `D[k] = dF/dx^k` (used for diffusion Jacobians);
//! * a *Hessian list* `H` of a vector function has one entry per component,
//!   `H[i]` being the symmetric Hessian of component `i`.

pub mod builtins;
mod checks;
pub mod fd;
mod ops;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use checks::{is_affine, is_canonical_form, is_triangular, sample_box, DEFAULT_SAMPLES_PER_AXIS};
pub use ops::{
    determining_residual, generator_apply, generator_vector, ito_transform, lie_bracket,
    pushforward, DeterminingResidual,
};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VecFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Parameter step of the classical Runge-Kutta integrator used for flows.
pub const FLOW_STEP: f64 = 1e-3;

/// Whether missing derivatives may be replaced by finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativePolicy {
    AnalyticOnly,
    #[default]
    FiniteDifferenceFallback,
}

impl DerivativePolicy {
    /// Residual tolerance appropriate for the derivative route.
    pub fn default_tolerance(self) -> f64 {
        match self {
            DerivativePolicy::AnalyticOnly => 1e-8,
            DerivativePolicy::FiniteDifferenceFallback => 1e-4,
        }
    }
}

/// Closed axis-aligned box, possibly unbounded along some axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn whole(dim: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidArgument(format!("empty box {lower:?} x {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    /// Restricts one axis to `[lo, hi]`.
    pub fn with_axis(mut self, axis: usize, lo: f64, hi: f64) -> Self {
        self.lower[axis] = lo;
        self.upper[axis] = hi;
        self
    }

    /// Restricts one axis to strictly positive values.
    pub fn with_positive_axis(self, axis: usize) -> Self {
        self.with_axis(axis, f64::MIN_POSITIVE, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn contains_domain(&self, other: &Domain) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }
}

fn all_finite<'a>(mut values: impl Iterator<Item = &'a f64>) -> bool {
    values.all(|v| v.is_finite())
}

/// An Itô SDE `dX = mu(X) dt + sigma(X) dW` on a box.
#[derive(Clone)]
pub struct SdeSystem {
    dim: usize,
    noise_dim: usize,
    drift: VecFn,
    diffusion: MatFn,
    drift_jacobian: Option<MatFn>,
    diffusion_jacobian: Option<TensorFn>,
    domain: Domain,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("analytic_drift_jacobian", &self.drift_jacobian.is_some())
            .field("analytic_diffusion_jacobian", &self.diffusion_jacobian.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl SdeSystem {
    pub fn new<D, S>(dim: usize, noise_dim: usize, drift: D, diffusion: S) -> Self
    where
        D: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        S: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            noise_dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_jacobian: None,
            diffusion_jacobian: None,
            domain: Domain::whole(dim),
        }
    }

    pub fn with_drift_jacobian<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.drift_jacobian = Some(Arc::new(f));
        self
    }

    /// Supplies `x -> [dsigma/dx^1, ..., dsigma/dx^n]`, each entry `n x m`.
    pub fn with_diffusion_jacobian<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.diffusion_jacobian = Some(Arc::new(f));
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn has_analytic_drift_jacobian(&self) -> bool {
        self.drift_jacobian.is_some()
    }

    pub fn has_analytic_diffusion_jacobian(&self) -> bool {
        self.diffusion_jacobian.is_some()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.domain.check(x)
    }

    pub fn drift(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        Ok((self.drift)(x))
    }

    pub fn diffusion(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        Ok((self.diffusion)(x))
    }

    pub fn drift_jacobian(&self, x: &[f64], policy: DerivativePolicy) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        match (&self.drift_jacobian, policy) {
            (Some(j), _) => Ok(j(x)),
            (None, DerivativePolicy::FiniteDifferenceFallback) => Ok(fd::jacobian(&*self.drift, x)),
            (None, DerivativePolicy::AnalyticOnly) => Err(Error::MissingDerivative("drift jacobian")),
        }
    }

    pub fn diffusion_jacobian(&self, x: &[f64], policy: DerivativePolicy) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        match (&self.diffusion_jacobian, policy) {
            (Some(j), _) => Ok(j(x)),
            (None, DerivativePolicy::FiniteDifferenceFallback) => {
                Ok(fd::matrix_derivatives(&*self.diffusion, x))
            }
            (None, DerivativePolicy::AnalyticOnly) => {
                Err(Error::MissingDerivative("diffusion jacobian"))
            }
        }
    }

    /// Checks finiteness and shapes at the samples, and that supplied analytic
    /// Jacobians agree with central differences to `rel_tol`.
    pub fn validate(&self, samples: &[Vec<f64>], rel_tol: f64) -> Result<()> {
        for x in samples {
            let mu = self.drift(x)?;
            let sigma = self.diffusion(x)?;
            if mu.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: mu.len() });
            }
            if sigma.shape() != (self.dim, self.noise_dim) {
                return Err(Error::DimensionMismatch { expected: self.noise_dim, found: sigma.ncols() });
            }
            if !all_finite(mu.iter().chain(sigma.iter())) {
                return Err(Error::InvalidArgument(format!("non-finite coefficients at {x:?}")));
            }
            if let Some(j) = &self.drift_jacobian {
                agree(&j(x), &fd::jacobian(&*self.drift, x), rel_tol, "drift jacobian", x)?;
            }
            if let Some(j) = &self.diffusion_jacobian {
                let analytic = j(x);
                let numeric = fd::matrix_derivatives(&*self.diffusion, x);
                if analytic.len() != numeric.len() {
                    return Err(Error::DimensionMismatch { expected: numeric.len(), found: analytic.len() });
                }
                for (a, b) in analytic.iter().zip(&numeric) {
                    agree(a, b, rel_tol, "diffusion jacobian", x)?;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn drift_fn(&self) -> &VecFn {
        &self.drift
    }

    pub(crate) fn diffusion_fn(&self) -> &MatFn {
        &self.diffusion
    }

    pub(crate) fn diffusion_jacobian_fn(&self) -> Option<&TensorFn> {
        self.diffusion_jacobian.as_ref()
    }
}

fn agree(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>, rel_tol: f64, what: &str, x: &[f64]) -> Result<()> {
    if analytic.shape() != numeric.shape() {
        return Err(Error::DimensionMismatch { expected: numeric.len(), found: analytic.len() });
    }
    for (a, b) in analytic.iter().zip(numeric.iter()) {
        if (a - b).abs() > rel_tol * (1.0 + b.abs()) {
            return Err(Error::InvalidArgument(format!(
                "{what} disagrees with finite differences at {x:?}: {a} vs {b}"
            )));
        }
    }
    Ok(())
}

/// A scalar test function with gradient and Hessian, used by the generator.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: ScalarFn,
    gradient: VecFn,
    hessian: MatFn,
}

impl ScalarField {
    pub fn new<V, G, H>(dim: usize, value: V, gradient: G, hessian: H) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, value: Arc::new(value), gradient: Arc::new(gradient), hessian: Arc::new(hessian) }
    }

    /// Component `i` of the coordinate map, `f(x) = x^i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::new(
            dim,
            move |x| x[i],
            move |_| {
                let mut g = DVector::zeros(dim);
                g[i] = 1.0;
                g
            },
            move |_| DMatrix::zeros(dim, dim),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// A vector field `Y` with Jacobian (`J[(i, k)] = dY^i/dx^k`) and optional
/// component Hessians.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    value: VecFn,
    jacobian: MatFn,
    hessian: Option<TensorFn>,
    domain: Domain,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("analytic_hessian", &self.hessian.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl VectorField {
    pub fn new<V, J>(dim: usize, value: V, jacobian: J) -> Self
    where
        V: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            hessian: None,
            domain: Domain::whole(dim),
        }
    }

    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// The field `x -> A x + b`.
    pub fn affine(matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        let dim = offset.len();
        let a = matrix.clone();
        Self::new(dim, move |x| &a * DVector::from_column_slice(x) + &offset, move |_| matrix.clone())
            .with_hessian(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    pub fn constant(value: DVector<f64>) -> Self {
        let dim = value.len();
        Self::affine(DMatrix::zeros(dim, dim), value)
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    /// `alpha * y + beta * z`, with Hessians when both carry them.
    pub fn combine(alpha: f64, y: &VectorField, beta: f64, z: &VectorField) -> Result<Self> {
        if y.dim != z.dim {
            return Err(Error::DimensionMismatch { expected: y.dim, found: z.dim });
        }
        let (yv, zv) = (y.value.clone(), z.value.clone());
        let (yj, zj) = (y.jacobian.clone(), z.jacobian.clone());
        let mut out = Self::new(
            y.dim,
            move |x| yv(x) * alpha + zv(x) * beta,
            move |x| yj(x) * alpha + zj(x) * beta,
        )
        .with_domain(y.domain.clone());
        if let (Some(yh), Some(zh)) = (y.hessian.clone(), z.hessian.clone()) {
            out = out.with_hessian(move |x| {
                yh(x).into_iter().zip(zh(x)).map(|(a, b)| a * alpha + b * beta).collect()
            });
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn value(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(x)?;
        Ok((self.value)(x))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(x)?;
        Ok((self.jacobian)(x))
    }

    pub fn hessian(&self, x: &[f64], policy: DerivativePolicy) -> Result<Vec<DMatrix<f64>>> {
        self.domain.check(x)?;
        match (&self.hessian, policy) {
            (Some(h), _) => Ok(h(x)),
            (None, DerivativePolicy::FiniteDifferenceFallback) => {
                Ok(fd::hessians_from_jacobian(&*self.jacobian, x))
            }
            (None, DerivativePolicy::AnalyticOnly) => Err(Error::MissingDerivative("vector field hessian")),
        }
    }

    /// Time-`s` flow of the field from `x`, by classical Runge-Kutta with
    /// parameter step at most [`FLOW_STEP`].
    pub fn flow(&self, x: &[f64], s: f64) -> DVector<f64> {
        let steps = ((s.abs() / FLOW_STEP).ceil() as usize).max(1);
        let ds = s / steps as f64;
        let f = &self.value;
        let mut y = DVector::from_column_slice(x);
        for _ in 0..steps {
            let k1 = f(y.as_slice());
            let k2 = f((&y + &k1 * (0.5 * ds)).as_slice());
            let k3 = f((&y + &k2 * (0.5 * ds)).as_slice());
            let k4 = f((&y + &k3 * ds).as_slice());
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
        }
        y
    }

    pub(crate) fn value_fn(&self) -> &VecFn {
        &self.value
    }

    pub(crate) fn jacobian_fn(&self) -> &MatFn {
        &self.jacobian
    }
}

/// A diffeomorphism between boxes with its inverse and first two derivatives.
#[derive(Clone)]
pub struct Diffeomorphism {
    dim: usize,
    forward: VecFn,
    inverse: VecFn,
    jacobian: MatFn,
    hessian: TensorFn,
    source: Domain,
    target: Domain,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeomorphism")
            .field("dim", &self.dim)
            .field("source", &self.source)
            .field("target", &self.target)
            .finish()
    }
}

impl Diffeomorphism {
    pub fn new<F, I, J, H>(dim: usize, forward: F, inverse: I, jacobian: J, hessian: H) -> Self
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        I: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        Self {
            dim,
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            jacobian: Arc::new(jacobian),
            hessian: Arc::new(hessian),
            source: Domain::whole(dim),
            target: Domain::whole(dim),
        }
    }

    pub fn with_domains(mut self, source: Domain, target: Domain) -> Self {
        self.source = source;
        self.target = target;
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(
            dim,
            |x| DVector::from_column_slice(x),
            |y| DVector::from_column_slice(y),
            move |_| DMatrix::identity(dim, dim),
            move |_| vec![DMatrix::zeros(dim, dim); dim],
        )
    }

    pub fn translation(offset: DVector<f64>) -> Self {
        let dim = offset.len();
        let back = offset.clone();
        Self::new(
            dim,
            move |x| DVector::from_column_slice(x) + &offset,
            move |y| DVector::from_column_slice(y) - &back,
            move |_| DMatrix::identity(dim, dim),
            move |_| vec![DMatrix::zeros(dim, dim); dim],
        )
    }

    /// The time-`s` flow map of `field`; derivatives by finite differences.
    pub fn from_flow(field: &VectorField, s: f64) -> Self {
        let dim = field.dim();
        let (f1, f2, f3, f4) = (field.clone(), field.clone(), field.clone(), field.clone());
        Self::new(
            dim,
            move |x| f1.flow(x, s),
            move |y| f2.flow(y, -s),
            move |x| fd::jacobian(|p| f3.flow(p, s), x),
            move |x| fd::hessians(|p| f4.flow(p, s), x),
        )
        .with_domains(field.domain().clone(), field.domain().clone())
    }

    /// The inverse map, with derivatives obtained from those of `self`.
    pub fn inverse_map(&self) -> Self {
        let dim = self.dim;
        let (inv_j, fwd_j) = (self.inverse.clone(), self.jacobian.clone());
        let (inv_h, fwd_jh, fwd_h) = (self.inverse.clone(), self.jacobian.clone(), self.hessian.clone());
        Self {
            dim,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            jacobian: Arc::new(move |y| {
                let x = inv_j(y);
                fwd_j(x.as_slice()).try_inverse().unwrap_or_else(|| DMatrix::from_element(dim, dim, f64::NAN))
            }),
            hessian: Arc::new(move |y| {
                let x = inv_h(y);
                let jinv = fwd_jh(x.as_slice())
                    .try_inverse()
                    .unwrap_or_else(|| DMatrix::from_element(dim, dim, f64::NAN));
                let h = fwd_h(x.as_slice());
                // d2(Phi^-1)^i = -sum_l Jinv[i,l] * Jinv^T H_l Jinv
                let pulled: Vec<DMatrix<f64>> = h.iter().map(|hl| jinv.transpose() * hl * &jinv).collect();
                (0..dim)
                    .map(|i| {
                        let mut acc = DMatrix::zeros(dim, dim);
                        for (l, p) in pulled.iter().enumerate() {
                            acc -= p * jinv[(i, l)];
                        }
                        acc
                    })
                    .collect()
            }),
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &Domain {
        &self.source
    }

    pub fn target(&self) -> &Domain {
        &self.target
    }

    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.source.check(x)?;
        Ok((self.forward)(x))
    }

    /// Inverse map; a point outside the target box is a chart exit.
    pub fn inverse(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: y.len() });
        }
        if !self.target.contains(y) || !all_finite(y.iter()) {
            return Err(Error::ChartExit { point: y.to_vec() });
        }
        Ok((self.inverse)(y))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.source.check(x)?;
        Ok((self.jacobian)(x))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.source.check(x)?;
        Ok((self.hessian)(x))
    }

    /// Checks the round trip `inverse(forward(x))` and Jacobian conditioning at the samples.
    pub fn validate(&self, samples: &[Vec<f64>], rel_tol: f64) -> Result<()> {
        for x in samples {
            let y = self.forward(x)?;
            let back = self.inverse(y.as_slice())?;
            let scale = DVector::from_column_slice(x).norm().max(1.0);
            let gap = (back - DVector::from_column_slice(x)).norm();
            if !(gap <= rel_tol * scale) {
                return Err(Error::InvalidArgument(format!("inverse round trip off by {gap} at {x:?}")));
            }
            let j = self.jacobian(x)?;
            let sv = j.singular_values();
            let cond = sv.max() / sv.min();
            if !cond.is_finite() {
                return Err(Error::IllConditioned(format!("singular jacobian at {x:?}")));
            }
        }
        Ok(())
    }

    pub(crate) fn inverse_fn(&self) -> &VecFn {
        &self.inverse
    }

    pub(crate) fn jacobian_fn(&self) -> &MatFn {
        &self.jacobian
    }

    pub(crate) fn hessian_fn(&self) -> &TensorFn {
        &self.hessian
    }
}
