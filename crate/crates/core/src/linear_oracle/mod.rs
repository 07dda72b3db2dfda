//! Ground truth for `dX = (aX + b) dt + (cX + d) dW`: moments, equilibrium
//! thresholds, pathwise reference trajectories, error-bound growth functions
//! and the one-step moment expressions behind them.

mod appendix;
pub mod jet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseGrid;
use crate::schemes::{exact_milstein_linear_step, LinearSdeParams, SchemeSpec};

pub use appendix::{appendix_derivative, appendix_envelope, appendix_m, ENVELOPE_GRID};

/// `E[exp(alpha t + beta W_t)] = exp((alpha + beta^2/2) t)`.
pub fn lognormal_moment(alpha: f64, beta: f64, t: f64) -> f64 {
    ((alpha + 0.5 * beta * beta) * t).exp()
}

/// `int_0^t e^{r s} ds`, continuous at `r = 0`.
pub fn phi1(r: f64, t: f64) -> f64 {
    if r == 0.0 {
        t
    } else {
        (r * t).exp_m1() / r
    }
}

/// `int_0^t s e^{r s} ds`, continuous at `r = 0`.
fn phi1_dr(r: f64, t: f64) -> f64 {
    let x = r * t;
    if x.abs() < 1e-2 {
        // sum_k r^k t^(k+2) / (k! (k+2))
        let mut term = t * t;
        let mut sum = 0.0;
        for k in 0..10 {
            sum += term / (k as f64 + 2.0);
            term *= x / (k as f64 + 1.0);
        }
        sum
    } else {
        ((x - 1.0) * x.exp() + 1.0) / (r * r)
    }
}

/// Divided difference `(phi1(r1, t) - phi1(r2, t)) / (r1 - r2)`.
fn phi1_divided(r1: f64, r2: f64, t: f64) -> f64 {
    let gap = r1 - r2;
    if gap.abs() <= 1e-6 * (1.0 + r1.abs() + r2.abs()) {
        phi1_dr(0.5 * (r1 + r2), t)
    } else {
        (phi1(r1, t) - phi1(r2, t)) / gap
    }
}

/// `E[X_t]` from `X_0 = x0`, solving `dE/dt = aE + b`.
pub fn mean_curve(p: LinearSdeParams, x0: f64, t: f64) -> f64 {
    x0 * (p.a * t).exp() + p.b * phi1(p.a, t)
}

/// `E[X_t^2]` from `X_0 = x0`, solving `dM/dt = (2a + c^2) M + (2b + 2cd) E + d^2`.
pub fn second_moment_curve(p: LinearSdeParams, x0: f64, t: f64) -> f64 {
    let LinearSdeParams { a, b, c, d } = p;
    let big_a = 2.0 * a + c * c;
    let big_b = a + c * c;
    let beta = 2.0 * b + 2.0 * c * d;
    // int_0^t e^{A(t-s)} E(s) ds with E(s) = x0 e^{as} + b phi1(a, s)
    let forced = x0 * (a * t).exp() * phi1(big_b, t) + b * phi1_divided(big_a, a, t);
    x0 * x0 * (big_a * t).exp() + beta * forced + d * d * phi1(big_a, t)
}

/// First and second moment curves of one parameter set and initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub params: LinearSdeParams,
    pub x0: f64,
}

impl MomentCurve {
    pub fn new(params: LinearSdeParams, x0: f64) -> Self {
        Self { params, x0 }
    }

    pub fn mean(&self, t: f64) -> f64 {
        mean_curve(self.params, self.x0, t)
    }

    pub fn second_moment(&self, t: f64) -> f64 {
        second_moment_curve(self.params, self.x0, t)
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.second_moment(t) - self.mean(t).powi(2)
    }
}

/// Strict-inequality thresholds of the stationary law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumClass {
    /// `a - c^2/2 < 0`
    pub has_equilibrium: bool,
    /// `a < 0`
    pub finite_mean: bool,
    /// `a + c^2/2 < 0`
    pub finite_second_moment: bool,
}

pub fn equilibrium_classification(p: LinearSdeParams) -> EquilibriumClass {
    let half_c2 = 0.5 * p.c * p.c;
    EquilibriumClass {
        has_equilibrium: p.a - half_c2 < 0.0,
        finite_mean: p.a < 0.0,
        finite_second_moment: p.a + half_c2 < 0.0,
    }
}

/// How a reference trajectory is produced on the fine grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    /// Exact Milstein map at `k = -d/c` (`k = 0` when `c = 0`).
    #[default]
    ExactScheme,
    /// Plain Milstein on the fine grid.
    FineMilstein,
}

impl ReferenceMethod {
    /// The per-step map used for the reference.
    pub fn scheme(&self, p: LinearSdeParams) -> SchemeSpec {
        match self {
            ReferenceMethod::ExactScheme => SchemeSpec::ExactMilstein { k: p.coincidence_k().unwrap_or(0.0) },
            ReferenceMethod::FineMilstein => SchemeSpec::Milstein,
        }
    }
}

/// Reference trajectory at every fine grid time, starting with `x0`.
pub fn reference_path(p: LinearSdeParams, x0: f64, fine: &NoiseGrid, method: ReferenceMethod) -> Result<Vec<f64>> {
    if fine.noise_dim() != 1 {
        return Err(Error::UnsupportedNoiseDimension(fine.noise_dim()));
    }
    let h = fine.step();
    let mut out = Vec::with_capacity(fine.steps() + 1);
    out.push(x0);
    let mut x = x0;
    match method {
        ReferenceMethod::ExactScheme => {
            let k = p.coincidence_k().unwrap_or(0.0);
            for &dw in fine.increments() {
                x = exact_milstein_linear_step(p, k, x, h, dw);
                out.push(x);
            }
        }
        ReferenceMethod::FineMilstein => {
            for &dw in fine.increments() {
                x = SchemeSpec::Milstein.step_linear(p, x, h, dw);
                out.push(x);
            }
        }
    }
    Ok(out)
}

/// Which error-bound growth function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    G1,
    G2,
    G4,
}

/// Exponent `r` of the bound function `(e^{rT} - 1)/r`.
pub fn bound_exponent(which: BoundKind, p: LinearSdeParams, alpha: Option<f64>) -> Result<f64> {
    let c2 = p.c * p.c;
    Ok(match which {
        BoundKind::G1 => p.a + 0.5 * c2,
        BoundKind::G2 => 2.0 * p.a + c2,
        BoundKind::G4 => {
            let alpha = alpha.ok_or_else(|| Error::InvalidArgument("G4 needs alpha".into()))?;
            p.a + 0.5 * c2 * (alpha - 1.0)
        }
    })
}

/// `G(T) = (e^{rT} - 1)/r` with the exponent of `which`; equals `T` when `r = 0`.
pub fn bound_g(which: BoundKind, t: f64, p: LinearSdeParams, alpha: Option<f64>) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("T must be non-negative, got {t}")));
    }
    Ok(phi1(bound_exponent(which, p, alpha)?, t))
}

/// Shape of `T -> G(T)` as `T` grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Bounded,
    Linear,
    Exponential,
}

pub fn growth_class(which: BoundKind, p: LinearSdeParams, alpha: Option<f64>) -> Result<GrowthClass> {
    let r = bound_exponent(which, p, alpha)?;
    Ok(if r < 0.0 {
        GrowthClass::Bounded
    } else if r == 0.0 {
        GrowthClass::Linear
    } else {
        GrowthClass::Exponential
    })
}

/// Smallest `n >= 2` with `alpha = 2n/(2n - 1)` satisfying
/// `alpha a + alpha (alpha - 1) c^2 / 2 < 0`, i.e. `a + c^2 / (2(2n - 1)) < 0`.
pub fn select_alpha(p: LinearSdeParams) -> Result<(f64, u64)> {
    if !(p.a < 0.0) {
        return Err(Error::NoValidAlpha { a: p.a });
    }
    let c2 = p.c * p.c;
    let holds = |n: u64| p.a + c2 / (2.0 * (2 * n - 1) as f64) < 0.0;
    let estimate = ((c2 / (-2.0 * p.a) + 1.0) / 2.0).floor();
    if !(estimate < 1e15) {
        return Err(Error::NoValidAlpha { a: p.a });
    }
    let mut n = (estimate as u64).max(2);
    while n > 2 && holds(n - 1) {
        n -= 1;
    }
    while !holds(n) {
        n += 1;
    }
    Ok((2.0 * n as f64 / (2 * n - 1) as f64, n))
}

/// Growth functions, exponent choice and appendix values for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub horizon: f64,
    pub step: f64,
    pub params: LinearSdeParams,
    pub alpha: Option<f64>,
    pub n: Option<u64>,
    pub g1: f64,
    pub g2: f64,
    pub g4: Option<f64>,
    pub g1_growth: GrowthClass,
    pub g2_growth: GrowthClass,
    pub g4_growth: Option<GrowthClass>,
    /// `M1..M10` at `h`; entry `i` holds `M_{i+1}`, `None` when degenerate.
    pub appendix: Vec<Option<f64>>,
}

pub fn bound_report(horizon: f64, step: f64, p: LinearSdeParams) -> Result<BoundReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {step}")));
    }
    let selected = select_alpha(p).ok();
    let alpha = selected.map(|s| s.0);
    let appendix = (1u8..=10)
        .map(|i| match i {
            2 | 4 | 6 | 10 => appendix_envelope(i, step, p).ok(),
            _ => appendix_m(i, step, p).ok(),
        })
        .collect();
    Ok(BoundReport {
        horizon,
        step,
        params: p,
        alpha,
        n: selected.map(|s| s.1),
        g1: bound_g(BoundKind::G1, horizon, p, None)?,
        g2: bound_g(BoundKind::G2, horizon, p, None)?,
        g4: alpha.map(|a| bound_g(BoundKind::G4, horizon, p, Some(a))).transpose()?,
        g1_growth: growth_class(BoundKind::G1, p, None)?,
        g2_growth: growth_class(BoundKind::G2, p, None)?,
        g4_growth: alpha.map(|a| growth_class(BoundKind::G4, p, Some(a))).transpose()?,
        appendix,
    })
}
