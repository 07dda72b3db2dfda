//! Ready-made models, symmetries and coordinate changes.

use nalgebra::{DMatrix, DVector};

use super::{Diffeomorphism, Domain, SdeSystem, VectorField};
use crate::schemes::LinearSdeParams;

fn v1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn m1(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn v2(x: f64, y: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y])
}

fn m2(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

fn col2(x: f64, y: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[x, y])
}

/// The half line `x > 0`.
pub fn positive_half_line() -> Domain {
    Domain::whole(1).with_positive_axis(0)
}

/// `R x (0, inf)`, the chart of the augmented linear system.
pub fn upper_half_plane() -> Domain {
    Domain::whole(2).with_positive_axis(1)
}

/// `dX = (aX + b) dt + (cX + d) dW`.
pub fn linear_sde(p: LinearSdeParams) -> SdeSystem {
    let LinearSdeParams { a, b, c, d } = p;
    SdeSystem::new(1, 1, move |x| v1(a * x[0] + b), move |x| m1(c * x[0] + d))
        .with_drift_jacobian(move |_| m1(a))
        .with_diffusion_jacobian(move |_| vec![m1(c)])
}

/// The linear equation together with its homogeneous companion
/// `dZ = aZ dt + cZ dW`, on `z > 0`.
pub fn augmented_linear_sde(p: LinearSdeParams) -> SdeSystem {
    let LinearSdeParams { a, b, c, d } = p;
    SdeSystem::new(
        2,
        1,
        move |x| v2(a * x[0] + b, a * x[1]),
        move |x| col2(c * x[0] + d, c * x[1]),
    )
    .with_drift_jacobian(move |_| m2([[a, 0.0], [0.0, a]]))
    .with_diffusion_jacobian(move |_| vec![col2(c, 0.0), col2(0.0, c)])
    .with_domain(upper_half_plane())
}

/// The strong symmetries `(z, 0)` and `(0, z)` of the augmented system.
pub fn augmented_symmetries() -> [VectorField; 2] {
    let zero_h = |_: &[f64]| vec![DMatrix::zeros(2, 2); 2];
    [
        VectorField::new(2, |x| v2(x[1], 0.0), |_| m2([[0.0, 1.0], [0.0, 0.0]]))
            .with_hessian(zero_h)
            .with_domain(upper_half_plane()),
        VectorField::new(2, |x| v2(0.0, x[1]), |_| m2([[0.0, 0.0], [0.0, 1.0]]))
            .with_hessian(zero_h)
            .with_domain(upper_half_plane()),
    ]
}

/// `(x, z) -> ((x - k)/z, log z)`, straightening both symmetries.
pub fn adapted_chart(k: f64) -> Diffeomorphism {
    Diffeomorphism::new(
        2,
        move |x| v2((x[0] - k) / x[1], x[1].ln()),
        move |y| {
            let z = y[1].exp();
            v2(y[0] * z + k, z)
        },
        move |x| {
            let z = x[1];
            m2([[1.0 / z, -(x[0] - k) / (z * z)], [0.0, 1.0 / z]])
        },
        move |x| {
            let z = x[1];
            let z2 = z * z;
            vec![
                m2([[0.0, -1.0 / z2], [-1.0 / z2, 2.0 * (x[0] - k) / (z2 * z)]]),
                m2([[0.0, 0.0], [0.0, -1.0 / z2]]),
            ]
        },
    )
    .with_domains(upper_half_plane(), Domain::whole(2))
}

/// Closed-form image of the augmented system under [`adapted_chart`]:
/// `dX' = (b - cd + ak - c^2 k) e^{-Z'} dt + (d + ck) e^{-Z'} dW`,
/// `dZ' = (a - c^2/2) dt + c dW`.
pub fn adapted_linear_sde(p: LinearSdeParams, k: f64) -> SdeSystem {
    let LinearSdeParams { a, b, c, d } = p;
    let drift_x = b - c * d + a * k - c * c * k;
    let diff_x = d + c * k;
    let drift_z = a - 0.5 * c * c;
    SdeSystem::new(
        2,
        1,
        move |y| v2(drift_x * (-y[1]).exp(), drift_z),
        move |y| col2(diff_x * (-y[1]).exp(), c),
    )
    .with_drift_jacobian(move |y| m2([[0.0, -drift_x * (-y[1]).exp()], [0.0, 0.0]]))
    .with_diffusion_jacobian(move |y| vec![col2(0.0, 0.0), col2(-diff_x * (-y[1]).exp(), 0.0)])
}

/// Images of the two symmetries in adapted coordinates: `(1, 0)` and `(-x', 1)`.
pub fn adapted_symmetries() -> [VectorField; 2] {
    let zero_h = |_: &[f64]| vec![DMatrix::zeros(2, 2); 2];
    [
        VectorField::new(2, |_| v2(1.0, 0.0), |_| DMatrix::zeros(2, 2)).with_hessian(zero_h),
        VectorField::new(2, |y| v2(-y[0], 1.0), |_| m2([[-1.0, 0.0], [0.0, 0.0]])).with_hessian(zero_h),
    ]
}

/// Flow of `(1, 0)` at time `s`: `(x', z') -> (x' + s, z')`.
pub fn adapted_translation_flow(s: f64) -> Diffeomorphism {
    Diffeomorphism::new(
        2,
        move |y| v2(y[0] + s, y[1]),
        move |y| v2(y[0] - s, y[1]),
        |_| DMatrix::identity(2, 2),
        |_| vec![DMatrix::zeros(2, 2); 2],
    )
}

/// Flow of `(-x', 1)` at time `s`: `(x', z') -> (x' e^{-s}, z' + s)`.
pub fn adapted_scaling_flow(s: f64) -> Diffeomorphism {
    let q = (-s).exp();
    Diffeomorphism::new(
        2,
        move |y| v2(y[0] * q, y[1] + s),
        move |y| v2(y[0] / q, y[1] - s),
        move |_| m2([[q, 0.0], [0.0, 1.0]]),
        |_| vec![DMatrix::zeros(2, 2); 2],
    )
}

/// `dX = (a tanh X - b^2/2 tanh^3 X) dt + b tanh X dW`.
pub fn tanh_sde(a: f64, b: f64) -> SdeSystem {
    SdeSystem::new(
        1,
        1,
        move |x| {
            let t = x[0].tanh();
            v1(a * t - 0.5 * b * b * t * t * t)
        },
        move |x| m1(b * x[0].tanh()),
    )
    .with_drift_jacobian(move |x| {
        let t = x[0].tanh();
        m1((a - 1.5 * b * b * t * t) * (1.0 - t * t))
    })
    .with_diffusion_jacobian(move |x| {
        let t = x[0].tanh();
        vec![m1(b * (1.0 - t * t))]
    })
}

/// The strong symmetry `tanh(x) d/dx` of [`tanh_sde`].
pub fn tanh_symmetry() -> VectorField {
    VectorField::new(1, |x| v1(x[0].tanh()), |x| {
        let t = x[0].tanh();
        m1(1.0 - t * t)
    })
    .with_hessian(|x| {
        let t = x[0].tanh();
        vec![m1(-2.0 * t * (1.0 - t * t))]
    })
}

/// `x -> sinh x`, which maps `tanh(x) d/dx` to `x' d/dx'`.
pub fn sinh_chart() -> Diffeomorphism {
    Diffeomorphism::new(
        1,
        |x| v1(x[0].sinh()),
        |y| v1(y[0].asinh()),
        |x| m1(x[0].cosh()),
        |x| vec![m1(x[0].sinh())],
    )
}

/// `log sinh x` on `x > 0`, overflow-safe for large `x`.
pub fn log_sinh(x: f64) -> f64 {
    if x < 20.0 {
        x.sinh().ln()
    } else {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// Inverse of [`log_sinh`]: `arcsinh(e^y)`.
pub fn log_sinh_inverse(y: f64) -> f64 {
    if y < 20.0 {
        y.exp().asinh()
    } else {
        y + (1.0 + (1.0 + (-2.0 * y).exp()).sqrt()).ln()
    }
}

/// `x -> log sinh x` on `x > 0`, which maps `tanh(x) d/dx` to `d/dx'` and
/// turns [`tanh_sde`] into an SDE with constant coefficients.
pub fn log_sinh_chart() -> Diffeomorphism {
    Diffeomorphism::new(
        1,
        |x| v1(log_sinh(x[0])),
        |y| v1(log_sinh_inverse(y[0])),
        |x| m1(1.0 / x[0].tanh()),
        |x| {
            let s = x[0].sinh();
            vec![m1(-1.0 / (s * s))]
        },
    )
    .with_domains(positive_half_line(), Domain::whole(1))
}

/// Pathwise solution of [`tanh_sde`] from `x0 > 0` given `W_t = w`.
pub fn tanh_exact_solution(a: f64, b: f64, x0: f64, t: f64, w: f64) -> f64 {
    log_sinh_inverse(log_sinh(x0) + (a - 0.5 * b * b) * t + b * w)
}

/// `dX = lambda X dt + s X dW`.
pub fn geometric_brownian_motion(lambda: f64, s: f64) -> SdeSystem {
    SdeSystem::new(1, 1, move |x| v1(lambda * x[0]), move |x| m1(s * x[0]))
        .with_drift_jacobian(move |_| m1(lambda))
        .with_diffusion_jacobian(move |_| vec![m1(s)])
}

/// Pathwise solution of [`geometric_brownian_motion`] given `W_t = w`.
pub fn gbm_exact_solution(lambda: f64, s: f64, x0: f64, t: f64, w: f64) -> f64 {
    x0 * ((lambda - 0.5 * s * s) * t + s * w).exp()
}
