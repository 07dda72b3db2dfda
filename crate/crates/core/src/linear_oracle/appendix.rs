//! Closed-form one-step moment expressions used by the strong-error bounds of
//! the exact schemes, and envelopes of their derivatives.
//!
//! With `A = 2a + c^2`, `B = a + c^2`, `Psi_{s,t} = exp((a - c^2/2)(t - s) + c (W_t - W_s))`:
//!
//! * `M1(h) = int_0^h E[Psi_{t,h}^2] E[(1 - Psi_{0,t})^2] dt`
//! * `M3(h) = int_0^h E[Psi_{t,h}^2 + 1 - 2 Psi_{t,h}] dt`
//! * `M5(h) = E[(H + K)^2]`, `M7(h) = E[Psi_{0,h} (H + K)]`, `M8(h) = E[H + K]`,
//!   where `K = (1 - Psi_{0,h}) W_h` and `H = c int_0^h Psi_{t,h} dt`
//! * `M9 = M7 M8`
//!
//! The envelopes `M2, M4, M6` (second derivative of `M1, M3, M5`) and `M10`
//! (fourth derivative of `M9`) are maxima of the absolute derivative over a
//! uniform grid of `[0, h]`. Derivatives are taken exactly with Taylor jets.

use super::jet::Jet;
use crate::error::{Error, Result};
use crate::schemes::LinearSdeParams;

/// Points of the uniform grid on `[0, h]` used for envelopes.
pub const ENVELOPE_GRID: usize = 1024;
const DEGENERATE: f64 = 1e-12;

struct Consts {
    a: f64,
    c2: f64,
    big_a: f64,
    big_b: f64,
}

fn consts(p: LinearSdeParams) -> Consts {
    let c2 = p.c * p.c;
    Consts { a: p.a, c2, big_a: 2.0 * p.a + c2, big_b: p.a + c2 }
}

fn require_nonzero(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(v.abs() >= DEGENERATE) {
            return Err(Error::DegenerateParameters(format!("{name} = {v} vanishes")));
        }
    }
    Ok(())
}

fn check_index(index: u8, p: LinearSdeParams) -> Result<()> {
    let k = consts(p);
    let (a, aa, bb) = (("a", k.a), ("2a + c^2", k.big_a), ("a + c^2", k.big_b));
    match index {
        1 => require_nonzero(&[aa, bb]),
        3 => require_nonzero(&[a, aa]),
        5 => require_nonzero(&[a, aa, bb]),
        7 => require_nonzero(&[bb]),
        8 => require_nonzero(&[a]),
        9 => require_nonzero(&[a, bb]),
        _ => Err(Error::InvalidArgument(format!("no closed form M{index}"))),
    }
}

fn m1(h: Jet, k: &Consts) -> Jet {
    let (a, c2, aa, bb) = (k.a, k.c2, k.big_a, k.big_b);
    let e_big = (h * aa).exp();
    let e_a = (h * a).exp();
    (h * e_big * (aa * bb) - bb - e_big * (c2 + 3.0 * a) + e_a * (2.0 * c2 + 4.0 * a)) / (aa * bb)
}

fn m3(h: Jet, k: &Consts) -> Jet {
    let (a, c2, aa) = (k.a, k.c2, k.big_a);
    let e_big = (h * aa).exp();
    let e_a = (h * a).exp();
    (e_big * a + h * (a * aa) - e_a * (4.0 * a + 2.0 * c2) + (3.0 * a + 2.0 * c2)) / (a * aa)
}

fn m5(h: Jet, k: &Consts) -> Jet {
    let (a, c2, aa, bb) = (k.a, k.c2, k.big_a, k.big_b);
    let e_big = (h * aa).exp();
    let e_a = (h * a).exp();
    let h2 = h * h;
    let k2 = h - 2.0 * e_a * (h + h2 * c2) + e_big * (h + h2 * (4.0 * c2));
    let h_sq = ((e_big - e_a) / bb - (e_big - 1.0) / aa) * (2.0 * c2 / a);
    let i1 = (e_a * (h * a - 1.0) + 1.0) / (a * a);
    let i2 = (e_big - e_a * (h * bb + 1.0)) / (bb * bb);
    let i3 = (e_big * (h * bb - 1.0) + e_a) / (bb * bb);
    let hk = (i1 - i2 - 2.0 * i3) * c2;
    k2 + h_sq + 2.0 * hk
}

fn m7(h: Jet, k: &Consts, c: f64) -> Jet {
    let (a, aa, bb) = (k.a, k.big_a, k.big_b);
    let e_big = (h * aa).exp();
    let e_a = (h * a).exp();
    (c * e_big - c * e_a + h * e_a * (c * bb) - h * e_big * (2.0 * c * bb)) / bb
}

fn m8(h: Jet, k: &Consts, c: f64) -> Jet {
    let e_a = (h * k.a).exp();
    -(c * h * e_a) + (e_a - 1.0) * (c / k.a)
}

fn evaluate(index: u8, h: Jet, p: LinearSdeParams) -> Jet {
    let k = consts(p);
    match index {
        1 => m1(h, &k),
        3 => m3(h, &k),
        5 => m5(h, &k),
        7 => m7(h, &k, p.c),
        8 => m8(h, &k, p.c),
        9 => m7(h, &k, p.c) * m8(h, &k, p.c),
        _ => unreachable!("index validated by check_index"),
    }
}

/// Closed form `M_index(h)` for `index` in `{1, 3, 5, 7, 8, 9}`.
pub fn appendix_m(index: u8, h: f64, p: LinearSdeParams) -> Result<f64> {
    appendix_derivative(index, 0, h, p)
}

/// `d^order/dh^order M_index(h)` for `order <= 4`, computed exactly.
pub fn appendix_derivative(index: u8, order: usize, h: f64, p: LinearSdeParams) -> Result<f64> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h must be non-negative, got {h}")));
    }
    if order > super::jet::JET_ORDER {
        return Err(Error::InvalidArgument(format!("derivative order {order} exceeds 4")));
    }
    check_index(index, p)?;
    Ok(evaluate(index, Jet::variable(h), p).derivative(order))
}

/// Envelope `M_index(h)` for `index` in `{2, 4, 6, 10}`: the largest absolute
/// second (fourth for `M10`) derivative of `M1, M3, M5` (`M9`) on `[0, h]`.
pub fn appendix_envelope(index: u8, h: f64, p: LinearSdeParams) -> Result<f64> {
    let (base, order) = match index {
        2 => (1, 2),
        4 => (3, 2),
        6 => (5, 2),
        10 => (9, 4),
        _ => return Err(Error::InvalidArgument(format!("no envelope M{index}"))),
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    check_index(base, p)?;
    let last = (ENVELOPE_GRID - 1) as f64;
    Ok((0..ENVELOPE_GRID)
        .map(|i| evaluate(base, Jet::variable(h * i as f64 / last), p).derivative(order).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> LinearSdeParams {
        LinearSdeParams::new(-2.0, 0.0, 1.0, 0.0)
    }

    #[test]
    fn regression_values() {
        // High-precision evaluations of the closed forms at a = -2, c = 1.
        let cases: [(u8, f64, f64); 10] = [
            (1, 0.01, 4.96646361547969e-5),
            (1, 0.05, 0.00120719012443021),
            (1, 0.1, 0.00465068371507124),
            (3, 0.01, 5.01621239191730e-5),
            (3, 0.05, 0.00126809256094024),
            (3, 0.1, 0.00512467951740911),
            (5, 0.01, 1.97214379890863e-4),
            (5, 0.05, 0.00467417294564117),
            (5, 0.1, 0.0175928002792215),
            (5, 0.5, 0.318086286634276),
        ];
        for (i, h, v) in cases {
            assert_relative_eq!(appendix_m(i, h, p()).unwrap(), v, max_relative = 1e-9);
        }
    }

    #[test]
    fn vanishing_orders_at_zero() {
        for (i, order) in [(1u8, 1usize), (3, 1), (5, 1), (7, 1), (8, 1), (9, 3)] {
            for k in 0..=order {
                let v = appendix_derivative(i, k, 0.0, p()).unwrap();
                assert!(v.abs() < 1e-12, "M{i} derivative {k} at 0 is {v}");
            }
        }
        assert!(appendix_derivative(9, 4, 0.0, p()).unwrap().abs() > 1e-3);
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        let q = LinearSdeParams::new(-1.0, 0.0, 1.0, 0.0);
        assert!(matches!(appendix_m(1, 0.1, q), Err(Error::DegenerateParameters(_))));
        assert!(appendix_m(3, 0.1, q).is_ok());
        assert!(matches!(appendix_m(8, 0.1, LinearSdeParams::new(0.0, 0.0, 1.0, 0.0)), Err(_)));
        assert!(appendix_m(2, 0.1, p()).is_err());
        assert!(appendix_envelope(3, 0.1, p()).is_err());
    }
}
