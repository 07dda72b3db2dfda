//! Independent oracles for the one-step moment closed forms: adaptive Simpson
//! quadrature of their defining integrals, with every Gaussian expectation
//! reduced to lognormal moments.
#![allow(dead_code)]

use symsde_core::linear_oracle::lognormal_moment;
use symsde_core::schemes::LinearSdeParams;

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive(f, a, m, left, 0.5 * tol, depth - 1) + adaptive(f, m, b, right, 0.5 * tol, depth - 1)
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    adaptive(&f, a, b, simpson(&f, a, b), 1e-15, 40)
}

// Moments of Psi_{s,t} = exp((a - c^2/2)(t - s) + c (W_t - W_s)), built from
// the lognormal moment: E[Psi] = e^{a dt}, E[Psi^2] = e^{(2a + c^2) dt}.
pub fn e_psi(p: LinearSdeParams, dt: f64) -> f64 {
    lognormal_moment(p.a - 0.5 * p.c * p.c, p.c, dt)
}

pub fn e_psi2(p: LinearSdeParams, dt: f64) -> f64 {
    lognormal_moment(2.0 * p.a - p.c * p.c, 2.0 * p.c, dt)
}

// For zero-mean Gaussian Y jointly Gaussian with X: E[e^X Y] = Cov(X, Y) E[e^X].
pub fn m1_oracle(h: f64, p: LinearSdeParams) -> f64 {
    integrate(|t| e_psi2(p, h - t) * (1.0 - 2.0 * e_psi(p, t) + e_psi2(p, t)), 0.0, h)
}

pub fn m3_oracle(h: f64, p: LinearSdeParams) -> f64 {
    integrate(|t| e_psi2(p, h - t) + 1.0 - 2.0 * e_psi(p, h - t), 0.0, h)
}

pub fn m5_oracle(h: f64, p: LinearSdeParams) -> f64 {
    let c = p.c;
    // K = (1 - Psi_{0,h}) W_h; E[e^{lW} W^2] = (h + l^2 h^2) e^{l^2 h / 2}
    let k2 = h - 2.0 * e_psi(p, h) * (h + c * c * h * h) + e_psi2(p, h) * (h + 4.0 * c * c * h * h);
    // H = c int Psi_{t,h} dt; for s < t, E[Psi_{s,h} Psi_{t,h}] = E[Psi_{s,t}] E[Psi_{t,h}^2]
    let h2 = c * c * integrate(|t| 2.0 * integrate(|s| e_psi(p, t - s) * e_psi2(p, h - t), 0.0, t), 0.0, h);
    // E[Psi_{t,h} W_h] = c (h - t) E[Psi_{t,h}]
    // E[Psi_{t,h} Psi_{0,h} W_h] = c (2h - t) E[Psi_{0,t}] E[Psi_{t,h}^2]
    let hk = c * integrate(
        |t| c * (h - t) * e_psi(p, h - t) - c * (2.0 * h - t) * e_psi(p, t) * e_psi2(p, h - t),
        0.0,
        h,
    );
    k2 + h2 + 2.0 * hk
}

pub fn m7_oracle(h: f64, p: LinearSdeParams) -> f64 {
    let c = p.c;
    let with_h = c * integrate(|t| e_psi(p, t) * e_psi2(p, h - t), 0.0, h);
    let with_k = c * h * e_psi(p, h) - 2.0 * c * h * e_psi2(p, h);
    with_h + with_k
}

pub fn m8_oracle(h: f64, p: LinearSdeParams) -> f64 {
    let c = p.c;
    c * integrate(|t| e_psi(p, h - t), 0.0, h) - c * h * e_psi(p, h)
}
