//! Truncated Taylor series in one variable, enough to differentiate the
//! closed-form moment integrals exactly up to fourth order.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const JET_ORDER: usize = 4;
const LEN: usize = JET_ORDER + 1;

/// `f(h0 + e) = sum_k coeffs[k] e^k + O(e^5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = v;
        Self { coeffs }
    }

    /// The independent variable at `v`.
    pub fn variable(v: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = v;
        coeffs[1] = 1.0;
        Self { coeffs }
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// The `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        self.coeffs[k] * factorial
    }

    pub fn exp(self) -> Self {
        let f = self.coeffs;
        let mut g = [0.0; LEN];
        g[0] = f[0].exp();
        // g' = f' g
        for k in 1..LEN {
            let s: f64 = (1..=k).map(|j| j as f64 * f[j] * g[k - j]).sum();
            g[k] = s / k as f64;
        }
        Self { coeffs: g }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in self.coeffs.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = [0.0; LEN];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate().take(LEN - i) {
                out[i + j] += a * b;
            }
        }
        Jet { coeffs: out }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for a in self.coeffs.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivatives_of_exp_product() {
        // f(h) = h^2 e^{3h}; f'''' (h) = e^{3h}(81h^2 + 216h + 108)
        let h = 0.4;
        let x = Jet::variable(h);
        let f = x * x * (x * 3.0).exp();
        let e = (3.0 * h).exp();
        assert_relative_eq!(f.value(), h * h * e, max_relative = 1e-15);
        assert_relative_eq!(f.derivative(1), e * (2.0 * h + 3.0 * h * h), max_relative = 1e-14);
        assert_relative_eq!(f.derivative(4), e * (81.0 * h * h + 216.0 * h + 108.0), max_relative = 1e-13);
    }

    #[test]
    fn constants_have_no_slope() {
        let c = Jet::constant(2.5).exp();
        assert_eq!(c.derivative(1), 0.0);
        assert_eq!(c.derivative(4), 0.0);
    }
}
