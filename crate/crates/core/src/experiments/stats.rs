use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_oracle::mean_curve;
use crate::schemes::LinearSdeParams;

use super::report::TvReport;

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Sample mean and `stdev / sqrt(P)`, summed in index order.
fn mean_and_stderr(xs: impl ExactSizeIterator<Item = f64> + Clone) -> Result<Estimate> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(Estimate { value: mean, stderr })
}

/// `|mean(samples) - target|` with the standard error of the sample mean.
pub fn weak_error_against(samples: &[f64], target: f64) -> Result<Estimate> {
    let m = mean_and_stderr(samples.iter().copied())?;
    Ok(Estimate { value: (m.value - target).abs(), stderr: m.stderr })
}

/// Weak error at `t` against the exact mean of the linear model.
pub fn weak_error(samples: &[f64], p: LinearSdeParams, x0: f64, t: f64) -> Result<Estimate> {
    weak_error_against(samples, mean_curve(p, x0, t))
}

/// Scheme and reference values on the same Brownian paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoupledSamples {
    pub scheme: Vec<f64>,
    pub reference: Vec<f64>,
}

impl CoupledSamples {
    pub fn new(scheme: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        if scheme.len() != reference.len() {
            return Err(Error::Uncoupled(format!("{} scheme values, {} reference values", scheme.len(), reference.len())));
        }
        Ok(Self { scheme, reference })
    }

    pub fn len(&self) -> usize {
        self.scheme.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scheme.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
}

/// `E|X - X^N|` (L1) or `sqrt(E|X - X^N|^2)` (L2). The L2 standard error
/// follows from the delta method.
pub fn strong_error(samples: &CoupledSamples, norm: Norm) -> Result<Estimate> {
    if samples.scheme.len() != samples.reference.len() {
        return Err(Error::Uncoupled("scheme and reference lengths differ".into()));
    }
    let diffs = samples.scheme.iter().zip(&samples.reference).map(|(a, b)| (a - b).abs());
    match norm {
        Norm::L1 => mean_and_stderr(diffs),
        Norm::L2 => {
            let sq = mean_and_stderr(diffs.map(|d| d * d))?;
            let rms = sq.value.sqrt();
            let stderr = if rms > 0.0 { sq.stderr / (2.0 * rms) } else { 0.0 };
            Ok(Estimate { value: rms, stderr })
        }
    }
}

/// Histograms both samples on `bin_count` equal-width bins over the pooled
/// range and returns `1/2 sum |p_i - q_i|`.
pub fn tv_distance(a: &[f64], b: &[f64], bin_count: usize) -> Result<TvReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples);
    }
    if bin_count == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let masses = |xs: &[f64]| {
        let mut counts = vec![0usize; bin_count];
        for &x in xs {
            let i = if width > 0.0 { ((x - lo) / width * bin_count as f64) as usize } else { 0 };
            counts[i.min(bin_count - 1)] += 1;
        }
        counts.into_iter().map(|c| c as f64 / xs.len() as f64).collect::<Vec<_>>()
    };
    let mass_a = masses(a);
    let mass_b = masses(b);
    let tv = 0.5 * mass_a.iter().zip(&mass_b).map(|(p, q)| (p - q).abs()).sum::<f64>();
    Ok(TvReport { bin_count, range: (lo, hi), tv: tv.min(1.0), mass_a, mass_b })
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!("a fit needs at least 2 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit { slope, intercept, max_residual })
}

fn logs(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::InvalidArgument(format!("values must be positive and finite, got {v}")))
            }
        })
        .collect()
}

/// Slope of `log error` against `log h`.
pub fn convergence_fit(steps: &[f64], errors: &[f64]) -> Result<LinearFit> {
    if steps.len() < 3 {
        return Err(Error::InvalidArgument(format!("a convergence fit needs at least 3 points, got {}", steps.len())));
    }
    least_squares(&logs(steps)?, &logs(errors)?)
}

/// Slope of `log error` against `t` over the second half of the time grid.
pub fn growth_rate(times: &[f64], errors: &[f64]) -> Result<LinearFit> {
    if times.len() != errors.len() || times.is_empty() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: errors.len() });
    }
    let half = 0.5 * times[times.len() - 1];
    let (t, e): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(errors)
        .filter(|(t, _)| **t >= half - 1e-9 * half.abs())
        .map(|(t, e)| (*t, *e))
        .unzip();
    least_squares(&t, &logs(&e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tv_examples() {
        let a = vec![0.0; 10_000];
        let mut b = vec![0.0; 5_000];
        b.extend(vec![1.0; 5_000]);
        assert_relative_eq!(tv_distance(&a, &b, 2).unwrap().tv, 0.5);
        assert_eq!(tv_distance(&a, &a, 200).unwrap().tv, 0.0);
        assert_eq!(tv_distance(&[0.0, 0.1], &[5.0, 6.0], 200).unwrap().tv, 1.0);
        assert!(matches!(tv_distance(&[], &a, 2), Err(Error::EmptySamples)));
    }

    #[test]
    fn exact_power_laws_fit_exactly() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e1: Vec<f64> = h.iter().map(|h| 3.0 * h).collect();
        let e2: Vec<f64> = h.iter().map(|h| 0.7 * h.sqrt()).collect();
        assert_relative_eq!(convergence_fit(&h, &e1).unwrap().slope, 1.0, max_relative = 1e-12);
        assert_relative_eq!(convergence_fit(&h, &e2).unwrap().slope, 0.5, max_relative = 1e-12);
        assert!(convergence_fit(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(convergence_fit(&h[..2], &e1[..2]).is_err());
    }

    #[test]
    fn growth_rate_uses_second_half() {
        let t: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
        // steep first half, rate 2 on the second
        let e: Vec<f64> = t.iter().map(|&t| if t < 0.5 { 1e-9 } else { (2.0 * t).exp() }).collect();
        assert_relative_eq!(growth_rate(&t, &e).unwrap().slope, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn strong_error_norms() {
        let s = CoupledSamples::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(strong_error(&s, Norm::L1).unwrap().value, 1.0);
        assert_relative_eq!(strong_error(&s, Norm::L2).unwrap().value, (5.0f64 / 3.0).sqrt());
        assert!(matches!(CoupledSamples::new(vec![1.0], vec![]), Err(Error::Uncoupled(_))));
    }
}
