//! Sample-based structural certificates (affine fields, triangular systems,
//! canonical form).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{DerivativePolicy, Domain, SdeSystem, VectorField};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES_PER_AXIS: usize = 7;

/// Total number of random samples used instead of a full grid when `n >= 3`.
const RANDOM_SAMPLE_CAP: usize = DEFAULT_SAMPLES_PER_AXIS * DEFAULT_SAMPLES_PER_AXIS;
const SAMPLE_SEED: u64 = 0x5eed;

/// Sample points of a bounded box: a full tensor grid with `per_axis` points
/// per axis when `n <= 2`, otherwise 49 uniform random points from a fixed seed.
pub fn sample_box(domain: &Domain, per_axis: usize) -> Result<Vec<Vec<f64>>> {
    if per_axis < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples per axis, got {per_axis}")));
    }
    if !domain.is_bounded() {
        return Err(Error::InvalidArgument("cannot sample an unbounded box".into()));
    }
    let n = domain.dim();
    let (lo, hi) = (domain.lower(), domain.upper());
    if n >= 3 {
        let mut rng = ChaCha20Rng::seed_from_u64(SAMPLE_SEED);
        return Ok((0..RANDOM_SAMPLE_CAP)
            .map(|_| (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>()).collect())
            .collect());
    }
    let axis = |i: usize| -> Vec<f64> {
        (0..per_axis).map(|j| lo[i] + (hi[i] - lo[i]) * j as f64 / (per_axis - 1) as f64).collect()
    };
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for i in 0..n {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis(i).into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn require_samples(samples: &[Vec<f64>]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(())
}

/// True when every second derivative of every component of `y` is below `tol`
/// at every sample.
pub fn is_affine(y: &VectorField, samples: &[Vec<f64>], tol: f64) -> Result<bool> {
    require_samples(samples)?;
    for x in samples {
        let hessians = y.hessian(x, DerivativePolicy::FiniteDifferenceFallback)?;
        if hessians.iter().any(|h| h.amax() >= tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True when the system is triangular in its first `r` coordinates: component
/// `j <= r` does not depend on `x^j..x^r`, and components after `r` do not
/// depend on `x^1..x^r` at all.
pub fn is_triangular(sde: &SdeSystem, r: usize, samples: &[Vec<f64>], tol: f64) -> Result<bool> {
    let n = sde.dim();
    if r == 0 || r > n {
        return Err(Error::InvalidSplit(format!("split {r} outside 1..={n}")));
    }
    require_samples(samples)?;
    let policy = DerivativePolicy::FiniteDifferenceFallback;
    for x in samples {
        let jmu = sde.drift_jacobian(x, policy)?;
        let dsigma = sde.diffusion_jacobian(x, policy)?;
        for j in 0..n {
            let forbidden = if j < r { j..r } else { 0..r };
            for k in forbidden {
                if jmu[(j, k)].abs() >= tol || dsigma[k].row(j).amax() >= tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// True when the columns `(Y_1 | ... | Y_r)` have identity diagonal blocks of
/// the given sizes, zero blocks below the diagonal and a zero bottom block.
pub fn is_canonical_form(
    fields: &[VectorField],
    samples: &[Vec<f64>],
    splits: &[usize],
    tol: f64,
) -> Result<bool> {
    let r = fields.len();
    let n = fields.first().map_or(0, |f| f.dim());
    if r == 0 || fields.iter().any(|f| f.dim() != n) {
        return Err(Error::InvalidSplit("fields must be nonempty and share one dimension".into()));
    }
    if splits.iter().any(|&s| s == 0) || splits.iter().sum::<usize>() != r || r > n {
        return Err(Error::InvalidSplit(format!(
            "splits {splits:?} must be positive and sum to {r} <= {n}"
        )));
    }
    require_samples(samples)?;
    let mut block_of = Vec::with_capacity(r);
    for (b, &size) in splits.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }
    for x in samples {
        let mut matrix = DMatrix::zeros(n, r);
        for (col, f) in fields.iter().enumerate() {
            matrix.set_column(col, &f.value(x)?);
        }
        for row in 0..n {
            for col in 0..r {
                let expected = if row >= r {
                    Some(0.0)
                } else if block_of[row] == block_of[col] {
                    Some(if row == col { 1.0 } else { 0.0 })
                } else if block_of[row] > block_of[col] {
                    Some(0.0)
                } else {
                    None
                };
                if let Some(e) = expected {
                    if (matrix[(row, col)] - e).abs() >= tol {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
