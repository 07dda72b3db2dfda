//! Reproducible Brownian increment grids.
//!
//! Every path draws from its own ChaCha20 stream keyed by the master seed and
//! selected by the path index, so a grid depends only on `(master_seed,
//! path_index)` and never on how paths are scheduled across workers. Uniform
//! draws are mapped to standard normals with Wichura's AS241 inverse CDF
//! evaluated through `libm`, which keeps the variates bit-identical across
//! platforms.
//!
//! Grids store increments; cumulative Wiener values are recovered by prefix
//! sums on demand. Coarser grids are always obtained from finer ones by
//! summing consecutive increments.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a horizon is a whole number of steps.
pub const STEP_TOLERANCE: f64 = 1e-9;

/// Identifies one path of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self { master_seed, path_index }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        rng
    }
}

/// A realized Brownian increment grid on `[0, T]` with uniform step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    horizon: f64,
    step: f64,
    noise_dim: usize,
    steps: usize,
    /// Row-major `steps x noise_dim` increments.
    increments: Vec<f64>,
}

/// Number of steps of size `step` covering `horizon`, if it is a whole number.
pub fn step_count(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let ratio = horizon / step;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > STEP_TOLERANCE * ratio.max(1.0) {
        return Err(Error::NonIntegerSteps { horizon, step });
    }
    Ok(steps as usize)
}

/// Draws the increment grid for one path.
pub fn sample_path(seed: SeedSpec, horizon: f64, step: f64, noise_dim: usize) -> Result<NoiseGrid> {
    if noise_dim == 0 {
        return Err(Error::InvalidArgument("noise dimension must be positive".into()));
    }
    let steps = step_count(horizon, step)?;
    let mut rng = seed.rng();
    let scale = step.sqrt();
    let increments = (0..steps * noise_dim)
        .map(|_| scale * standard_normal(&mut rng))
        .collect();
    Ok(NoiseGrid { horizon, step, noise_dim, steps, increments })
}

/// The Lévy-type iterated integral `((dW)^2 - dt) / 2` for a single noise.
pub fn levy_term(dw: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(0.5 * (dw * dw - dt))
}

impl NoiseGrid {
    /// Builds a grid from explicit increments (row-major, `steps x noise_dim`).
    pub fn from_increments(step: f64, noise_dim: usize, increments: Vec<f64>) -> Result<Self> {
        if noise_dim == 0 || increments.is_empty() || increments.len() % noise_dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} increments do not form rows of width {noise_dim}",
                increments.len()
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        let steps = increments.len() / noise_dim;
        Ok(Self { horizon: steps as f64 * step, step, noise_dim, steps, increments })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments of step `n` (zero-based), one entry per noise component.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.increments.chunks_exact(self.noise_dim)
    }

    /// Sums blocks of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<NoiseGrid> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::NotDivisible { steps: self.steps, factor });
        }
        let m = self.noise_dim;
        let coarse_steps = self.steps / factor;
        let mut increments = vec![0.0; coarse_steps * m];
        for (n, out) in increments.chunks_exact_mut(m).enumerate() {
            for row in self.increments[n * factor * m..(n + 1) * factor * m].chunks_exact(m) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        Ok(NoiseGrid {
            horizon: self.horizon,
            step: self.step * factor as f64,
            noise_dim: m,
            steps: coarse_steps,
            increments,
        })
    }

    /// Wiener values `W(t_n)` for `n = 0..=N`, row-major with `W(0) = 0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let m = self.noise_dim;
        let mut out = vec![0.0; (self.steps + 1) * m];
        for n in 0..self.steps {
            for a in 0..m {
                out[(n + 1) * m + a] = out[n * m + a] + self.increments[n * m + a];
            }
        }
        out
    }

    /// Debug dump: `T, h` as little-endian f64, `m, N` as little-endian u64,
    /// then the increments row-major as little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.noise_dim as u64).to_le_bytes())?;
        w.write_all(&(self.steps as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<NoiseGrid> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let step = f64::from_le_bytes(next(&mut r)?);
        let noise_dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut increments = Vec::with_capacity(steps * noise_dim);
        for _ in 0..steps * noise_dim {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        if noise_dim == 0 || steps == 0 {
            return Err(Error::InvalidArgument("empty grid in dump".into()));
        }
        Ok(NoiseGrid { horizon, step, noise_dim, steps, increments })
    }
}

/// Uniform variate on the open interval (0, 1) from the top 53 bits.
fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal variate by inverse-CDF transform of an open uniform.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    inverse_normal_cdf(open_uniform(rng))
}

/// Quantile function of the standard normal (Wichura, AS241 / PPND16).
///
/// Relative accuracy is about 1e-16 over (0, 1). Returns +-infinity at 0 and 1.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = libm::sqrt(-libm::log(tail));
    let value = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}
