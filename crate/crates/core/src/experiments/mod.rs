//! Monte-Carlo ensembles of scalar schemes coupled to a fine-grid reference,
//! and the error statistics computed from them.

mod presets;
mod report;
mod stats;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_oracle::ReferenceMethod;
use crate::noise::{sample_path, step_count, SeedSpec};
use crate::schemes::{exact_milstein_linear_step, LinearSdeParams, OneStepScheme, SchemeSpec};

pub use presets::{figure_preset, FigureKind, FigurePreset, PRESET_NAMES};
pub use report::{error_series, write_series_csv, ErrorSeries, MeanTarget, StabilityReport, TvReport};
pub use stats::{
    convergence_fit, growth_rate, strong_error, tv_distance, weak_error, weak_error_against, CoupledSamples, Estimate,
    LinearFit, Norm,
};

pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_COUPLE_FACTOR: usize = 64;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_X0: f64 = 5.0;
pub const DEFAULT_TV_BINS: usize = 200;
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.5;

/// A scalar one-step map driven by a scalar Brownian motion.
#[derive(Debug, Clone)]
pub enum Integrator {
    /// Allocation-free stepping of the linear model.
    Linear { params: LinearSdeParams, spec: SchemeSpec },
    /// Any one-dimensional scheme with one noise.
    Scheme(OneStepScheme),
}

impl Integrator {
    pub fn linear(params: LinearSdeParams, spec: SchemeSpec) -> Self {
        Self::Linear { params, spec }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Linear { spec, .. } => spec.label(),
            Self::Scheme(s) => s.label(),
        }
    }

    fn check(&self) -> Result<()> {
        if let Self::Scheme(s) = self {
            if s.dim() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, found: s.dim() });
            }
            if s.noise_dim() != 1 {
                return Err(Error::UnsupportedNoiseDimension(s.noise_dim()));
            }
        }
        Ok(())
    }

    #[inline]
    fn step(&self, x: f64, dt: f64, dw: f64) -> Result<f64> {
        match self {
            Self::Linear { params, spec } => Ok(spec.step_linear(*params, x, dt, dw)),
            Self::Scheme(s) => s.step_scalar(x, dt, dw),
        }
    }
}

/// Explicit solution `X_t = f(x0, t, W_t)`.
pub type ExactSolution = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// How the reference trajectory is produced from the fine Brownian path.
#[derive(Clone)]
pub enum Reference {
    /// The linear model on the fine grid, by `method`.
    Linear { params: LinearSdeParams, method: ReferenceMethod },
    /// An explicit solution evaluated at the output times.
    Exact(ExactSolution),
    /// Any integrator on the fine grid.
    Fine(Integrator),
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Linear { params, method } => write!(f, "Linear({params:?}, {method:?})"),
            Self::Exact(_) => f.write_str("Exact"),
            Self::Fine(i) => write!(f, "Fine({})", i.label()),
        }
    }
}

impl Reference {
    pub fn linear(params: LinearSdeParams) -> Self {
        Self::Linear { params, method: ReferenceMethod::ExactScheme }
    }

    pub fn exact(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Exact(Arc::new(f))
    }
}

/// Grid, sampling and parallelism settings of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub x0: f64,
    pub horizon: f64,
    /// Scheme step `h`; the reference runs at `h / couple_factor`.
    pub step: f64,
    /// Record every `output_stride` scheme steps.
    pub output_stride: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub couple_factor: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(x0: f64, horizon: f64, step: f64) -> Self {
        Self {
            x0,
            horizon,
            step,
            output_stride: 1,
            paths: DEFAULT_PATHS,
            master_seed: DEFAULT_SEED,
            couple_factor: DEFAULT_COUPLE_FACTOR,
            workers: None,
        }
    }

    pub fn with_output_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    /// Record at every multiple of `interval`.
    pub fn with_output_interval(mut self, interval: f64) -> Result<Self> {
        self.output_stride = step_count(interval, self.step)?;
        Ok(self)
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_couple_factor(mut self, factor: usize) -> Self {
        self.couple_factor = factor;
        self
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    fn steps(&self) -> Result<usize> {
        if !self.x0.is_finite() {
            return Err(Error::InvalidArgument(format!("x0 must be finite, got {}", self.x0)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument("paths must be at least 1".into()));
        }
        if self.couple_factor == 0 {
            return Err(Error::InvalidArgument("couple factor must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        let steps = step_count(self.horizon, self.step)?;
        if self.output_stride == 0 || steps % self.output_stride != 0 {
            return Err(Error::NotDivisible { steps, factor: self.output_stride });
        }
        Ok(steps)
    }

    /// Output times `t_j = j * stride * h`.
    pub fn output_times(&self) -> Result<Vec<f64>> {
        let steps = self.steps()?;
        Ok((1..=steps / self.output_stride)
            .map(|j| (j * self.output_stride) as f64 * self.step)
            .collect())
    }
}

/// Why a path stopped contributing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The conjugating chart could not map the state back.
    ChartExit,
    /// The state became non-finite.
    Overflow,
    /// Any other step error.
    StepError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathFailure {
    pub kind: FailureKind,
    /// First output index at which the path is missing.
    pub output_index: usize,
}

/// Per-path values of every scheme and of the reference at the output times.
/// Values after a failure are NaN.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `values[scheme][time][path]`
    pub values: Vec<Vec<Vec<f64>>>,
    /// `reference[time][path]`
    pub reference: Vec<Vec<f64>>,
    /// `failures[scheme][path]`
    pub failures: Vec<Vec<Option<PathFailure>>>,
    pub reference_failures: Vec<Option<PathFailure>>,
}

struct PathRecord {
    values: Vec<Vec<f64>>,
    reference: Vec<f64>,
    failures: Vec<Option<PathFailure>>,
    reference_failure: Option<PathFailure>,
}

fn classify(err: &Error) -> FailureKind {
    match err {
        Error::ChartExit { .. } | Error::OutsideDomain { .. } => FailureKind::ChartExit,
        _ => FailureKind::StepError,
    }
}

struct PathJob<'a> {
    schemes: &'a [Integrator],
    reference: &'a Reference,
    spec: &'a EnsembleSpec,
    steps: usize,
    outputs: usize,
}

impl PathJob<'_> {
    fn run(&self, index: usize) -> Result<PathRecord> {
        let spec = self.spec;
        let r = spec.couple_factor;
        let h = spec.step;
        let fine_h = h / r as f64;
        let grid = sample_path(SeedSpec::new(spec.master_seed, index as u64), spec.horizon, fine_h, 1)?;
        let inc = grid.increments();
        let n_schemes = self.schemes.len();

        let mut x = vec![spec.x0; n_schemes];
        let mut values = vec![Vec::with_capacity(self.outputs); n_schemes];
        let mut failures: Vec<Option<PathFailure>> = vec![None; n_schemes];
        let mut reference = Vec::with_capacity(self.outputs);
        let mut reference_failure = None;
        let mut x_ref = spec.x0;
        let mut w = 0.0;

        for n in 0..self.steps {
            let out = n / spec.output_stride;
            let mut dw_coarse = 0.0;
            for &dw in &inc[n * r..(n + 1) * r] {
                dw_coarse += dw;
                w += dw;
                if reference_failure.is_some() {
                    continue;
                }
                match self.reference {
                    Reference::Linear { params, method: ReferenceMethod::ExactScheme } => {
                        let k = params.coincidence_k().unwrap_or(0.0);
                        x_ref = exact_milstein_linear_step(*params, k, x_ref, fine_h, dw);
                    }
                    Reference::Linear { params, method: ReferenceMethod::FineMilstein } => {
                        x_ref = SchemeSpec::Milstein.step_linear(*params, x_ref, fine_h, dw);
                    }
                    Reference::Fine(integrator) => match integrator.step(x_ref, fine_h, dw) {
                        Ok(v) => x_ref = v,
                        Err(e) => reference_failure = Some(PathFailure { kind: classify(&e), output_index: out }),
                    },
                    Reference::Exact(_) => {}
                }
                if reference_failure.is_none() && !x_ref.is_finite() {
                    reference_failure = Some(PathFailure { kind: FailureKind::Overflow, output_index: out });
                }
            }
            for (s, integrator) in self.schemes.iter().enumerate() {
                if failures[s].is_some() {
                    continue;
                }
                match integrator.step(x[s], h, dw_coarse) {
                    Ok(v) if v.is_finite() => x[s] = v,
                    Ok(_) => failures[s] = Some(PathFailure { kind: FailureKind::Overflow, output_index: out }),
                    Err(e) => failures[s] = Some(PathFailure { kind: classify(&e), output_index: out }),
                }
            }
            if (n + 1) % spec.output_stride == 0 {
                let t = (n + 1) as f64 * h;
                for s in 0..n_schemes {
                    values[s].push(if failures[s].is_some() { f64::NAN } else { x[s] });
                }
                let v = match self.reference {
                    Reference::Exact(f) => f(spec.x0, t, w),
                    _ => x_ref,
                };
                if reference_failure.is_none() && !v.is_finite() {
                    reference_failure = Some(PathFailure { kind: FailureKind::Overflow, output_index: out });
                }
                reference.push(if reference_failure.is_some() { f64::NAN } else { v });
            }
        }
        Ok(PathRecord { values, reference, failures, reference_failure })
    }
}

/// Simulates `spec.paths` paths of every scheme on a common Brownian path.
///
/// Path `i` draws its fine increments from stream `i` of the master seed and
/// the scheme increments are sums of `couple_factor` consecutive fine ones, so
/// the output depends on the seed and path count but not on the worker count.
pub fn run_ensemble(schemes: &[Integrator], reference: &Reference, spec: &EnsembleSpec) -> Result<Ensemble> {
    let steps = spec.steps()?;
    for s in schemes {
        s.check()?;
    }
    if let Reference::Fine(i) = reference {
        i.check()?;
    }
    let times = spec.output_times()?;
    let job = PathJob { schemes, reference, spec, steps, outputs: times.len() };

    let simulate = || -> Result<Vec<PathRecord>> {
        use rayon::prelude::*;
        (0..spec.paths).into_par_iter().map(|i| job.run(i)).collect()
    };
    let records = match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(simulate)?,
        None => simulate()?,
    };

    let n_out = times.len();
    let mut values = vec![vec![Vec::with_capacity(spec.paths); n_out]; schemes.len()];
    let mut reference_values = vec![Vec::with_capacity(spec.paths); n_out];
    let mut failures = vec![Vec::with_capacity(spec.paths); schemes.len()];
    let mut reference_failures = Vec::with_capacity(spec.paths);
    for rec in records {
        for (s, per_time) in rec.values.into_iter().enumerate() {
            for (j, v) in per_time.into_iter().enumerate() {
                values[s][j].push(v);
            }
            failures[s].push(rec.failures[s]);
        }
        for (j, v) in rec.reference.into_iter().enumerate() {
            reference_values[j].push(v);
        }
        reference_failures.push(rec.reference_failure);
    }

    Ok(Ensemble {
        spec: spec.clone(),
        labels: schemes.iter().map(Integrator::label).collect(),
        times,
        values,
        reference: reference_values,
        failures,
        reference_failures,
    })
}

impl Ensemble {
    pub fn scheme_count(&self) -> usize {
        self.labels.len()
    }

    /// Finite values of scheme `s` at output `j`.
    pub fn samples(&self, s: usize, j: usize) -> Vec<f64> {
        self.values[s][j].iter().copied().filter(|v| v.is_finite()).collect()
    }

    /// Finite reference values at output `j`.
    pub fn reference_samples(&self, j: usize) -> Vec<f64> {
        self.reference[j].iter().copied().filter(|v| v.is_finite()).collect()
    }

    /// Pairs `(scheme, reference)` at output `j` where both are finite.
    pub fn coupled(&self, s: usize, j: usize) -> CoupledSamples {
        let (scheme, reference) = self.values[s][j]
            .iter()
            .zip(&self.reference[j])
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (*a, *b))
            .unzip();
        CoupledSamples { scheme, reference }
    }

    /// Paths of scheme `s` that have failed by output `j`.
    pub fn failures_by(&self, s: usize, j: usize) -> usize {
        self.failures[s].iter().filter(|f| f.is_some_and(|f| f.output_index <= j)).count()
    }

    pub fn total_failures(&self, s: usize) -> usize {
        self.failures[s].iter().filter(|f| f.is_some()).count()
    }
}

/// Settings of a step-size scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub x0: f64,
    pub horizon: f64,
    pub steps: Vec<f64>,
    /// Spacing of the output times; every `h` must divide it.
    pub output_interval: f64,
    pub paths: usize,
    pub master_seed: u64,
    pub couple_factor: usize,
    pub threshold: f64,
    pub workers: Option<usize>,
}

/// Fits the growth rate of `log E|X_t - X^N_t|` over the second half of
/// `[0, T]` for every scheme and `h`. A step size is stable when no path
/// overflowed and the rate is below `threshold`. All schemes at one `h` share
/// the Brownian paths and the reference.
pub fn stability_scan(schemes: &[SchemeSpec], p: LinearSdeParams, scan: &ScanSpec) -> Result<Vec<StabilityReport>> {
    if scan.steps.is_empty() || schemes.is_empty() {
        return Err(Error::InvalidArgument("empty step grid or scheme list".into()));
    }
    let n_out = step_count(scan.horizon, scan.output_interval)?;
    if n_out < 8 {
        return Err(Error::InvalidArgument(format!("{n_out} output times; a scan needs at least 8")));
    }
    let mut reports: Vec<StabilityReport> = schemes
        .iter()
        .map(|s| StabilityReport {
            label: s.label(),
            params: p,
            threshold: scan.threshold,
            steps: scan.steps.clone(),
            rates: Vec::new(),
            stable: Vec::new(),
            failures: Vec::new(),
            paths: scan.paths,
        })
        .collect();
    let integrators: Vec<Integrator> = schemes.iter().map(|s| Integrator::linear(p, *s)).collect();
    for &h in &scan.steps {
        let spec = EnsembleSpec {
            x0: scan.x0,
            horizon: scan.horizon,
            step: h,
            output_stride: 1,
            paths: scan.paths,
            master_seed: scan.master_seed,
            couple_factor: scan.couple_factor,
            workers: scan.workers,
        }
        .with_output_interval(scan.output_interval)?;
        let ens = run_ensemble(&integrators, &Reference::linear(p), &spec)?;
        for (s, report) in reports.iter_mut().enumerate() {
            let failed = ens.total_failures(s);
            let l1: Result<Vec<f64>> = (0..ens.times.len())
                .map(|j| strong_error(&ens.coupled(s, j), Norm::L1).map(|e| e.value.max(f64::MIN_POSITIVE)))
                .collect();
            let rate = match l1 {
                Ok(l1) if failed == 0 => match growth_rate(&ens.times, &l1) {
                    Ok(fit) if fit.slope.is_finite() => fit.slope,
                    _ => StabilityReport::OVERFLOW_RATE,
                },
                _ => StabilityReport::OVERFLOW_RATE,
            };
            report.rates.push(rate);
            report.stable.push(failed == 0 && rate < scan.threshold);
            report.failures.push(failed);
        }
    }
    Ok(reports)
}
