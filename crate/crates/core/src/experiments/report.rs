use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linear_oracle::mean_curve;
use crate::schemes::LinearSdeParams;

use super::stats::{strong_error, weak_error_against, Norm};
use super::Ensemble;

/// Shortest decimal string that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

const SERIES_HEADER: [&str; 8] = [
    "time",
    "weak_err",
    "weak_stderr",
    "strong_l1",
    "strong_l1_stderr",
    "strong_l2",
    "strong_l2_stderr",
    "failures",
];

/// What the sample mean is compared against for the weak error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanTarget {
    /// The exact mean of the linear model.
    Analytic { params: LinearSdeParams, x0: f64 },
    /// The sample mean of the coupled reference.
    ReferenceSamples,
}

/// Weak and strong errors of one scheme at the output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub label: String,
    pub params: Option<LinearSdeParams>,
    pub step: f64,
    pub paths: usize,
    pub times: Vec<f64>,
    pub weak_err: Vec<f64>,
    pub weak_stderr: Vec<f64>,
    pub strong_l1: Vec<f64>,
    pub strong_l1_stderr: Vec<f64>,
    pub strong_l2: Vec<f64>,
    pub strong_l2_stderr: Vec<f64>,
    /// Paths lost by each output time; they are left out of the averages.
    pub failures: Vec<usize>,
}

/// Errors of scheme `s` of `ens` at every output time.
pub fn error_series(ens: &Ensemble, s: usize, target: MeanTarget) -> Result<ErrorSeries> {
    let mut series = ErrorSeries {
        label: ens.labels[s].clone(),
        params: match target {
            MeanTarget::Analytic { params, .. } => Some(params),
            MeanTarget::ReferenceSamples => None,
        },
        step: ens.spec.step,
        paths: ens.spec.paths,
        times: ens.times.clone(),
        weak_err: Vec::new(),
        weak_stderr: Vec::new(),
        strong_l1: Vec::new(),
        strong_l1_stderr: Vec::new(),
        strong_l2: Vec::new(),
        strong_l2_stderr: Vec::new(),
        failures: Vec::new(),
    };
    for (j, &t) in ens.times.iter().enumerate() {
        let mean = match target {
            MeanTarget::Analytic { params, x0 } => mean_curve(params, x0, t),
            MeanTarget::ReferenceSamples => {
                let r = ens.reference_samples(j);
                r.iter().sum::<f64>() / r.len() as f64
            }
        };
        let weak = weak_error_against(&ens.samples(s, j), mean)?;
        let coupled = ens.coupled(s, j);
        let l1 = strong_error(&coupled, Norm::L1)?;
        let l2 = strong_error(&coupled, Norm::L2)?;
        series.weak_err.push(weak.value);
        series.weak_stderr.push(weak.stderr);
        series.strong_l1.push(l1.value);
        series.strong_l1_stderr.push(l1.stderr);
        series.strong_l2.push(l2.value);
        series.strong_l2_stderr.push(l2.stderr);
        series.failures.push(ens.failures_by(s, j));
    }
    Ok(series)
}

impl ErrorSeries {
    fn row(&self, j: usize) -> Vec<String> {
        vec![
            fmt_f64(self.times[j]),
            fmt_f64(self.weak_err[j]),
            fmt_f64(self.weak_stderr[j]),
            fmt_f64(self.strong_l1[j]),
            fmt_f64(self.strong_l1_stderr[j]),
            fmt_f64(self.strong_l2[j]),
            fmt_f64(self.strong_l2_stderr[j]),
            self.failures[j].to_string(),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SERIES_HEADER)?;
        for j in 0..self.times.len() {
            out.write_record(self.row(j))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Several series in one table, with leading `scheme` and `step` columns.
pub fn write_series_csv<W: Write>(series: &[ErrorSeries], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["scheme", "step"];
    header.extend(SERIES_HEADER);
    out.write_record(header)?;
    for s in series {
        for j in 0..s.times.len() {
            let mut row = vec![s.label.clone(), fmt_f64(s.step)];
            row.extend(s.row(j));
            out.write_record(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Growth rate of the strong error per step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub label: String,
    pub params: LinearSdeParams,
    pub threshold: f64,
    pub paths: usize,
    pub steps: Vec<f64>,
    /// Fitted slope of `log E|X_t - X^N_t|` in `t`, or [`Self::OVERFLOW_RATE`].
    pub rates: Vec<f64>,
    pub stable: Vec<bool>,
    /// Paths that overflowed or left the chart.
    pub failures: Vec<usize>,
}

impl StabilityReport {
    /// Rate reported when a path overflowed or no fit was possible.
    pub const OVERFLOW_RATE: f64 = f64::MAX;

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scheme", "step", "rate", "stable", "failures"])?;
        for j in 0..self.steps.len() {
            out.write_record([
                self.label.clone(),
                fmt_f64(self.steps[j]),
                fmt_f64(self.rates[j]),
                self.stable[j].to_string(),
                self.failures[j].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Binned total-variation distance of two samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub bin_count: usize,
    /// Pooled `[min, max]` of both samples.
    pub range: (f64, f64),
    pub tv: f64,
    pub mass_a: Vec<f64>,
    pub mass_b: Vec<f64>,
}

impl TvReport {
    pub fn bin_edges(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        (0..=self.bin_count)
            .map(|i| lo + (hi - lo) * i as f64 / self.bin_count as f64)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "mass_a", "mass_b"])?;
        let edges = self.bin_edges();
        for i in 0..self.bin_count {
            out.write_record([
                fmt_f64(edges[i]),
                fmt_f64(edges[i + 1]),
                fmt_f64(self.mass_a[i]),
                fmt_f64(self.mass_b[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
