use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{LinearSdeParams, SchemeSpec};

use super::{
    EnsembleSpec, Integrator, DEFAULT_COUPLE_FACTOR, DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_TV_BINS, DEFAULT_X0,
};

pub const PRESET_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    /// Errors at a fixed step over a time grid.
    ErrorsOverTime,
    /// Errors at the horizon over a grid of step counts.
    ErrorsOverSteps,
    /// Total-variation distance to the reference over a grid of step counts.
    TvOverSteps,
}

/// Settings of one benchmark experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePreset {
    pub name: String,
    pub kind: FigureKind,
    pub params: LinearSdeParams,
    pub x0: f64,
    pub schemes: Vec<SchemeSpec>,
    pub horizon: f64,
    /// Scheme step for [`FigureKind::ErrorsOverTime`].
    pub step: Option<f64>,
    pub output_interval: Option<f64>,
    /// Step counts over `[0, horizon]` for the sweep kinds.
    pub step_counts: Vec<usize>,
    pub paths: usize,
    pub couple_factor: usize,
    pub master_seed: u64,
    pub bin_count: usize,
}

/// Benchmark `a = -2, b = c = d = 10` with Euler, Milstein and the exact
/// scheme at `k = 0` and `k = -d/c = -1`.
pub fn figure_preset(name: &str) -> Result<FigurePreset> {
    let params = LinearSdeParams::benchmark();
    let mut preset = FigurePreset {
        name: name.to_string(),
        kind: FigureKind::ErrorsOverTime,
        params,
        x0: DEFAULT_X0,
        schemes: vec![
            SchemeSpec::Euler,
            SchemeSpec::Milstein,
            SchemeSpec::ExactEuler { k: 0.0 },
            SchemeSpec::ExactEuler { k: -1.0 },
        ],
        horizon: 1.0,
        step: None,
        output_interval: Some(0.1),
        step_counts: Vec::new(),
        paths: DEFAULT_PATHS,
        couple_factor: DEFAULT_COUPLE_FACTOR,
        master_seed: DEFAULT_SEED,
        bin_count: DEFAULT_TV_BINS,
    };
    match name {
        "fig1" => preset.step = Some(0.025),
        "fig2" => preset.step = Some(0.01),
        "fig3" | "fig4" => {
            preset.kind = if name == "fig3" { FigureKind::ErrorsOverSteps } else { FigureKind::TvOverSteps };
            preset.horizon = 0.5;
            preset.output_interval = None;
            preset.step_counts = (1..=8).map(|i| 10 * i).collect();
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    }
    Ok(preset)
}

impl FigurePreset {
    pub fn integrators(&self) -> Vec<Integrator> {
        self.schemes.iter().map(|s| Integrator::linear(self.params, *s)).collect()
    }

    fn base_spec(&self, step: f64) -> EnsembleSpec {
        EnsembleSpec::new(self.x0, self.horizon, step)
            .with_paths(self.paths)
            .with_seed(self.master_seed)
            .with_couple_factor(self.couple_factor)
    }

    /// Ensemble of an [`FigureKind::ErrorsOverTime`] preset.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let step = self
            .step
            .ok_or_else(|| Error::InvalidArgument(format!("preset {} sweeps step counts", self.name)))?;
        let interval = self.output_interval.unwrap_or(self.horizon);
        self.base_spec(step).with_output_interval(interval)
    }

    /// Ensemble with `steps` steps over the horizon, recording only the horizon.
    pub fn ensemble_spec_for_steps(&self, steps: usize) -> Result<EnsembleSpec> {
        if steps == 0 {
            return Err(Error::InvalidArgument("step count must be positive".into()));
        }
        Ok(self.base_spec(self.horizon / steps as f64).with_output_stride(steps))
    }
}
