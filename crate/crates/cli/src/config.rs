use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use symsde_core::experiments::{FigureKind, DEFAULT_STABILITY_THRESHOLD};
use symsde_core::{figure_preset, LinearSdeParams, SchemeSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Errors,
    Stability,
    Tv,
    Convergence,
    VerifySymmetry,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Model {
    Linear { a: f64, b: f64, c: f64, d: f64 },
    /// `dX = (a tanh X - b^2/2 tanh^3 X) dt + b tanh X dW` on `x > 0`.
    Tanh { a: f64, b: f64 },
}

impl Model {
    pub fn linear_params(&self) -> Option<LinearSdeParams> {
        match *self {
            Model::Linear { a, b, c, d } => Some(LinearSdeParams::new(a, b, c, d)),
            Model::Tanh { .. } => None,
        }
    }

    fn numbers(&self) -> Vec<f64> {
        match *self {
            Model::Linear { a, b, c, d } => vec![a, b, c, d],
            Model::Tanh { a, b } => vec![a, b],
        }
    }
}

/// Schemes accepted in a config. The exact schemes need the linear model;
/// `log_sinh_euler` (Euler in the chart `log sinh x`) needs the tanh model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeChoice {
    Euler,
    Milstein,
    ExactEuler { k: f64 },
    ExactMilstein { k: f64 },
    LogSinhEuler,
}

impl From<SchemeSpec> for SchemeChoice {
    fn from(s: SchemeSpec) -> Self {
        match s {
            SchemeSpec::Euler => SchemeChoice::Euler,
            SchemeSpec::Milstein => SchemeChoice::Milstein,
            SchemeSpec::ExactEuler { k } => SchemeChoice::ExactEuler { k },
            SchemeSpec::ExactMilstein { k } => SchemeChoice::ExactMilstein { k },
        }
    }
}

impl SchemeChoice {
    pub fn linear_spec(&self) -> Option<SchemeSpec> {
        match *self {
            SchemeChoice::Euler => Some(SchemeSpec::Euler),
            SchemeChoice::Milstein => Some(SchemeSpec::Milstein),
            SchemeChoice::ExactEuler { k } => Some(SchemeSpec::ExactEuler { k }),
            SchemeChoice::ExactMilstein { k } => Some(SchemeSpec::ExactMilstein { k }),
            SchemeChoice::LogSinhEuler => None,
        }
    }
}

/// One run. Every field is optional so that a preset, the config file and
/// the command-line flags can be layered; [`RunConfig::resolve`] fills in
/// whatever is left.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<SchemeChoice>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Number of steps over the horizon; alternative to `step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_interval: Option<f64>,
    /// Step sizes swept by `stability`, `convergence` and `tv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple_factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Output prefix; `PREFIX.csv`, `PREFIX.json` and `PREFIX.manifest.json` are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

pub const DEFAULT_OUT: &str = "symsde";

macro_rules! layer {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Reads a config document. A run manifest is accepted too: its `config`
    /// entry is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        if value.get("versions").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: &RunConfig) -> Self {
        layer!(
            self, over, command, preset, model, x0, schemes, horizon, step, steps, output_interval, step_grid, paths,
            master_seed, couple_factor, workers, bin_count, threshold, out
        );
        self
    }

    /// Expands the preset (if any) underneath the explicit fields, fills
    /// defaults and validates. The result has every field the command uses.
    pub fn resolve(self) -> Result<Self, CliError> {
        let mut base = RunConfig::default();
        if let Some(name) = &self.preset {
            let p = figure_preset(name).map_err(|e| CliError::Invalid(e.to_string()))?;
            base.command = Some(match p.kind {
                FigureKind::ErrorsOverTime => Command::Errors,
                FigureKind::ErrorsOverSteps => Command::Convergence,
                FigureKind::TvOverSteps => Command::Tv,
            });
            let LinearSdeParams { a, b, c, d } = p.params;
            base.model = Some(Model::Linear { a, b, c, d });
            base.x0 = Some(p.x0);
            base.schemes = Some(p.schemes.iter().map(|s| SchemeChoice::from(*s)).collect());
            base.horizon = Some(p.horizon);
            base.step = p.step;
            base.output_interval = p.output_interval;
            if !p.step_counts.is_empty() {
                base.step_grid = Some(p.step_counts.iter().map(|n| p.horizon / *n as f64).collect());
            }
            base.paths = Some(p.paths);
            base.master_seed = Some(p.master_seed);
            base.couple_factor = Some(p.couple_factor);
            base.bin_count = Some(p.bin_count);
        }
        let mut cfg = base.overlay(&self);
        if cfg.steps.is_some() && self.step.is_some() {
            return Err(CliError::Invalid("give either step or steps, not both".into()));
        }
        if let (Some(n), Some(t)) = (cfg.steps, cfg.horizon) {
            if n == 0 {
                return Err(CliError::Invalid("steps must be positive".into()));
            }
            cfg.step = Some(t / n as f64);
            cfg.steps = None;
        }
        cfg.paths.get_or_insert(symsde_core::experiments::DEFAULT_PATHS);
        cfg.master_seed.get_or_insert(symsde_core::experiments::DEFAULT_SEED);
        cfg.couple_factor.get_or_insert(symsde_core::experiments::DEFAULT_COUPLE_FACTOR);
        cfg.bin_count.get_or_insert(symsde_core::experiments::DEFAULT_TV_BINS);
        cfg.threshold.get_or_insert(DEFAULT_STABILITY_THRESHOLD);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Invalid(m));
        let command = match self.command {
            Some(c) => c,
            None => return invalid("no command given (set `command` or use a preset)".into()),
        };
        if self.model.is_none() {
            return invalid("no model given".into());
        }
        let mut numbers: Vec<(&str, f64)> = Vec::new();
        for (name, v) in [
            ("x0", self.x0),
            ("horizon", self.horizon),
            ("step", self.step),
            ("output_interval", self.output_interval),
            ("threshold", self.threshold),
        ] {
            if let Some(v) = v {
                numbers.push((name, v));
            }
        }
        numbers.extend(self.model.iter().flat_map(|m| m.numbers()).map(|v| ("model parameter", v)));
        numbers.extend(self.step_grid.iter().flatten().map(|v| ("step_grid entry", *v)));
        for s in self.schemes.iter().flatten() {
            if let SchemeChoice::ExactEuler { k } | SchemeChoice::ExactMilstein { k } = s {
                numbers.push(("scheme k", *k));
            }
        }
        if let Some((name, v)) = numbers.iter().find(|(_, v)| !v.is_finite()) {
            return invalid(format!("{name} must be finite, got {v}"));
        }
        if self.paths == Some(0) {
            return invalid("paths must be at least 1".into());
        }
        if self.couple_factor == Some(0) {
            return invalid("couple_factor must be at least 1".into());
        }
        if self.bin_count == Some(0) {
            return invalid("bin_count must be at least 1".into());
        }
        if self.workers == Some(0) {
            return invalid("workers must be at least 1".into());
        }
        if self.out.as_deref() == Some("") {
            return invalid("out must not be empty".into());
        }
        for v in self.step.iter().chain(self.horizon.iter()).chain(self.step_grid.iter().flatten()) {
            if *v <= 0.0 {
                return invalid(format!("step sizes and horizon must be positive, got {v}"));
            }
        }
        let linear = self.model.and_then(|m| m.linear_params()).is_some();
        for s in self.schemes.iter().flatten() {
            match s {
                SchemeChoice::ExactEuler { .. } | SchemeChoice::ExactMilstein { .. } if !linear => {
                    return invalid("exact schemes need the linear model".into())
                }
                SchemeChoice::LogSinhEuler if linear => return invalid("log_sinh_euler needs the tanh model".into()),
                _ => {}
            }
        }
        if let Some(Model::Tanh { .. }) = self.model {
            if matches!(self.x0, Some(x0) if x0 <= 0.0) {
                return invalid("the tanh model lives on x > 0".into());
            }
        }
        let needs = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(CliError::Invalid(format!("{command:?} needs `{field}`").to_lowercase()))
            }
        };
        match command {
            Command::Simulate | Command::Errors => {
                needs("x0", self.x0.is_some())?;
                needs("schemes", self.schemes.as_ref().is_some_and(|s| !s.is_empty()))?;
                needs("horizon", self.horizon.is_some())?;
                needs("step", self.step.is_some())?;
            }
            Command::Stability | Command::Convergence | Command::Tv => {
                needs("x0", self.x0.is_some())?;
                needs("schemes", self.schemes.as_ref().is_some_and(|s| !s.is_empty()))?;
                needs("horizon", self.horizon.is_some())?;
                needs("step or step_grid", self.step.is_some() || self.step_grid.is_some())?;
                if command == Command::Stability {
                    needs("linear model", linear)?;
                    needs("output_interval", self.output_interval.is_some())?;
                }
                if command == Command::Convergence && self.step_grid.as_ref().map_or(0, Vec::len) < 3 {
                    return invalid("convergence needs a step_grid of at least 3 sizes".into());
                }
            }
            Command::Bounds => {
                needs("linear model", linear)?;
                needs("horizon", self.horizon.is_some())?;
                needs("step", self.step.is_some())?;
            }
            Command::VerifySymmetry => {}
        }
        Ok(())
    }

    pub fn out_prefix(&self) -> &str {
        self.out.as_deref().unwrap_or(DEFAULT_OUT)
    }

    /// `step_grid` when given, else the single `step`.
    pub fn steps_to_scan(&self) -> Vec<f64> {
        self.step_grid.clone().unwrap_or_else(|| self.step.into_iter().collect())
    }
}
