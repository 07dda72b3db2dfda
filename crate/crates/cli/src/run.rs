use serde_json::{json, Value};

use symsde_core::experiments::{convergence_fit, error_series, run_ensemble, stability_scan, tv_distance, write_series_csv};
use symsde_core::linear_oracle::bound_report;
use symsde_core::sde_model::builtins::{
    augmented_linear_sde, augmented_symmetries, log_sinh_chart, positive_half_line, tanh_exact_solution, tanh_sde,
    tanh_symmetry,
};
use symsde_core::sde_model::{determining_residual, DerivativePolicy};
use symsde_core::{Ensemble, EnsembleSpec, Error, Integrator, MeanTarget, OneStepScheme, Reference, ScanSpec};

use crate::config::{Command, Model, RunConfig, SchemeChoice};
use crate::CliError;

/// Largest determining-equation residual accepted by `verify-symmetry`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

pub struct Outputs {
    pub csv: Vec<u8>,
    pub json: Value,
    /// Set when the run finished but its results are unusable, e.g. every
    /// path of a scheme overflowed. Outputs are still written.
    pub failure: Option<String>,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::NonIntegerSteps { .. }
            | Error::NotDivisible { .. }
            | Error::DegenerateParameters(_)
            | Error::UnknownPreset(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn run(cfg: &RunConfig) -> Result<Outputs, CliError> {
    match cfg.command.expect("resolved config has a command") {
        Command::Simulate => simulate(cfg),
        Command::Errors => errors(cfg),
        Command::Stability => stability(cfg),
        Command::Tv => tv(cfg),
        Command::Convergence => convergence(cfg),
        Command::VerifySymmetry => verify_symmetry(cfg),
        Command::Bounds => bounds(cfg),
    }
}

fn model(cfg: &RunConfig) -> Model {
    cfg.model.expect("resolved config has a model")
}

fn integrators(cfg: &RunConfig) -> Result<Vec<Integrator>, CliError> {
    let schemes = cfg.schemes.as_deref().unwrap_or_default();
    match model(cfg) {
        m @ Model::Linear { .. } => {
            let p = m.linear_params().unwrap();
            Ok(schemes.iter().map(|s| Integrator::linear(p, s.linear_spec().unwrap())).collect())
        }
        Model::Tanh { a, b } => {
            let sde = tanh_sde(a, b).with_domain(positive_half_line());
            schemes
                .iter()
                .map(|s| {
                    Ok(Integrator::Scheme(match s {
                        SchemeChoice::Euler => OneStepScheme::Euler(sde.clone()),
                        SchemeChoice::Milstein => OneStepScheme::Milstein(sde.clone()),
                        SchemeChoice::LogSinhEuler => OneStepScheme::conjugated_euler(&sde, &log_sinh_chart())?,
                        _ => return Err(CliError::Invalid("exact schemes need the linear model".into())),
                    }))
                })
                .collect()
        }
    }
}

fn reference(cfg: &RunConfig) -> Reference {
    match model(cfg) {
        m @ Model::Linear { .. } => Reference::linear(m.linear_params().unwrap()),
        Model::Tanh { a, b } => Reference::exact(move |x0, t, w| tanh_exact_solution(a, b, x0, t, w)),
    }
}

fn mean_target(cfg: &RunConfig) -> MeanTarget {
    match model(cfg).linear_params() {
        Some(params) => MeanTarget::Analytic { params, x0: cfg.x0.unwrap() },
        None => MeanTarget::ReferenceSamples,
    }
}

fn ensemble_spec(cfg: &RunConfig, step: f64) -> EnsembleSpec {
    EnsembleSpec::new(cfg.x0.unwrap(), cfg.horizon.unwrap(), step)
        .with_paths(cfg.paths.unwrap())
        .with_seed(cfg.master_seed.unwrap())
        .with_couple_factor(cfg.couple_factor.unwrap())
        .with_workers(cfg.workers)
}

/// Ensemble recorded at `output_interval` (every step when unset).
fn time_ensemble(cfg: &RunConfig) -> Result<Ensemble, CliError> {
    let mut spec = ensemble_spec(cfg, cfg.step.unwrap());
    if let Some(interval) = cfg.output_interval {
        spec = spec.with_output_interval(interval)?;
    }
    Ok(run_ensemble(&integrators(cfg)?, &reference(cfg), &spec)?)
}

/// Ensemble recorded only at the horizon.
fn terminal_ensemble(cfg: &RunConfig, step: f64) -> Result<Ensemble, CliError> {
    let n = symsde_core::noise::step_count(cfg.horizon.unwrap(), step)?;
    let spec = ensemble_spec(cfg, step).with_output_stride(n);
    Ok(run_ensemble(&integrators(cfg)?, &reference(cfg), &spec)?)
}

fn overflow_note(ens: &Ensemble) -> Option<String> {
    let paths = ens.spec.paths;
    (0..ens.scheme_count())
        .find(|&s| ens.total_failures(s) == paths)
        .map(|s| format!("all {paths} paths of {} failed at step {}", ens.labels[s], ens.spec.step))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn simulate(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let ens = time_ensemble(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "time", "mean", "stderr", "failures"])?;
    let mut rows = Vec::new();
    for s in 0..=ens.scheme_count() {
        let label = ens.labels.get(s).cloned().unwrap_or_else(|| "reference".into());
        for (j, t) in ens.times.iter().enumerate() {
            let (samples, failed) = if s < ens.scheme_count() {
                (ens.samples(s, j), ens.failures_by(s, j))
            } else {
                let r = ens.reference_samples(j);
                let failed = ens.spec.paths - r.len();
                (r, failed)
            };
            let (mean, stderr) = mean_and_stderr(&samples);
            w.write_record([label.clone(), fmt(*t), fmt(mean), fmt(stderr), failed.to_string()])?;
            rows.push(json!({"scheme": label, "time": t, "mean": mean, "stderr": stderr, "failures": failed}));
        }
    }
    Ok(Outputs { csv: finish(w)?, json: Value::Array(rows), failure: overflow_note(&ens) })
}

fn errors(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let ens = time_ensemble(cfg)?;
    if let Some(note) = overflow_note(&ens) {
        return Err(CliError::Runtime(note));
    }
    let series = (0..ens.scheme_count())
        .map(|s| error_series(&ens, s, mean_target(cfg)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Vec::new();
    write_series_csv(&series, &mut csv)?;
    Ok(Outputs { csv, json: to_json(&series)?, failure: None })
}

fn stability(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let p = model(cfg).linear_params().unwrap();
    let schemes: Vec<_> = cfg.schemes.iter().flatten().filter_map(|s| s.linear_spec()).collect();
    let scan = ScanSpec {
        x0: cfg.x0.unwrap(),
        horizon: cfg.horizon.unwrap(),
        steps: cfg.steps_to_scan(),
        output_interval: cfg.output_interval.unwrap(),
        paths: cfg.paths.unwrap(),
        master_seed: cfg.master_seed.unwrap(),
        couple_factor: cfg.couple_factor.unwrap(),
        threshold: cfg.threshold.unwrap(),
        workers: cfg.workers,
    };
    let reports = stability_scan(&schemes, p, &scan)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "step", "rate", "stable", "failures"])?;
    for r in &reports {
        for j in 0..r.steps.len() {
            w.write_record([
                r.label.clone(),
                fmt(r.steps[j]),
                fmt(r.rates[j]),
                r.stable[j].to_string(),
                r.failures[j].to_string(),
            ])?;
        }
    }
    Ok(Outputs { csv: finish(w)?, json: to_json(&reports)?, failure: None })
}

fn tv(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "step", "time", "tv"])?;
    let mut rows = Vec::new();
    let mut failure = None;
    for h in cfg.steps_to_scan() {
        let ens = terminal_ensemble(cfg, h)?;
        let last = ens.times.len() - 1;
        let reference = ens.reference_samples(last);
        for s in 0..ens.scheme_count() {
            let samples = ens.samples(s, last);
            if samples.is_empty() || reference.is_empty() {
                failure.get_or_insert(format!("no finite samples for {} at step {h}", ens.labels[s]));
                continue;
            }
            let report = tv_distance(&samples, &reference, cfg.bin_count.unwrap())?;
            w.write_record([ens.labels[s].clone(), fmt(h), fmt(ens.times[last]), fmt(report.tv)])?;
            rows.push(json!({"scheme": ens.labels[s], "step": h, "time": ens.times[last], "report": report}));
        }
    }
    Ok(Outputs { csv: finish(w)?, json: Value::Array(rows), failure })
}

fn convergence(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let steps = cfg.steps_to_scan();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scheme",
        "step",
        "weak_err",
        "weak_stderr",
        "strong_l1",
        "strong_l1_stderr",
        "strong_l2",
        "strong_l2_stderr",
        "failures",
    ])?;
    let mut by_scheme: Vec<(String, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut rows = Vec::new();
    for &h in &steps {
        let ens = terminal_ensemble(cfg, h)?;
        if let Some(note) = overflow_note(&ens) {
            return Err(CliError::Runtime(note));
        }
        for s in 0..ens.scheme_count() {
            let e = error_series(&ens, s, mean_target(cfg))?;
            let j = e.times.len() - 1;
            w.write_record([
                e.label.clone(),
                fmt(h),
                fmt(e.weak_err[j]),
                fmt(e.weak_stderr[j]),
                fmt(e.strong_l1[j]),
                fmt(e.strong_l1_stderr[j]),
                fmt(e.strong_l2[j]),
                fmt(e.strong_l2_stderr[j]),
                e.failures[j].to_string(),
            ])?;
            if by_scheme.len() <= s {
                by_scheme.push((e.label.clone(), Vec::new(), Vec::new(), Vec::new()));
            }
            by_scheme[s].1.push(e.weak_err[j]);
            by_scheme[s].2.push(e.strong_l1[j]);
            by_scheme[s].3.push(e.strong_l2[j]);
            rows.push(e);
        }
    }
    let slope = |errs: &[f64]| convergence_fit(&steps, errs).ok().map(|f| f.slope);
    let slopes: Vec<Value> = by_scheme
        .iter()
        .map(|(label, weak, l1, l2)| {
            json!({"scheme": label, "weak": slope(weak), "strong_l1": slope(l1), "strong_l2": slope(l2)})
        })
        .collect();
    Ok(Outputs { csv: finish(w)?, json: json!({"rows": rows, "slopes": slopes}), failure: None })
}

fn verify_symmetry(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["field", "point", "drift_residual", "diffusion_residual"])?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut record = |field: &str, x: &[f64], r: symsde_core::sde_model::DeterminingResidual| -> Result<(), CliError> {
        let drift = r.drift.amax();
        let diffusion = r.diffusion.amax();
        worst = worst.max(drift).max(diffusion);
        let point = x.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";");
        w.write_record([field.to_string(), point, fmt(drift), fmt(diffusion)])?;
        rows.push(json!({"field": field, "point": x, "drift_residual": drift, "diffusion_residual": diffusion}));
        Ok(())
    };
    match model(cfg) {
        Model::Tanh { a, b } => {
            let sde = tanh_sde(a, b).with_domain(positive_half_line());
            let y = tanh_symmetry();
            for i in 0..100 {
                let x = [0.1 + 2.9 * i as f64 / 99.0];
                record("tanh(x) d/dx", &x, determining_residual(&sde, &y, &x, DerivativePolicy::AnalyticOnly)?)?;
            }
        }
        m @ Model::Linear { .. } => {
            let sde = augmented_linear_sde(m.linear_params().unwrap());
            let fields = augmented_symmetries();
            for i in 0..10 {
                for j in 0..10 {
                    let x = [-10.0 + 20.0 * i as f64 / 9.0, 0.1 + 9.9 * j as f64 / 9.0];
                    for (name, y) in ["z d/dx", "z d/dz"].iter().zip(&fields) {
                        record(name, &x, determining_residual(&sde, y, &x, DerivativePolicy::AnalyticOnly)?)?;
                    }
                }
            }
        }
    }
    let failure = (worst >= SYMMETRY_TOLERANCE)
        .then(|| format!("max residual {worst:e} exceeds the tolerance {SYMMETRY_TOLERANCE:e}"));
    let json = json!({"tolerance": SYMMETRY_TOLERANCE, "max_residual": worst, "rows": rows});
    Ok(Outputs { csv: finish(w)?, json, failure })
}

fn bounds(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let p = model(cfg).linear_params().unwrap();
    let report = bound_report(cfg.horizon.unwrap(), cfg.step.unwrap(), p)?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    let class = |c: symsde_core::linear_oracle::GrowthClass| format!("{c:?}").to_lowercase();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "value"])?;
    let mut rows = vec![
        ("horizon".to_string(), fmt(report.horizon)),
        ("step".into(), fmt(report.step)),
        ("alpha".into(), opt(report.alpha)),
        ("n".into(), report.n.map(|n| n.to_string()).unwrap_or_default()),
        ("g1".into(), fmt(report.g1)),
        ("g2".into(), fmt(report.g2)),
        ("g4".into(), opt(report.g4)),
        ("g1_growth".into(), class(report.g1_growth)),
        ("g2_growth".into(), class(report.g2_growth)),
        ("g4_growth".into(), report.g4_growth.map(class).unwrap_or_default()),
    ];
    rows.extend(report.appendix.iter().enumerate().map(|(i, v)| (format!("m{}", i + 1), opt(*v))));
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    Ok(Outputs { csv: finish(w)?, json: to_json(&report)?, failure: None })
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}
