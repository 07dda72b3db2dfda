//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use symsde_core::experiments::{
    convergence_fit, error_series, figure_preset, growth_rate, run_ensemble, stability_scan, tv_distance,
    write_series_csv, EnsembleSpec, Integrator, MeanTarget, Reference, ScanSpec, DEFAULT_SEED,
    DEFAULT_STABILITY_THRESHOLD, DEFAULT_TV_BINS,
};
use symsde_core::linear_oracle::{
    appendix_envelope, appendix_m, bound_g, growth_class, BoundKind, GrowthClass,
};
use symsde_core::noise::standard_normal;
use symsde_core::schemes::{
    exact_euler_linear_step, exact_milstein_linear_step, invariance_residual, LinearSdeParams, OneStepScheme,
    SchemeSpec,
};
use symsde_core::sde_model::builtins::*;
use symsde_core::sde_model::{determining_residual, ito_transform, DerivativePolicy};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_params(rng: &mut ChaCha20Rng, scale: f64) -> LinearSdeParams {
    let mut draw = || rng.gen_range(-scale..scale);
    LinearSdeParams::new(draw(), draw(), draw(), draw())
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn scheme_coincidence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut p = random_params(&mut rng, 10.0);
        while p.c.abs() < 1e-3 {
            p.c = rng.gen_range(-10.0..10.0);
        }
        let k = p.coincidence_k().unwrap();
        let x = rng.gen_range(-10.0..10.0);
        let dt = rng.gen_range(1e-4..0.1);
        let dw = standard_normal(&mut rng) * f64::sqrt(dt);
        let e = exact_euler_linear_step(p, k, x, dt, dw);
        let m = exact_milstein_linear_step(p, k, x, dt, dw);
        worst = worst.max((e - m).abs() / e.abs().max(m.abs()));
    }
    check(worst <= 1e-14, format!("max relative difference {worst:.3e} over 1e4 draws (tol 1e-14)"))
}

fn convergence_orders() -> Outcome {
    let (lambda, s, x0) = (1.0, 1.0, 1.0);
    let gbm = geometric_brownian_motion(lambda, s);
    let schemes = [Integrator::Scheme(OneStepScheme::Euler(gbm.clone())), Integrator::Scheme(OneStepScheme::Milstein(gbm))];
    let reference = Reference::exact(move |x0, t, w| gbm_exact_solution(lambda, s, x0, t, w));
    let steps: Vec<f64> = (4..=9).map(|i| 2f64.powi(-i)).collect();
    let mut errors = vec![Vec::new(), Vec::new()];
    for &h in &steps {
        let spec = EnsembleSpec::new(x0, 1.0, h)
            .with_paths(10_000)
            .with_couple_factor(1)
            .with_output_stride((1.0 / h).round() as usize);
        let ens = run_ensemble(&schemes, &reference, &spec).map_err(|e| e.to_string())?;
        for (i, errs) in errors.iter_mut().enumerate() {
            errs.push(error_series(&ens, i, MeanTarget::Analytic { params: LinearSdeParams::new(lambda, 0.0, s, 0.0), x0 })
                .map_err(|e| e.to_string())?
                .strong_l2[0]);
        }
    }
    let euler = convergence_fit(&steps, &errors[0]).map_err(|e| e.to_string())?.slope;
    let milstein = convergence_fit(&steps, &errors[1]).map_err(|e| e.to_string())?.slope;
    check(
        (0.35..=0.65).contains(&euler) && (0.85..=1.15).contains(&milstein),
        format!("L2 slopes: euler {euler:.3} (want [0.35, 0.65]), milstein {milstein:.3} (want [0.85, 1.15])"),
    )
}

fn figure1_growth() -> Outcome {
    let preset = figure_preset("fig1").map_err(|e| e.to_string())?;
    let spec = preset.ensemble_spec().map_err(|e| e.to_string())?;
    let ens = run_ensemble(&preset.integrators(), &Reference::linear(preset.params), &spec).map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    for s in 0..ens.scheme_count() {
        let series = error_series(&ens, s, MeanTarget::Analytic { params: preset.params, x0: preset.x0 })
            .map_err(|e| e.to_string())?;
        let rate = growth_rate(&series.times, &series.strong_l1).map_err(|e| e.to_string())?.slope;
        rates.push((series.label, rate, ens.total_failures(s)));
    }
    let ok = rates[0].1 > 2.0 && rates[1].1 > 2.0 && rates[2].1 < 0.5 && rates[3].1 < 0.5;
    let detail = rates
        .iter()
        .map(|(l, r, f)| format!("{l} {r:.3} ({f} failed)"))
        .collect::<Vec<_>>()
        .join(", ");
    check(ok, format!("growth rates over t in [0.5, 1]: {detail}; want euler, milstein > 2, exact < 0.5"))
}

fn stability_boundary() -> Outcome {
    let p = LinearSdeParams::benchmark();
    let scan = ScanSpec {
        x0: 5.0,
        horizon: 1.0,
        steps: vec![0.00625, 0.01, 0.0125, 0.025, 0.05],
        output_interval: 0.1,
        paths: 100_000,
        master_seed: DEFAULT_SEED,
        couple_factor: 64,
        threshold: DEFAULT_STABILITY_THRESHOLD,
        workers: None,
    };
    let schemes = [SchemeSpec::Milstein, SchemeSpec::ExactEuler { k: 0.0 }, SchemeSpec::ExactEuler { k: -1.0 }];
    let reports = stability_scan(&schemes, p, &scan).map_err(|e| e.to_string())?;
    let at = |r: usize, h: f64| {
        let i = scan.steps.iter().position(|s| *s == h).unwrap();
        (reports[r].rates[i], reports[r].stable[i], reports[r].failures[i])
    };
    let (m_fine, m_fine_stable, _) = at(0, 0.01);
    let (m_coarse, _, m_coarse_failed) = at(0, 0.025);
    let mut ok = m_fine_stable && (m_coarse > 2.0 || m_coarse_failed > 0);
    let mut detail = format!("milstein rate {m_fine:.3} at h=0.01, {m_coarse:.3} at h=0.025 ({m_coarse_failed} overflowed)");
    for r in 1..3 {
        let rates: Vec<String> = [0.00625, 0.0125, 0.025, 0.05]
            .iter()
            .map(|&h| {
                let (rate, stable, _) = at(r, h);
                ok &= stable;
                format!("{rate:.3}")
            })
            .collect();
        detail += &format!("; {} rates {}", reports[r].label, rates.join("/"));
    }
    check(ok, detail)
}

fn symmetry_verification() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_params(&mut rng, 10.0);
        let sde = augmented_linear_sde(p);
        let x = [rng.gen_range(-10.0..10.0), rng.gen_range(0.1..10.0)];
        for y in augmented_symmetries() {
            let r = determining_residual(&sde, &y, &x, DerivativePolicy::AnalyticOnly).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_abs());
        }
    }
    check(worst < 1e-10, format!("max |residual| {worst:.3e} at 100 points (tol 1e-10)"))
}

fn transform_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let p = if i % 2 == 0 { LinearSdeParams::benchmark() } else { random_params(&mut rng, 10.0) };
        for k in [0.0, -1.0] {
            let chart = adapted_chart(k);
            let image = ito_transform(&augmented_linear_sde(p), &chart).map_err(|e| e.to_string())?;
            let closed = adapted_linear_sde(p, k);
            let x = [rng.gen_range(-10.0..10.0), rng.gen_range(0.1..10.0)];
            let y = chart.forward(&x).map_err(|e| e.to_string())?;
            let y = y.as_slice();
            let (d1, d2) = (image.drift(y).unwrap(), closed.drift(y).unwrap());
            let (s1, s2) = (image.diffusion(y).unwrap(), closed.diffusion(y).unwrap());
            worst = worst.max((d1 - &d2).amax() / d2.amax());
            worst = worst.max((s1 - &s2).amax() / s2.amax());
        }
    }
    check(worst <= 1e-9, format!("max relative coefficient error {worst:.3e} at 100 points, k in {{0, -1}} (tol 1e-9)"))
}

fn invariance() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let p = random_params(&mut rng, 5.0);
        let k = if i % 2 == 0 { 0.0 } else { -1.0 };
        let euler = OneStepScheme::Euler(adapted_linear_sde(p, k));
        let y: [f64; 2] = [rng.gen_range(-10.0..10.0), rng.gen_range(-2.3..2.3)];
        let dt = rng.gen_range(1e-4..0.1);
        let dw = [standard_normal(&mut rng) * f64::sqrt(dt)];
        let s = rng.gen_range(-1.0..1.0);
        let scale = 1.0 + (y[0] * y[0] + y[1] * y[1]).sqrt();
        for flow in [adapted_translation_flow(s), adapted_scaling_flow(s)] {
            let r = invariance_residual(&euler, &flow, &y, dt, &dw, None).map_err(|e| e.to_string())?;
            worst = worst.max(r.amax() / scale);
        }
    }
    check(worst < 1e-9, format!("max |residual| / (|x| + 1) {worst:.3e} over 1e3 draws (tol 1e-9)"))
}

fn tanh_exactness() -> Outcome {
    let (a, b, x0) = (1.0, 1.0, 1.0);
    let sde = tanh_sde(a, b).with_domain(positive_half_line());
    let chart = log_sinh_chart();
    let image = ito_transform(&sde, &chart).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..=100 {
        let x = 0.1 + 2.9 * i as f64 / 100.0;
        let y = chart.forward(&[x]).map_err(|e| e.to_string())?;
        let mu = image.drift(y.as_slice()).map_err(|e| e.to_string())?[0];
        let sigma = image.diffusion(y.as_slice()).map_err(|e| e.to_string())?[(0, 0)];
        worst = worst.max((mu - (a - 0.5 * b * b)).abs()).max((sigma - b).abs());
    }
    let scheme = OneStepScheme::conjugated_euler(&sde, &chart).map_err(|e| e.to_string())?;
    let reference = Reference::exact(move |x0, t, w| tanh_exact_solution(a, b, x0, t, w));
    let spec = EnsembleSpec::new(x0, 1.0, 0.05).with_output_interval(0.25).map_err(|e| e.to_string())?;
    let ens = run_ensemble(&[Integrator::Scheme(scheme)], &reference, &spec).map_err(|e| e.to_string())?;
    let series = error_series(&ens, 0, MeanTarget::ReferenceSamples).map_err(|e| e.to_string())?;
    let mut ratio = 0.0f64;
    let mut pathwise = 0.0f64;
    for j in 0..series.times.len() {
        ratio = ratio.max(series.strong_l1[j] / series.weak_stderr[j]);
        let c = ens.coupled(0, j);
        pathwise = pathwise.max(max_abs(c.scheme.iter().zip(&c.reference).map(|(s, r)| (s - r) / r)));
    }
    let failed = ens.total_failures(0);
    check(
        worst < 1e-9 && ratio < 3.0 && failed == 0,
        format!(
            "coefficients constant to {worst:.3e}; strong L1 / MC stderr max {ratio:.3e} (tol 3); \
             max pathwise relative gap {pathwise:.3e}; {failed} failed paths"
        ),
    )
}

fn appendix_oracle() -> Outcome {
    let p = LinearSdeParams::new(-2.0, 0.0, 1.0, 0.0);
    let mut worst = 0.0f64;
    let mut envelopes = true;
    for h in [0.01, 0.05, 0.1] {
        let m1 = appendix_m(1, h, p).map_err(|e| e.to_string())?;
        let m3 = appendix_m(3, h, p).map_err(|e| e.to_string())?;
        worst = worst.max(((m1 - common::m1_oracle(h, p)) / m1).abs());
        worst = worst.max(((m3 - common::m3_oracle(h, p)) / m3).abs());
        let m2 = appendix_envelope(2, h, p).map_err(|e| e.to_string())?;
        let m9 = appendix_m(9, h, p).map_err(|e| e.to_string())?;
        let m10 = appendix_envelope(10, h, p).map_err(|e| e.to_string())?;
        envelopes &= m1.abs() <= m2 * h * h && m9.abs() <= m10 * h.powi(4);
    }
    check(
        worst <= 1e-6 && envelopes,
        format!("max relative oracle gap {worst:.3e} (tol 1e-6); envelope inequalities hold: {envelopes}"),
    )
}

fn bound_shapes() -> Outcome {
    let ts = [1.0, 10.0, 100.0];
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, c) in [(-2.0, 1.0), (-2.0, 2.0), (-2.0, 10.0)] {
        let p = LinearSdeParams::new(a, 0.0, c, 0.0);
        let g: Vec<f64> = ts.iter().map(|&t| bound_g(BoundKind::G1, t, p, None).unwrap()).collect();
        let r = a + 0.5 * c * c;
        // bounded: saturates below 1/|r| between T=10 and T=100; otherwise G1(T) >= T without bound
        let bounded = g[0] < g[1] && g[1] <= g[2] && g[2] < 2.0 * g[1] && g[2] <= 1.0 / r.abs();
        let unbounded = g.iter().zip(&ts).all(|(g, t)| *g >= *t) && g[2] / g[1] >= g[1] / g[0] * (1.0 - 1e-12);
        let class = growth_class(BoundKind::G1, p, None).unwrap();
        let expected = if r < 0.0 {
            bounded && class == GrowthClass::Bounded
        } else if r == 0.0 {
            unbounded && g == ts && class == GrowthClass::Linear
        } else {
            unbounded && class == GrowthClass::Exponential
        };
        ok &= expected && (bounded == (r < 0.0));
        detail.push(format!("(a,c)=({a},{c}) {class:?}"));
    }
    check(ok, detail.join(", "))
}

fn determinism() -> Outcome {
    let mut preset = figure_preset("fig1").map_err(|e| e.to_string())?;
    preset.paths = 2000;
    let run = |workers: usize| -> Result<Vec<u8>, String> {
        let spec = preset.ensemble_spec().map_err(|e| e.to_string())?.with_workers(Some(workers));
        let ens = run_ensemble(&preset.integrators(), &Reference::linear(preset.params), &spec).map_err(|e| e.to_string())?;
        let series: Vec<_> = (0..ens.scheme_count())
            .map(|s| error_series(&ens, s, MeanTarget::Analytic { params: preset.params, x0: preset.x0 }))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        write_series_csv(&series, &mut out).map_err(|e| e.to_string())?;
        let last = ens.times.len() - 1;
        tv_distance(&ens.samples(0, last), &ens.reference_samples(last), DEFAULT_TV_BINS)
            .map_err(|e| e.to_string())?
            .write_csv(&mut out)
            .map_err(|e| e.to_string())?;
        Ok(out)
    };
    let (one, four, again) = (run(1)?, run(4)?, run(1)?);
    check(
        one == four && one == again,
        format!("fig1 (P=2000) errors + TV CSV, {} bytes, identical for workers 1, 4 and a repeat: {}", one.len(), one == four && one == again),
    )
}

fn tv_ordering() -> Outcome {
    let p = LinearSdeParams::benchmark();
    let spec = EnsembleSpec::new(5.0, 0.5, 0.05).with_output_stride(10);
    let schemes = [Integrator::linear(p, SchemeSpec::ExactEuler { k: -1.0 }), Integrator::linear(p, SchemeSpec::Euler)];
    let ens = run_ensemble(&schemes, &Reference::linear(p), &spec).map_err(|e| e.to_string())?;
    let reference = ens.reference_samples(0);
    let exact = tv_distance(&ens.samples(0, 0), &reference, DEFAULT_TV_BINS).map_err(|e| e.to_string())?.tv;
    let euler = tv_distance(&ens.samples(1, 0), &reference, DEFAULT_TV_BINS).map_err(|e| e.to_string())?.tv;
    check(exact < euler, format!("TV at t=0.5, h=0.05: exact(k=-1) {exact:.4} vs euler {euler:.4}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("scheme coincidence at k = -d/c", scheme_coincidence),
        ("convergence orders on geometric Brownian motion", convergence_orders),
        ("fig1 bounded vs exponential error growth", figure1_growth),
        ("stability boundary", stability_boundary),
        ("strong symmetries of the augmented system", symmetry_verification),
        ("adapted-coordinate transform", transform_correctness),
        ("Euler invariance under the adapted symmetry flows", invariance),
        ("tanh model exactness", tanh_exactness),
        ("closed-form moment integrals and envelopes", appendix_oracle),
        ("G1 growth classification", bound_shapes),
        ("determinism across worker counts", determinism),
        ("TV ordering", tv_ordering),
    ];
    // ACCEPTANCE_ONLY=1,4 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
