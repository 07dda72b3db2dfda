use criterion::{criterion_group, criterion_main, Criterion};

use symsde_bench::{benchmark_params, small_spec};
use symsde_core::experiments::error_series;
use symsde_core::{run_ensemble, Integrator, MeanTarget, Reference, SchemeSpec};

fn ensemble(c: &mut Criterion) {
    let p = benchmark_params();
    let schemes = [
        Integrator::linear(p, SchemeSpec::Euler),
        Integrator::linear(p, SchemeSpec::ExactEuler { k: -1.0 }),
    ];
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    for couple in [1, 64] {
        let spec = small_spec(1000, couple);
        g.bench_function(format!("1000_paths_couple_{couple}"), |b| {
            b.iter(|| run_ensemble(&schemes, &Reference::linear(p), &spec).unwrap())
        });
    }
    let ens = run_ensemble(&schemes, &Reference::linear(p), &small_spec(1000, 64)).unwrap();
    g.bench_function("error_series", |b| {
        b.iter(|| error_series(&ens, 0, MeanTarget::Analytic { params: p, x0: 5.0 }).unwrap())
    });
    g.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
