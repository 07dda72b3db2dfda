//! Shared fixtures for the benchmarks.

use symsde_core::{EnsembleSpec, LinearSdeParams};

/// The benchmark model `a = -2, b = c = d = 10`.
pub fn benchmark_params() -> LinearSdeParams {
    LinearSdeParams::benchmark()
}

/// A small ensemble at the benchmark settings.
pub fn small_spec(paths: usize, couple_factor: usize) -> EnsembleSpec {
    EnsembleSpec::new(5.0, 1.0, 0.025)
        .with_paths(paths)
        .with_couple_factor(couple_factor)
        .with_workers(Some(1))
}
