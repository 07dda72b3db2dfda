//! Lie-symmetry tools for stochastic differential equations, symmetry-adapted
//! integrators for scalar linear SDEs, and a Monte-Carlo harness measuring
//! their weak, strong and distributional errors.

pub mod error;
pub mod experiments;
pub mod linear_oracle;
pub mod noise;
pub mod schemes;
pub mod sde_model;

pub use error::{Error, Result};
pub use experiments::{
    error_series, figure_preset, run_ensemble, stability_scan, tv_distance, Ensemble, EnsembleSpec, ErrorSeries,
    FigurePreset, Integrator, MeanTarget, Reference, ScanSpec, StabilityReport, TvReport,
};
pub use linear_oracle::{BoundReport, MomentCurve, ReferenceMethod};
pub use noise::{NoiseGrid, SeedSpec};
pub use schemes::{LinearSdeParams, OneStepScheme, SchemeSpec};
pub use sde_model::{Diffeomorphism, Domain, SdeSystem, VectorField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
