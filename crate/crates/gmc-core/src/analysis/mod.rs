//! Estimators and statistical tests that confront chaos ensembles with
//! their closed-form predictions.
//!
//! The module splits into four layers:
//!
//! - [`spectra`]: exact evaluators for the structure exponent, the
//!   L^q and singularity spectra, thick-point targets and the KPZ maps;
//!   everything here is deterministic arithmetic.
//! - [`moments`]: moment tables with bootstrap errors, Hill tail fits and
//!   beta-energy double sums over measure ensembles.
//! - [`scaling`]: ball-mass scaling fits, per-point local exponents,
//!   exact scale-invariance ratios and the rooted thick-point drift.
//! - [`compare`]: convexity comparisons between ordered kernels,
//!   cutoff-equivalence tests, star-scale consistency, degeneracy scans
//!   and max-field statistics.
//!
//! Estimators consume immutable ensembles and parallelize over replicas;
//! every report carries the inputs needed to rerun it.

use thiserror::Error;

pub mod compare;
pub mod moments;
pub mod scaling;
pub mod spectra;

pub use compare::{
    approximation_equivalence_test, degeneracy_scan, kahane_comparison_test,
    max_field_statistics, star_scale_test, ComparisonProbe, DegeneracyReport, DegeneracyRow,
    EquivalenceReport, KahaneReport, MaxFieldReport, MaxLevelStats, StarBandCheck,
    StarScaleReport,
};
pub use moments::{
    beta_energy, estimate_moments, tail_exponent_fit, BetaEnergy, MomentRow, MomentTable,
    TailFit,
};
pub use scaling::{
    fit_structure_exponent, local_exponent, scale_invariance_test, thick_point_drift,
    CenterPolicy, LocalExponentField, MomentScalingFit, ScaleInvarianceReport,
    ScaleInvarianceRow, ThickPointReport,
};
pub use spectra::{
    kpz_euclidean_from_quantum, kpz_lebesgue_dimension, kpz_quantum_dimension,
    kpz_quantum_from_euclidean, local_exponent_target, moment_threshold, singularity_spectrum,
    structure_exponent, tau_spectrum,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ensemble too small: need {needed}, got {got}")]
    TooFewReplicas { needed: usize, got: usize },
    #[error("ensembles are incompatible: {0}")]
    MismatchedEnsembles(String),
    #[error("kernel ordering violated by {0} at grid points")]
    OrderingViolated(f64),
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
    #[error(transparent)]
    Chaos(#[from] crate::chaos::ChaosError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
