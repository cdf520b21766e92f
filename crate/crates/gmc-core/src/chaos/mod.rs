//! Multiplicative chaos measures built from sampled field realizations.
//!
//! A realization `X_eps` with variance profile `V` turns into the measure
//! with cell masses `w(x) exp(gamma X_eps(x) - (gamma^2/2) V(x))`, the
//! one-point quadrature of `e^{gamma X - (gamma^2/2) E[X^2]} sigma(dx)`
//! over the cell (`w` defaults to the cell volume). The builders cover the
//! subcritical regime, both critical renormalizations (the derivative
//! measure and the square-root-of-log Seneta-Heyde scaling), the atomic
//! measures of the supercritical phase, lattice Liouville measures, and
//! the Hopf-Cole functional that feeds the Burgers diagnostics. Routes
//! that intentionally degenerate (no renormalization at or beyond the
//! critical coupling) still build, tagged [`Regime::Vanishing`], so
//! refinement scans can demonstrate the collapse.
//!
//! All builders are deterministic functions of their inputs; ensemble
//! randomness enters only through the field realizations and the explicit
//! RNG arguments of the atomic constructions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldRealization, GridDomain};

pub mod atomic;
pub mod builders;
pub mod burgers;
pub mod rooted;

pub use atomic::{
    build_atomic_direct, build_atomic_subordinated, default_z_min, dual_parameters,
    sample_stable_atoms, truncated_laplace_exponent, weight_stable_atoms, Atom, AtomicMeasure,
    AtomicProvenance, StableAtoms,
};
pub use builders::{
    build_derivative, build_discrete_liouville, build_seneta_heyde, build_subcritical,
    build_subcritical_weighted, subcell_refinement_gap,
};
pub use burgers::{hopf_cole_burgers, BurgersSolution};
pub use rooted::sample_rooted_point;

#[derive(Debug, Error)]
pub enum ChaosError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("variance profile does not cover the grid: {0}")]
    MissingVariance(String),
    #[error("construction not admitted here: {0}")]
    UnsupportedConstruction(String),
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("non-finite mass: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, ChaosError>;

/// Normalization regime a chaos measure was built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `gamma^2 < 2d` with the mean-one normalization.
    Subcritical,
    /// Derivative measure at `gamma = sqrt(2d)`; cells may be negative at
    /// finite cutoff.
    CriticalDerivative,
    /// `sqrt(ln(1/eps))` times the critical mean-one formula.
    CriticalSenetaHeyde,
    /// `gamma^2 >= 2d` without renormalization; degenerates under
    /// refinement.
    Vanishing,
}

/// A multiplicative chaos measure on a grid at one cutoff.
#[derive(Debug, Clone)]
pub struct ChaosMeasure {
    pub grid: GridDomain,
    pub gamma: f64,
    pub regime: Regime,
    /// Mass per cell, indexed like the field values.
    pub cell_masses: Vec<f64>,
    pub eps: f64,
    /// Integrating-measure weight per cell (cell volume unless stated).
    pub weights: Vec<f64>,
    /// Mass-weighted share of negative cells; only the derivative
    /// construction produces any.
    pub negative_fraction: Option<f64>,
}

impl ChaosMeasure {
    pub fn total_mass(&self) -> f64 {
        self.cell_masses.iter().sum()
    }

    /// Mass of the cells whose centers satisfy `pred`.
    pub fn mass_where<F: Fn(&[f64]) -> bool>(&self, pred: F) -> f64 {
        self.cell_masses
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(&self.grid.center(*i)))
            .map(|(_, m)| m)
            .sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.cell_masses.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.cell_masses.iter().all(|&m| m >= 0.0)
    }

    /// Count of cells carrying negative mass.
    pub fn negative_cells(&self) -> usize {
        self.cell_masses.iter().filter(|&&m| m < 0.0).count()
    }
}

/// Shared mass assembly: `mass_i = weight_i * factor(X_i, V_i)`.
pub(crate) fn assemble_measure(
    field: &FieldRealization,
    gamma: f64,
    regime: Regime,
    weights: Vec<f64>,
    factor: impl Fn(f64, f64) -> f64,
) -> Result<ChaosMeasure> {
    let n = field.grid.n_cells();
    let variance = field.variance.values();
    if variance.len() != n {
        return Err(ChaosError::MissingVariance(format!(
            "profile has {} entries for {} cells",
            variance.len(),
            n
        )));
    }
    if weights.len() != n {
        return Err(ChaosError::InvalidParameter(format!(
            "weight vector has {} entries for {} cells",
            weights.len(),
            n
        )));
    }
    let mut cell_masses = Vec::with_capacity(n);
    for i in 0..n {
        let m = weights[i] * factor(field.values[i], variance[i]);
        if !m.is_finite() {
            return Err(ChaosError::NonFinite(format!(
                "cell {i}: field {}, variance {}",
                field.values[i], variance[i]
            )));
        }
        cell_masses.push(m);
    }
    let negative: f64 = cell_masses.iter().filter(|&&m| m < 0.0).map(|m| -m).sum();
    let negative_fraction = if regime == Regime::CriticalDerivative {
        let absolute: f64 = cell_masses.iter().map(|m| m.abs()).sum();
        Some(if absolute > 0.0 { negative / absolute } else { 0.0 })
    } else {
        None
    };
    Ok(ChaosMeasure {
        grid: field.grid.clone(),
        gamma,
        regime,
        cell_masses,
        eps: field.eps,
        weights,
        negative_fraction,
    })
}
