//! Measure builders for the subcritical, critical, and lattice regimes.

use crate::fields::{ConstructionTag, FieldRealization};
use crate::gamma_critical;

use super::{assemble_measure, ChaosError, ChaosMeasure, Regime, Result};

/// Critical renormalizations are only proved for fields assembled from
/// independent scale increments; other inputs are rejected outright.
fn require_increment_route(field: &FieldRealization, what: &str) -> Result<()> {
    match field.construction {
        ConstructionTag::LevelSum
        | ConstructionTag::ScaleSlabWhiteNoise
        | ConstructionTag::GffHeatWhiteNoise => Ok(()),
        other => Err(ChaosError::UnsupportedConstruction(format!(
            "{what} needs an independent-increment construction, got {other:?}"
        ))),
    }
}

/// Mean-one chaos measure `w(x) exp(gamma X - (gamma^2/2) Var)` with
/// Lebesgue cell weights. Couplings at or beyond `gamma_critical(d)` still
/// build and are tagged [`Regime::Vanishing`].
pub fn build_subcritical(field: &FieldRealization, gamma: f64) -> Result<ChaosMeasure> {
    let w = field.grid.cell_volume();
    build_subcritical_weighted(field, gamma, vec![w; field.grid.n_cells()])
}

/// [`build_subcritical`] with explicit integrating-measure weights.
pub fn build_subcritical_weighted(
    field: &FieldRealization,
    gamma: f64,
    weights: Vec<f64>,
) -> Result<ChaosMeasure> {
    if !(gamma >= 0.0) {
        return Err(ChaosError::InvalidParameter(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let regime = if gamma < gamma_critical(field.grid.dim()) {
        Regime::Subcritical
    } else {
        Regime::Vanishing
    };
    let half = gamma * gamma / 2.0;
    assemble_measure(field, gamma, regime, weights, |x, v| {
        (gamma * x - half * v).exp()
    })
}

/// Derivative measure at the critical coupling:
/// `w(x) (sqrt(2d) Var - X) exp(sqrt(2d) X - d Var)`. Negative cells are
/// permitted at finite cutoff and their mass share is reported.
pub fn build_derivative(field: &FieldRealization) -> Result<ChaosMeasure> {
    require_increment_route(field, "the derivative measure")?;
    let d = field.grid.dim() as f64;
    let gamma = gamma_critical(field.grid.dim());
    let w = field.grid.cell_volume();
    let weights = vec![w; field.grid.n_cells()];
    assemble_measure(field, gamma, Regime::CriticalDerivative, weights, |x, v| {
        (gamma * v - x) * (gamma * x - d * v).exp()
    })
}

/// Seneta-Heyde renormalization at the critical coupling:
/// `sqrt(ln(1/eps))` times the mean-one formula. Strictly nonnegative.
pub fn build_seneta_heyde(field: &FieldRealization) -> Result<ChaosMeasure> {
    require_increment_route(field, "the Seneta-Heyde measure")?;
    if field.eps >= 1.0 {
        return Err(ChaosError::InvalidParameter(format!(
            "the sqrt(ln(1/eps)) renormalization needs eps < 1, got {}",
            field.eps
        )));
    }
    let d = field.grid.dim() as f64;
    let gamma = gamma_critical(field.grid.dim());
    let scale = (1.0 / field.eps).ln().sqrt();
    let weights = vec![field.grid.cell_volume(); field.grid.n_cells()];
    assemble_measure(field, gamma, Regime::CriticalSenetaHeyde, weights, |x, v| {
        scale * (gamma * x - d * v).exp()
    })
}

/// Liouville measure of a lattice free field: vertex weights `eps^2`
/// (the cell area), the subcritical formula for `gamma < 2`, and the
/// Seneta-Heyde factor `sqrt(ln(1/eps))` when `critical` is set (which
/// requires `gamma = 2`). `gamma >= 2` without the flag builds tagged
/// [`Regime::Vanishing`].
pub fn build_discrete_liouville(
    field: &FieldRealization,
    gamma: f64,
    critical: bool,
) -> Result<ChaosMeasure> {
    if field.construction != ConstructionTag::DgffLattice {
        return Err(ChaosError::UnsupportedConstruction(format!(
            "discrete Liouville measures take lattice free fields, got {:?}",
            field.construction
        )));
    }
    if !(gamma >= 0.0) {
        return Err(ChaosError::InvalidParameter(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    if critical && (gamma - 2.0).abs() > 1e-12 {
        return Err(ChaosError::InvalidParameter(format!(
            "the critical lattice measure fixes gamma = 2, got {gamma}"
        )));
    }
    let area = field.eps * field.eps;
    debug_assert!((area - field.grid.cell_volume()).abs() < 1e-15);
    let scale = if critical {
        (1.0 / field.eps).ln().sqrt()
    } else {
        1.0
    };
    let regime = if critical {
        Regime::CriticalSenetaHeyde
    } else if gamma < 2.0 {
        Regime::Subcritical
    } else {
        Regime::Vanishing
    };
    let half = gamma * gamma / 2.0;
    let weights = vec![area; field.grid.n_cells()];
    assemble_measure(field, gamma, regime, weights, |x, v| {
        scale * (gamma * x - half * v).exp()
    })
}

/// Relative total-mass gap between the one-point cell quadrature on a
/// 2x-coarsened grid and the fine-grid measure it approximates.
///
/// The coarse rule evaluates the exponential at the coarse center (field
/// and variance interpolated as the mean of the 2^d children); the fine
/// total is the reference. Calibration configurations must keep this
/// below 1%, which justifies one-point quadrature for `eps >= 2h`.
pub fn subcell_refinement_gap(fine: &FieldRealization, gamma: f64) -> Result<f64> {
    let grid = &fine.grid;
    let d = grid.dim();
    if grid.shape().iter().any(|&n| n % 2 != 0) {
        return Err(ChaosError::InvalidParameter(
            "coarsening by 2 needs even cell counts per axis".into(),
        ));
    }
    let variance = fine.variance.values();
    if variance.len() != grid.n_cells() {
        return Err(ChaosError::MissingVariance(format!(
            "profile has {} entries for {} cells",
            variance.len(),
            grid.n_cells()
        )));
    }
    let half = gamma * gamma / 2.0;
    let w_fine = grid.cell_volume();
    let children = 1usize << d;
    let coarse_shape: Vec<usize> = grid.shape().iter().map(|&n| n / 2).collect();
    let n_coarse: usize = coarse_shape.iter().product();
    let mut coarse_total = 0.0;
    let mut fine_total = 0.0;
    let mut multi = vec![0usize; d];
    for ci in 0..n_coarse {
        let mut rem = ci;
        for (a, &na) in coarse_shape.iter().enumerate().rev() {
            multi[a] = rem % na;
            rem /= na;
        }
        let mut x_bar = 0.0;
        let mut v_bar = 0.0;
        let mut fine_sum = 0.0;
        for child in 0..children {
            let fine_multi: Vec<usize> = (0..d)
                .map(|a| 2 * multi[a] + ((child >> (d - 1 - a)) & 1))
                .collect();
            let fi = grid.index(&fine_multi);
            x_bar += fine.values[fi] / children as f64;
            v_bar += variance[fi] / children as f64;
            fine_sum += w_fine * (gamma * fine.values[fi] - half * variance[fi]).exp();
        }
        coarse_total += children as f64 * w_fine * (gamma * x_bar - half * v_bar).exp();
        fine_total += fine_sum;
    }
    Ok((coarse_total - fine_total).abs() / fine_total)
}
