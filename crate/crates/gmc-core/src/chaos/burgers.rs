//! Viscous Burgers flow started from a random potential.
//!
//! The Hopf-Cole substitution turns `v_t + v v_x = nu v_xx` with initial
//! velocity `-d/dx V` into a heat kernel average of `exp(-V / (2 nu))`:
//!
//! ```text
//! Z(x, t) = int (4 pi nu t)^{-1/2} exp(-(x - y)^2 / (4 nu t) - V(y) / (2 nu)) dy
//! v(x, t) = -2 nu d/dx ln Z(x, t)
//! ```
//!
//! With a log-correlated potential, `exp(-V / (2 nu))` is a chaos density
//! at inverse-temperature coupling `1 / (2 nu)`, so lowering the viscosity
//! sweeps the averaged measure toward and past criticality.

use crate::fields::FieldRealization;

use super::{ChaosError, Result};

/// Hopf-Cole solution sampled at the requested points.
#[derive(Debug, Clone)]
pub struct BurgersSolution {
    /// Evaluation points.
    pub x: Vec<f64>,
    /// Heat-smoothed partition function `Z(x, t)`.
    pub z: Vec<f64>,
    /// Velocity `-2 nu (ln Z)'` by centered differences, one-sided at the
    /// ends.
    pub v: Vec<f64>,
}

/// Evaluates the Hopf-Cole formula for a one-dimensional potential given
/// on a grid, treating the field values as a midpoint rule for the
/// integral over the domain.
pub fn hopf_cole_burgers(
    field: &FieldRealization,
    nu: f64,
    t: f64,
    x_eval: &[f64],
) -> Result<BurgersSolution> {
    if field.grid.dim() != 1 {
        return Err(ChaosError::InvalidParameter(format!(
            "Hopf-Cole evaluation needs a one-dimensional potential, got d = {}",
            field.grid.dim()
        )));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(ChaosError::InvalidParameter(format!(
            "viscosity must be positive, got {nu}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(ChaosError::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    if x_eval.len() < 3 {
        return Err(ChaosError::InvalidParameter(format!(
            "need at least 3 evaluation points for differences, got {}",
            x_eval.len()
        )));
    }
    if x_eval.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ChaosError::InvalidParameter(
            "evaluation points must be strictly increasing".into(),
        ));
    }
    let h = field.grid.h();
    let norm = 1.0 / (4.0 * std::f64::consts::PI * nu * t).sqrt();
    let inv_4nt = 1.0 / (4.0 * nu * t);
    let inv_2nu = 1.0 / (2.0 * nu);
    let centers: Vec<f64> = (0..field.grid.n_cells())
        .map(|i| field.grid.center(i)[0])
        .collect();
    let mut log_z = Vec::with_capacity(x_eval.len());
    let mut z = Vec::with_capacity(x_eval.len());
    for &x in x_eval {
        // Factor out the largest exponent so tiny-viscosity runs stay
        // finite.
        let exponents: Vec<f64> = centers
            .iter()
            .zip(&field.values)
            .map(|(&y, &val)| -(y - x) * (y - x) * inv_4nt - val * inv_2nu)
            .collect();
        let peak = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exponents.iter().map(|&e| (e - peak).exp()).sum();
        let lz = peak + (h * norm * sum).ln();
        if !lz.is_finite() {
            return Err(ChaosError::NonFinite(format!(
                "partition function at x = {x}"
            )));
        }
        log_z.push(lz);
        z.push(lz.exp());
    }
    let m = x_eval.len();
    let mut v = vec![0.0; m];
    v[0] = -2.0 * nu * (log_z[1] - log_z[0]) / (x_eval[1] - x_eval[0]);
    v[m - 1] = -2.0 * nu * (log_z[m - 1] - log_z[m - 2]) / (x_eval[m - 1] - x_eval[m - 2]);
    for i in 1..m - 1 {
        v[i] = -2.0 * nu * (log_z[i + 1] - log_z[i - 1]) / (x_eval[i + 1] - x_eval[i - 1]);
    }
    Ok(BurgersSolution {
        x: x_eval.to_vec(),
        z,
        v,
    })
}
