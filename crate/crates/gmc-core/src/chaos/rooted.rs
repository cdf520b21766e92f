//! Size-biased sampling from a chaos measure.
//!
//! Conditional on the field, a rooted point is drawn with probability
//! proportional to cell mass, then placed uniformly inside its cell.
//! Averaging replica statistics with total-mass weights turns these
//! conditional draws into expectations under the mass-biased law of the
//! pair (field, point), which is how the thick-point drift of the field
//! at the root is measured.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ChaosError, ChaosMeasure, Result};

/// Draws one point from a measure, mass-biased over cells and uniform
/// within the chosen cell. Returns the flat cell index and the point.
pub fn sample_rooted_point(
    measure: &ChaosMeasure,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Vec<f64>)> {
    if !measure.is_nonnegative() {
        return Err(ChaosError::InvalidParameter(
            "rooted sampling needs a nonnegative measure; a signed derivative \
             measure has no mass-biased law cell by cell"
                .into(),
        ));
    }
    let total = measure.total_mass();
    if !(total > 0.0) {
        return Err(ChaosError::ZeroMass);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut cell = measure.cell_masses.len() - 1;
    for (i, &m) in measure.cell_masses.iter().enumerate() {
        acc += m;
        if target < acc {
            cell = i;
            break;
        }
    }
    let h = measure.grid.h();
    let point = measure
        .grid
        .center(cell)
        .iter()
        .map(|&c| c + (rng.random::<f64>() - 0.5) * h)
        .collect();
    Ok((cell, point))
}
