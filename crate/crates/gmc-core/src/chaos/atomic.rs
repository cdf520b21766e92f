//! Purely atomic measures of the supercritical phase.
//!
//! Both routes scatter atoms from the truncated stable intensity
//! `z^{-1-alpha} dz`, `z >= z_min`: per cell with base mass `m` the atom
//! count is Poisson with mean `m z_min^{-alpha} / alpha` and weights are
//! i.i.d. Pareto(`alpha`, `z_min`). Subordination runs the scatter over a
//! chaos measure; the direct route runs it over Lebesgue measure first and
//! then reweights each atom by `exp(gamma_bar X - (alpha gamma_bar^2 / 2)
//! Var)` at its cell. Dropping atoms below `z_min` loses at most
//! `m z_min^{1-alpha} / (1-alpha)` of expected mass, recorded on the
//! measure; no compensation is needed for `alpha < 1`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::fields::{FieldRealization, GridDomain};
use crate::quad;

use super::{ChaosError, ChaosMeasure, Regime, Result};

/// Expected-atom budget guard for one scatter.
const MAX_EXPECTED_ATOMS: f64 = 5e7;

/// One weighted atom.
#[derive(Debug, Clone)]
pub struct Atom {
    pub cell: usize,
    pub location: Vec<f64>,
    pub weight: f64,
}

/// What an atomic measure was built over.
#[derive(Debug, Clone)]
pub enum AtomicProvenance {
    /// Scatter over a chaos measure's cell masses.
    Subordinated {
        regime: Regime,
        gamma: f64,
        eps: f64,
        base_mass: f64,
    },
    /// Scatter over Lebesgue measure, reweighted by a field.
    Direct { gamma_bar: f64, eps: f64 },
    /// Unweighted stable scatter over Lebesgue measure.
    Stable,
}

/// A purely atomic random measure.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    pub grid: GridDomain,
    pub atoms: Vec<Atom>,
    pub alpha: f64,
    pub z_min: f64,
    pub provenance: AtomicProvenance,
    /// `base_mass * z_min^{1-alpha} / (1-alpha)`, the expected mass lost
    /// to truncation.
    pub truncation_deficit_bound: f64,
}

impl AtomicMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Atom count in one cell.
    pub fn cell_count(&self, cell: usize) -> usize {
        self.atoms.iter().filter(|a| a.cell == cell).count()
    }
}

/// An unweighted truncated-stable scatter, reusable across fields.
#[derive(Debug, Clone)]
pub struct StableAtoms {
    pub grid: GridDomain,
    pub atoms: Vec<Atom>,
    pub alpha: f64,
    pub z_min: f64,
}

fn validate_stable_params(alpha: f64, z_min: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ChaosError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(z_min > 0.0 && z_min.is_finite()) {
        return Err(ChaosError::InvalidParameter(format!(
            "z_min must be positive, got {z_min}"
        )));
    }
    Ok(())
}

/// Largest truncation threshold whose deficit bound stays below 0.1% of
/// the base mass: `z_min^{1-alpha}/(1-alpha) <= 1e-3`.
pub fn default_z_min(alpha: f64) -> f64 {
    ((1.0 - alpha) * 1e-3).powf(1.0 / (1.0 - alpha))
}

/// Dual coupling of the supercritical phase: `gamma * gamma_bar = 2d`,
/// so `gamma_bar = 2d / gamma` and `alpha = 2d / gamma_bar^2 =
/// gamma^2 / (2d)`.
pub fn dual_parameters(gamma: f64, d: usize) -> (f64, f64) {
    let two_d = 2.0 * d as f64;
    let gamma_bar = two_d / gamma;
    (gamma_bar, two_d / (gamma_bar * gamma_bar))
}

/// Truncated Levy exponent per unit base mass:
/// `int_{z_min}^inf (1 - e^{-qz}) z^{-1-alpha} dz`, so that the scatter
/// over base mass `m` satisfies `E[e^{-qS}] = exp(-m * exponent)`.
pub fn truncated_laplace_exponent(q: f64, alpha: f64, z_min: f64) -> Result<f64> {
    validate_stable_params(alpha, z_min)?;
    if !(q >= 0.0) {
        return Err(ChaosError::InvalidParameter(format!(
            "Laplace variable must be nonnegative, got {q}"
        )));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    // Beyond z_cut the exponential is below e^-60 and the integrand is
    // z^{-1-alpha} up to that error, with tail integral z_cut^-alpha/alpha.
    let z_cut = (60.0 / q).max(2.0 * z_min);
    let head = quad::integrate(
        |z| (1.0 - (-q * z).exp()) * z.powf(-1.0 - alpha),
        z_min,
        z_cut,
        1e-11,
    )
    .map_err(|e| ChaosError::InvalidParameter(format!("Levy-exponent quadrature: {e}")))?;
    Ok(head.value + z_cut.powf(-alpha) / alpha)
}

/// Scatters truncated-stable atoms over per-cell base masses.
fn scatter(
    grid: &GridDomain,
    base_masses: &[f64],
    alpha: f64,
    z_min: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Atom>> {
    let intensity = z_min.powf(-alpha) / alpha;
    let positive_mass: f64 = base_masses.iter().filter(|&&m| m > 0.0).sum();
    if positive_mass * intensity > MAX_EXPECTED_ATOMS {
        return Err(ChaosError::InvalidParameter(format!(
            "expected atom count {:.2e} exceeds the budget; raise z_min",
            positive_mass * intensity
        )));
    }
    let h = grid.h();
    let mut atoms = Vec::new();
    for (cell, &m) in base_masses.iter().enumerate() {
        if !(m > 0.0) {
            continue;
        }
        let lambda = m * intensity;
        let count = Poisson::new(lambda)
            .map_err(|e| ChaosError::InvalidParameter(format!("Poisson({lambda}): {e}")))?
            .sample(rng) as usize;
        let center = grid.center(cell);
        for _ in 0..count {
            let u: f64 = rng.random();
            let weight = z_min * u.powf(-1.0 / alpha);
            let location = center
                .iter()
                .map(|&c| c + (rng.random::<f64>() - 0.5) * h)
                .collect();
            atoms.push(Atom {
                cell,
                location,
                weight,
            });
        }
    }
    Ok(atoms)
}

/// Stable scatter over a chaos measure: atoms land where the base puts
/// mass. Negative derivative-measure cells carry no intensity and are
/// skipped.
pub fn build_atomic_subordinated(
    base: &ChaosMeasure,
    alpha: f64,
    z_min: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AtomicMeasure> {
    validate_stable_params(alpha, z_min)?;
    if base.regime == Regime::Vanishing {
        return Err(ChaosError::InvalidParameter(
            "subordination needs a subcritical or critical base, not a vanishing one".into(),
        ));
    }
    let atoms = scatter(&base.grid, &base.cell_masses, alpha, z_min, rng)?;
    let base_mass: f64 = base.cell_masses.iter().filter(|&&m| m > 0.0).sum();
    Ok(AtomicMeasure {
        grid: base.grid.clone(),
        atoms,
        alpha,
        z_min,
        provenance: AtomicProvenance::Subordinated {
            regime: base.regime,
            gamma: base.gamma,
            eps: base.eps,
            base_mass,
        },
        truncation_deficit_bound: base_mass * z_min.powf(1.0 - alpha) / (1.0 - alpha),
    })
}

/// Unweighted stable scatter over Lebesgue measure on the grid.
pub fn sample_stable_atoms(
    grid: &GridDomain,
    alpha: f64,
    z_min: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StableAtoms> {
    validate_stable_params(alpha, z_min)?;
    let w = grid.cell_volume();
    let base = vec![w; grid.n_cells()];
    let atoms = scatter(grid, &base, alpha, z_min, rng)?;
    Ok(StableAtoms {
        grid: grid.clone(),
        atoms,
        alpha,
        z_min,
    })
}

/// Weights a stable scatter by `exp(gamma_bar X - (alpha gamma_bar^2 / 2)
/// Var)` at each atom's cell.
pub fn weight_stable_atoms(
    stable: &StableAtoms,
    field: &FieldRealization,
    gamma_bar: f64,
) -> Result<AtomicMeasure> {
    if stable.grid != field.grid {
        return Err(ChaosError::InvalidParameter(
            "stable atoms and field live on different grids".into(),
        ));
    }
    if !(gamma_bar >= 0.0) {
        return Err(ChaosError::InvalidParameter(format!(
            "gamma_bar must be nonnegative, got {gamma_bar}"
        )));
    }
    let variance = field.variance.values();
    if variance.len() != field.grid.n_cells() {
        return Err(ChaosError::MissingVariance(format!(
            "profile has {} entries for {} cells",
            variance.len(),
            field.grid.n_cells()
        )));
    }
    let half = stable.alpha * gamma_bar * gamma_bar / 2.0;
    let mut atoms = Vec::with_capacity(stable.atoms.len());
    let mut weighted_base = 0.0;
    let w = field.grid.cell_volume();
    for (i, &v) in variance.iter().enumerate() {
        weighted_base += w * (gamma_bar * field.values[i] - half * v).exp();
    }
    for atom in &stable.atoms {
        let factor =
            (gamma_bar * field.values[atom.cell] - half * variance[atom.cell]).exp();
        if !factor.is_finite() {
            return Err(ChaosError::NonFinite(format!(
                "atom weight factor at cell {}",
                atom.cell
            )));
        }
        atoms.push(Atom {
            cell: atom.cell,
            location: atom.location.clone(),
            weight: atom.weight * factor,
        });
    }
    Ok(AtomicMeasure {
        grid: stable.grid.clone(),
        atoms,
        alpha: stable.alpha,
        z_min: stable.z_min,
        provenance: AtomicProvenance::Direct {
            gamma_bar,
            eps: field.eps,
        },
        truncation_deficit_bound: weighted_base * stable.z_min.powf(1.0 - stable.alpha)
            / (1.0 - stable.alpha),
    })
}

/// Direct supercritical construction: stable scatter over Lebesgue
/// measure, each atom reweighted by the field at its cell.
pub fn build_atomic_direct(
    field: &FieldRealization,
    gamma_bar: f64,
    alpha: f64,
    z_min: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AtomicMeasure> {
    let stable = sample_stable_atoms(&field.grid, alpha, z_min, rng)?;
    weight_stable_atoms(&stable, field, gamma_bar)
}
