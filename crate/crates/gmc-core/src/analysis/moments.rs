//! Moment tables, tail-index fits and Riesz-energy sums for ensembles
//! of total masses and for single measures.

use rand_chacha::ChaCha8Rng;

use super::{AnalysisError, Result};
use crate::chaos::ChaosMeasure;
use crate::rng::replica_rng;
use crate::stats::{bootstrap_ci, bootstrap_stderr, hill_estimator, mean};

use super::spectra::moment_threshold;

const N_BOOT: usize = 200;

/// One row of a moment table: the empirical q-th moment of the total
/// mass with its bootstrap error, flagged when the order sits at or
/// above the divergence threshold 2d/gamma^2.
#[derive(Debug, Clone)]
pub struct MomentRow {
    pub p: f64,
    pub moment: f64,
    pub stderr: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    pub n_samples: usize,
    pub threshold: f64,
}

/// Estimates E[M^p] for each requested order from an ensemble of total
/// masses, with bootstrap standard errors.
///
/// Requires at least 100 samples. Negative orders demand strictly
/// positive masses. Orders at or above the moment threshold are still
/// tabulated but flagged divergent; their empirical values are
/// replica-count artifacts, not estimates of a finite limit.
pub fn estimate_moments(
    masses: &[f64],
    p_list: &[f64],
    gamma: f64,
    d: usize,
    master: u64,
) -> Result<MomentTable> {
    if masses.len() < 100 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 100,
            got: masses.len(),
        });
    }
    if !masses.iter().all(|m| m.is_finite()) {
        return Err(AnalysisError::InvalidParameter(
            "masses must be finite".into(),
        ));
    }
    let threshold = moment_threshold(gamma, d);
    let mut rng = replica_rng(master, 0);
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        if p < 0.0 && masses.iter().any(|&m| m <= 0.0) {
            return Err(AnalysisError::InvalidParameter(format!(
                "moment of order {p} requires strictly positive masses"
            )));
        }
        let powered: Vec<f64> = masses.iter().map(|&m| m.powf(p)).collect();
        let moment = mean(&powered);
        let stderr = bootstrap_stderr(&powered, mean, N_BOOT, &mut rng);
        rows.push(MomentRow {
            p,
            moment,
            stderr,
            divergent: p >= threshold,
        });
    }
    Ok(MomentTable {
        rows,
        n_samples: masses.len(),
        threshold,
    })
}

/// Hill fit of the right tail of a mass ensemble against the predicted
/// power-law index 2/gamma^2.
#[derive(Debug, Clone)]
pub struct TailFit {
    pub exponent: f64,
    pub target: f64,
    pub ci: (f64, f64),
    pub k_used: usize,
}

/// Fits the tail exponent of P(M > t) ~ t^(-alpha) with the Hill
/// estimator on the top 5% of the sample and a bootstrap 95% CI.
///
/// Requires gamma > 0 and at least 10^4 samples; shallower ensembles
/// put too few points in the tail for the index to stabilize.
pub fn tail_exponent_fit(masses: &[f64], gamma: f64, master: u64) -> Result<TailFit> {
    if !(gamma > 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "tail fit requires gamma > 0".into(),
        ));
    }
    if masses.len() < 10_000 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 10_000,
            got: masses.len(),
        });
    }
    const TOP_FRACTION: f64 = 0.05;
    let fit = hill_estimator(masses, TOP_FRACTION)?;
    let hill_stat = |xs: &[f64]| -> f64 {
        hill_estimator(xs, TOP_FRACTION)
            .map(|f| f.alpha)
            .unwrap_or(f64::NAN)
    };
    let mut rng: ChaCha8Rng = replica_rng(master, 0);
    let ci = bootstrap_ci(masses, hill_stat, N_BOOT, 0.95, &mut rng);
    Ok(TailFit {
        exponent: fit.alpha,
        target: 2.0 / (gamma * gamma),
        ci,
        k_used: fit.k_used,
    })
}

/// Riesz energy I_beta(mu) = sum over cell pairs of m_i m_j |x_i - x_j|^-beta,
/// split into the off-diagonal double sum and the same-cell part.
///
/// The same-cell contribution is approximated by sum m_i^2 h^-beta,
/// which is the correct order in the cell size; the split is reported
/// so refinement studies can track each part separately. Finite
/// off-diagonal energy under refinement characterizes beta below the
/// correlation dimension d - gamma^2/2.
#[derive(Debug, Clone)]
pub struct BetaEnergy {
    pub beta: f64,
    pub off_diagonal: f64,
    pub diagonal: f64,
}

impl BetaEnergy {
    pub fn total(&self) -> f64 {
        self.off_diagonal + self.diagonal
    }
}

pub fn beta_energy(measure: &ChaosMeasure, beta: f64) -> Result<BetaEnergy> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(AnalysisError::InvalidParameter(
            "beta must be finite and nonnegative".into(),
        ));
    }
    let grid = &measure.grid;
    let n = grid.n_cells();
    let centers: Vec<Vec<f64>> = (0..n).map(|i| grid.center(i)).collect();
    let masses = &measure.cell_masses;
    let mut off_diagonal = 0.0;
    for i in 0..n {
        if masses[i] == 0.0 {
            continue;
        }
        for j in (i + 1)..n {
            if masses[j] == 0.0 {
                continue;
            }
            let r2: f64 = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            off_diagonal += 2.0 * masses[i] * masses[j] * r2.powf(-0.5 * beta);
        }
    }
    let diagonal: f64 = masses.iter().map(|&m| m * m).sum::<f64>() * grid.h().powf(-beta);
    Ok(BetaEnergy {
        beta,
        off_diagonal,
        diagonal,
    })
}
