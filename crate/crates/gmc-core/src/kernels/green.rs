//! Dirichlet Green functions of a rectangle via eigenfunction sums.
//!
//! On `(0, lx) x (0, ly)` the Laplacian with zero boundary values has
//! eigenpairs
//!
//! ```text
//! e_{jk}(x, y) = 2 / sqrt(lx ly) sin(j pi x / lx) sin(k pi y / ly),
//! lambda_{jk} = -pi^2 (j^2 / lx^2 + k^2 / ly^2),
//! ```
//!
//! and the field normalization used throughout this crate is `K = 2 pi G`
//! with `G = (-Laplacian)^{-1}`, so that `K(x, y) = ln(1/|x - y|) + O(1)`
//! near the diagonal. Three point evaluations are provided:
//!
//! - the truncated Green sum itself (off-diagonal only; the sum diverges
//!   logarithmically on the diagonal),
//! - its heat-kernel smoothing at spatial scale `eps`, weighting mode
//!   `lambda` by `exp(lambda eps^2 / 2)`, which is finite on the diagonal
//!   and serves as the cutoff variance of the white-noise construction,
//! - the massive resolvent `2 pi (m^2 - Laplacian)^{-1}`, whose short-scale
//!   behavior matches the massless kernel but whose long-range behavior does
//!   not, making it the shipped negative control for equivalence tests.
//!
//! Truncation quality is reported as the difference between the full rule
//! and the rule at half the mode count, an error indicator rather than a
//! rigorous bound.

use serde::{Deserialize, Serialize};

use super::{require_positive, KernelError, Result};

/// The open rectangle `(0, lx) x (0, ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleDomain {
    pub lx: f64,
    pub ly: f64,
}

impl RectangleDomain {
    pub fn new(lx: f64, ly: f64) -> Result<Self> {
        require_positive(lx, "rectangle side lx")?;
        require_positive(ly, "rectangle side ly")?;
        Ok(Self { lx, ly })
    }

    pub fn unit_square() -> Self {
        Self { lx: 1.0, ly: 1.0 }
    }

    /// Laplacian eigenvalue for mode `(j, k)`, `j, k >= 1`.
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        let jf = j as f64;
        let kf = k as f64;
        -std::f64::consts::PI.powi(2) * (jf * jf / (self.lx * self.lx) + kf * kf / (self.ly * self.ly))
    }

    /// L2-normalized Dirichlet eigenfunction for mode `(j, k)`.
    pub fn eigenfunction(&self, j: usize, k: usize, p: &[f64]) -> f64 {
        let sx = (j as f64 * std::f64::consts::PI * p[0] / self.lx).sin();
        let sy = (k as f64 * std::f64::consts::PI * p[1] / self.ly).sin();
        2.0 / (self.lx * self.ly).sqrt() * sx * sy
    }

    pub fn contains_interior(&self, p: &[f64]) -> bool {
        p.len() == 2 && p[0] > 0.0 && p[0] < self.lx && p[1] > 0.0 && p[1] < self.ly
    }

    fn check_interior(&self, p: &[f64]) -> Result<()> {
        if !self.contains_interior(p) {
            return Err(KernelError::Domain(format!(
                "point {p:?} is not strictly inside (0, {}) x (0, {})",
                self.lx, self.ly
            )));
        }
        Ok(())
    }
}

/// Value of a truncated mode sum together with an error indicator (the
/// change when halving the mode count per axis).
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSum {
    pub value: f64,
    pub tail_estimate: f64,
    pub modes_per_axis: usize,
}

fn mode_sum(
    domain: &RectangleDomain,
    x: &[f64],
    y: &[f64],
    n_modes: usize,
    weight: impl Fn(f64) -> f64,
) -> TruncatedSum {
    let half = n_modes / 2;
    let mut value = 0.0;
    let mut half_value = 0.0;
    for j in 1..=n_modes {
        for k in 1..=n_modes {
            let lambda = domain.eigenvalue(j, k);
            let term = 2.0
                * std::f64::consts::PI
                * domain.eigenfunction(j, k, x)
                * domain.eigenfunction(j, k, y)
                * weight(lambda);
            value += term;
            if j <= half && k <= half {
                half_value += term;
            }
        }
    }
    TruncatedSum {
        value,
        tail_estimate: (value - half_value).abs(),
        modes_per_axis: n_modes,
    }
}

/// Truncated eigenfunction sum for `2 pi G(x, y)`, off-diagonal points only.
pub fn green_rectangle_eigen(
    domain: &RectangleDomain,
    x: &[f64],
    y: &[f64],
    n_modes: usize,
) -> Result<TruncatedSum> {
    domain.check_interior(x)?;
    domain.check_interior(y)?;
    if x == y {
        return Err(KernelError::Domain(
            "Green function diverges on the diagonal; use the heat-smoothed variant".into(),
        ));
    }
    Ok(mode_sum(domain, x, y, n_modes, |lambda| 1.0 / (-lambda)))
}

/// Heat-smoothed kernel `2 pi sum e e exp(lambda eps^2 / 2) / (-lambda)`,
/// finite on the diagonal; `eps = 0` reduces to the raw Green sum.
pub fn heat_band_green(
    domain: &RectangleDomain,
    eps: f64,
    x: &[f64],
    y: &[f64],
    n_modes: usize,
) -> Result<TruncatedSum> {
    domain.check_interior(x)?;
    domain.check_interior(y)?;
    if eps < 0.0 {
        return Err(KernelError::InvalidParameter(format!(
            "smoothing scale must be nonnegative, got {eps}"
        )));
    }
    if eps == 0.0 && x == y {
        return Err(KernelError::Domain(
            "unsmoothed diagonal value diverges".into(),
        ));
    }
    Ok(mode_sum(domain, x, y, n_modes, |lambda| {
        (lambda * eps * eps / 2.0).exp() / (-lambda)
    }))
}

/// Massive resolvent kernel `2 pi sum e e / (m^2 - lambda)`.
pub fn massive_green(
    domain: &RectangleDomain,
    mass: f64,
    x: &[f64],
    y: &[f64],
    n_modes: usize,
) -> Result<TruncatedSum> {
    require_positive(mass, "mass")?;
    domain.check_interior(x)?;
    domain.check_interior(y)?;
    if x == y {
        return Err(KernelError::Domain(
            "massive Green function diverges on the diagonal in two dimensions".into(),
        ));
    }
    Ok(mode_sum(domain, x, y, n_modes, |lambda| {
        1.0 / (mass * mass - lambda)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn boundary_and_diagonal_are_domain_errors() {
        let dom = RectangleDomain::unit_square();
        assert!(green_rectangle_eigen(&dom, &[0.0, 0.5], &[0.3, 0.3], 16).is_err());
        assert!(green_rectangle_eigen(&dom, &[0.5, 0.5], &[0.5, 0.5], 16).is_err());
        assert!(heat_band_green(&dom, 0.0, &[0.5, 0.5], &[0.5, 0.5], 16).is_err());
        assert!(heat_band_green(&dom, 0.05, &[0.5, 0.5], &[0.5, 0.5], 16).is_ok());
    }

    #[test]
    fn green_satisfies_discrete_poisson_identity() {
        // -Laplacian G = identity: integrating G(x, .) against an
        // eigenfunction recovers 1/(-lambda) times the eigenfunction at x.
        // Checked through the expansion directly: the mode sum against
        // e_{11} on a coarse grid matches the j = k = 1 coefficient.
        let dom = RectangleDomain::new(1.0, 1.0).unwrap();
        let x = [0.37, 0.61];
        let n_grid = 120;
        let h = 1.0 / n_grid as f64;
        let mut acc = 0.0;
        for i in 1..n_grid {
            for j in 1..n_grid {
                let p = [i as f64 * h, j as f64 * h];
                if p == x {
                    continue;
                }
                let g = green_rectangle_eigen(&dom, &x, &p, 32).unwrap().value;
                acc += g * dom.eigenfunction(1, 1, &p) * h * h;
            }
        }
        let expected =
            2.0 * std::f64::consts::PI * dom.eigenfunction(1, 1, &x) / (-dom.eigenvalue(1, 1));
        assert_abs_diff_eq!(acc, expected, epsilon = 2e-3);
    }

    #[test]
    fn short_distance_behavior_is_logarithmic() {
        // K(x, y) + ln|x - y| should approach a finite constant as the
        // separation shrinks; compare two separations and check the
        // difference of K matches the difference of ln(1/r).
        let dom = RectangleDomain::unit_square();
        let x = [0.5, 0.5];
        let n_modes = 1200;
        let r1 = 0.02;
        let r2 = 0.01;
        let k1 = green_rectangle_eigen(&dom, &x, &[0.5 + r1, 0.5], n_modes)
            .unwrap()
            .value;
        let k2 = green_rectangle_eigen(&dom, &x, &[0.5 + r2, 0.5], n_modes)
            .unwrap()
            .value;
        assert_abs_diff_eq!(k2 - k1, 2.0_f64.ln(), epsilon = 0.02);
    }

    #[test]
    fn heat_smoothing_matches_raw_sum_off_diagonal() {
        // For separations much larger than eps the smoothing is negligible.
        let dom = RectangleDomain::unit_square();
        let x = [0.3, 0.4];
        let y = [0.7, 0.6];
        let raw = green_rectangle_eigen(&dom, &x, &y, 600).unwrap().value;
        let smoothed = heat_band_green(&dom, 0.005, &x, &y, 600).unwrap().value;
        assert_abs_diff_eq!(raw, smoothed, epsilon = 1e-3);
    }

    #[test]
    fn heat_diagonal_grows_like_log_one_over_eps() {
        let dom = RectangleDomain::unit_square();
        let x = [0.5, 0.5];
        let v1 = heat_band_green(&dom, 0.04, &x, &x, 1600).unwrap().value;
        let v2 = heat_band_green(&dom, 0.02, &x, &x, 1600).unwrap().value;
        assert_abs_diff_eq!(v2 - v1, 2.0_f64.ln(), epsilon = 0.05);
    }

    #[test]
    fn massive_kernel_decays_faster_at_long_range() {
        let dom = RectangleDomain::unit_square();
        let x = [0.25, 0.5];
        let y = [0.75, 0.5];
        let massless = green_rectangle_eigen(&dom, &x, &y, 400).unwrap().value;
        let massive = massive_green(&dom, 2.0, &x, &y, 400).unwrap().value;
        assert!(massive < massless);
        // Short range: the mass barely matters.
        let y_close = [0.27, 0.5];
        let massless_c = green_rectangle_eigen(&dom, &x, &y_close, 1200).unwrap().value;
        let massive_c = massive_green(&dom, 2.0, &x, &y_close, 1200).unwrap().value;
        assert!((massless_c - massive_c) < 0.3 * massless_c);
    }

    #[test]
    fn tail_estimate_shrinks_for_smoothed_sums() {
        let dom = RectangleDomain::unit_square();
        let x = [0.5, 0.5];
        let coarse = heat_band_green(&dom, 0.1, &x, &x, 200).unwrap();
        let fine = heat_band_green(&dom, 0.1, &x, &x, 400).unwrap();
        assert!(fine.tail_estimate < coarse.tail_estimate.max(1e-10) + 1e-10);
        assert_abs_diff_eq!(coarse.value, fine.value, epsilon = 1e-6);
    }
}
