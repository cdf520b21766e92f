//! Ball-mass scaling: structure-exponent fits over center ensembles,
//! per-point local exponents, exact scale-invariance ratios, and the
//! drift of the field seen from a mass-rooted point.
//!
//! Balls are sup-norm cells-within-radius sets, so each ball mass is a
//! rectangle sum over the grid and comes out of a prefix table in O(1)
//! per query. Scaling exponents do not depend on the choice of norm.

use crate::chaos::{build_subcritical, sample_rooted_point, ChaosMeasure};
use crate::fields::{GridDomain, RefinementLadder};
use crate::rng::replica_rng;
use crate::stats::{mean, ols, stderr_of_mean, variance};

use super::spectra::{moment_threshold, structure_exponent};
use super::{AnalysisError, Result};

/// Prefix-sum table over cell masses; `ball_mass` returns the mass of
/// the cells whose centers lie within sup-norm distance `r` of a point.
struct PrefixMass<'a> {
    grid: &'a GridDomain,
    table: Vec<f64>,
}

impl<'a> PrefixMass<'a> {
    fn new(grid: &'a GridDomain, masses: &[f64]) -> Result<Self> {
        let table = match grid.dim() {
            1 => {
                let n = grid.shape()[0];
                let mut t = vec![0.0; n + 1];
                for i in 0..n {
                    t[i + 1] = t[i] + masses[i];
                }
                t
            }
            2 => {
                let (nx, ny) = (grid.shape()[0], grid.shape()[1]);
                let w = ny + 1;
                let mut t = vec![0.0; (nx + 1) * w];
                for i in 0..nx {
                    for j in 0..ny {
                        let m = masses[grid.index(&[i, j])];
                        t[(i + 1) * w + j + 1] =
                            m + t[i * w + j + 1] + t[(i + 1) * w + j] - t[i * w + j];
                    }
                }
                t
            }
            d => {
                return Err(AnalysisError::InvalidParameter(format!(
                    "ball masses support dimensions 1 and 2, got {d}"
                )))
            }
        };
        Ok(Self { grid, table })
    }

    /// Index range of cells whose centers fall in [x - r, x + r] on `axis`.
    fn axis_range(&self, axis: usize, x: f64, r: f64) -> (usize, usize) {
        let h = self.grid.h();
        let o = self.grid.origin()[axis];
        let n = self.grid.shape()[axis];
        let lo = ((x - r - o) / h - 0.5).ceil().max(0.0) as usize;
        let hi = ((x + r - o) / h - 0.5).floor().min(n as f64 - 1.0);
        if hi < 0.0 {
            (1, 0)
        } else {
            (lo, hi as usize)
        }
    }

    fn ball_mass(&self, center: &[f64], r: f64) -> f64 {
        match self.grid.dim() {
            1 => {
                let (lo, hi) = self.axis_range(0, center[0], r);
                if lo > hi {
                    0.0
                } else {
                    self.table[hi + 1] - self.table[lo]
                }
            }
            _ => {
                let (ilo, ihi) = self.axis_range(0, center[0], r);
                let (jlo, jhi) = self.axis_range(1, center[1], r);
                if ilo > ihi || jlo > jhi {
                    return 0.0;
                }
                let w = self.grid.shape()[1] + 1;
                self.table[(ihi + 1) * w + jhi + 1] - self.table[ilo * w + jhi + 1]
                    - self.table[(ihi + 1) * w + jlo]
                    + self.table[ilo * w + jlo]
            }
        }
    }
}

/// Where ball centers are placed for ensemble moment fits. All centers
/// keep a margin of a quarter of the extent from the boundary, so the
/// largest admissible ball never leaves the domain.
#[derive(Debug, Clone, Copy)]
pub enum CenterPolicy {
    /// Single ball at the domain midpoint.
    DomainCenter,
    /// `k` points per axis, evenly spread over the central half.
    InteriorLattice(usize),
}

fn centers_for(policy: CenterPolicy, grid: &GridDomain) -> Result<Vec<Vec<f64>>> {
    let d = grid.dim();
    let mid: Vec<f64> = (0..d)
        .map(|a| grid.origin()[a] + 0.5 * grid.extent(a))
        .collect();
    match policy {
        CenterPolicy::DomainCenter => Ok(vec![mid]),
        CenterPolicy::InteriorLattice(k) => {
            if k == 0 {
                return Err(AnalysisError::InvalidParameter(
                    "interior lattice needs at least one point per axis".into(),
                ));
            }
            if k == 1 {
                return Ok(vec![mid]);
            }
            let axis_points: Vec<Vec<f64>> = (0..d)
                .map(|a| {
                    (0..k)
                        .map(|i| {
                            grid.origin()[a]
                                + grid.extent(a) * (0.25 + 0.5 * i as f64 / (k - 1) as f64)
                        })
                        .collect()
                })
                .collect();
            let mut points = vec![Vec::new()];
            for axis in axis_points {
                let mut next = Vec::with_capacity(points.len() * axis.len());
                for p in &points {
                    for &x in &axis {
                        let mut q = p.clone();
                        q.push(x);
                        next.push(q);
                    }
                }
                points = next;
            }
            Ok(points)
        }
    }
}

/// Keeps the radii that resolve more than a few cells and fit inside
/// the center margin; the scaling window is [8h, extent/4].
fn usable_radii(radii: &[f64], grid: &GridDomain) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AnalysisError::InvalidParameter(
            "radii must be strictly decreasing".into(),
        ));
    }
    let min_extent = (0..grid.dim())
        .map(|a| grid.extent(a))
        .fold(f64::INFINITY, f64::min);
    let (lo, hi) = (8.0 * grid.h(), 0.25 * min_extent);
    let usable: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r.is_finite() && r >= lo && r <= hi)
        .collect();
    if usable.len() < 4 {
        return Err(AnalysisError::InvalidParameter(format!(
            "fewer than 4 usable radii in [{lo:.3e}, {hi:.3e}]: {} of {} supplied",
            usable.len(),
            radii.len()
        )));
    }
    Ok(usable)
}

/// Result of a structure-exponent fit: per-order ball-mass moments over
/// the radius ladder and the log-log slope against the closed form.
#[derive(Debug, Clone)]
pub struct MomentScalingFit {
    pub q_list: Vec<f64>,
    pub radii: Vec<f64>,
    /// `moments[qi][ri]`: ensemble mean of the center-averaged ball mass
    /// raised to `q_list[qi]` at radius `radii[ri]`.
    pub moments: Vec<Vec<f64>>,
    pub moment_stderrs: Vec<Vec<f64>>,
    pub xi_hat: Vec<f64>,
    pub xi_stderr: Vec<f64>,
    pub xi_theory: Vec<f64>,
    pub r_squared: Vec<f64>,
    pub n_replicas: usize,
    pub n_centers: usize,
}

/// Fits E[M(B_r)^q] ~ r^xi(q) over an ensemble of measures sharing one
/// grid. Ball masses are averaged over the centers within a replica,
/// so the standard errors are replica-level.
///
/// Requested orders must sit strictly below the moment threshold
/// 2d/gamma^2; at least 4 radii must survive the [8h, extent/4] window.
pub fn fit_structure_exponent(
    ensemble: &[ChaosMeasure],
    q_list: &[f64],
    radii: &[f64],
    policy: CenterPolicy,
) -> Result<MomentScalingFit> {
    let first = ensemble.first().ok_or_else(|| {
        AnalysisError::TooFewReplicas {
            needed: 1,
            got: 0,
        }
    })?;
    let grid = &first.grid;
    if ensemble.iter().any(|m| m.grid != *grid) {
        return Err(AnalysisError::MismatchedEnsembles(
            "all measures must share one grid".into(),
        ));
    }
    let gamma = first.gamma;
    let d = grid.dim();
    let threshold = moment_threshold(gamma, d);
    if let Some(&bad) = q_list.iter().find(|&&q| q >= threshold) {
        return Err(AnalysisError::InvalidParameter(format!(
            "moment order {bad} is at or above the divergence threshold {threshold}"
        )));
    }
    let radii = usable_radii(radii, grid)?;
    let centers = centers_for(policy, grid)?;

    // per_replica[rep][qi][ri]: center-averaged q-th power of ball mass.
    let mut per_replica = Vec::with_capacity(ensemble.len());
    for measure in ensemble {
        let prefix = PrefixMass::new(grid, &measure.cell_masses)?;
        let mut rows = vec![vec![0.0; radii.len()]; q_list.len()];
        for c in &centers {
            for (ri, &r) in radii.iter().enumerate() {
                let mass = prefix.ball_mass(c, r);
                for (qi, &q) in q_list.iter().enumerate() {
                    rows[qi][ri] += if q == 0.0 { 1.0 } else { mass.powf(q) };
                }
            }
        }
        for row in &mut rows {
            for v in row.iter_mut() {
                *v /= centers.len() as f64;
            }
        }
        per_replica.push(rows);
    }

    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut moments = Vec::new();
    let mut moment_stderrs = Vec::new();
    let mut xi_hat = Vec::new();
    let mut xi_stderr = Vec::new();
    let mut r_squared = Vec::new();
    for (qi, &q) in q_list.iter().enumerate() {
        let mut row_mean = Vec::with_capacity(radii.len());
        let mut row_err = Vec::with_capacity(radii.len());
        for ri in 0..radii.len() {
            let samples: Vec<f64> = per_replica.iter().map(|rows| rows[qi][ri]).collect();
            row_mean.push(mean(&samples));
            row_err.push(stderr_of_mean(&samples));
        }
        if row_mean.iter().any(|&m| !(m > 0.0)) {
            return Err(AnalysisError::InvalidParameter(format!(
                "nonpositive ball-mass moment at q = {q}; ensemble too degenerate to fit"
            )));
        }
        let log_m: Vec<f64> = row_mean.iter().map(|m| m.ln()).collect();
        let fit = ols(&log_r, &log_m)?;
        moments.push(row_mean);
        moment_stderrs.push(row_err);
        xi_hat.push(fit.slope);
        xi_stderr.push(fit.slope_stderr);
        r_squared.push(fit.r_squared);
    }
    Ok(MomentScalingFit {
        q_list: q_list.to_vec(),
        xi_theory: q_list
            .iter()
            .map(|&q| structure_exponent(gamma, d, q))
            .collect(),
        radii,
        moments,
        moment_stderrs,
        xi_hat,
        xi_stderr,
        r_squared,
        n_replicas: ensemble.len(),
        n_centers: centers.len(),
    })
}

/// Per-point mass exponents mu(B_r(x)) ~ r^alpha from one measure.
///
/// Points whose largest ball leaves the domain, or whose smallest ball
/// carries no mass, are skipped (slope `None`).
#[derive(Debug, Clone)]
pub struct LocalExponentField {
    pub points: Vec<Vec<f64>>,
    pub slopes: Vec<Option<f64>>,
    pub r_squared: Vec<Option<f64>>,
    pub radii: Vec<f64>,
}

impl LocalExponentField {
    /// Number of points that produced a slope.
    pub fn evaluated(&self) -> usize {
        self.slopes.iter().flatten().count()
    }

    /// Fraction of evaluated points whose slope lands within `tol` of
    /// `target`.
    pub fn classified_fraction(&self, target: f64, tol: f64) -> f64 {
        let n = self.evaluated();
        if n == 0 {
            return 0.0;
        }
        let hits = self
            .slopes
            .iter()
            .flatten()
            .filter(|&&s| (s - target).abs() <= tol)
            .count();
        hits as f64 / n as f64
    }
}

pub fn local_exponent(
    measure: &ChaosMeasure,
    points: &[Vec<f64>],
    radii: &[f64],
) -> Result<LocalExponentField> {
    let grid = &measure.grid;
    let radii = usable_radii(radii, grid)?;
    let r_max = radii[0];
    let prefix = PrefixMass::new(grid, &measure.cell_masses)?;
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut slopes = Vec::with_capacity(points.len());
    let mut r2 = Vec::with_capacity(points.len());
    for p in points {
        if p.len() != grid.dim() {
            return Err(AnalysisError::InvalidParameter(format!(
                "point has dimension {}, grid has {}",
                p.len(),
                grid.dim()
            )));
        }
        let inside = (0..grid.dim()).all(|a| {
            let o = grid.origin()[a];
            p[a] - r_max >= o && p[a] + r_max <= o + grid.extent(a)
        });
        if !inside {
            slopes.push(None);
            r2.push(None);
            continue;
        }
        let masses: Vec<f64> = radii.iter().map(|&r| prefix.ball_mass(p, r)).collect();
        if masses.iter().any(|&m| !(m > 0.0)) {
            slopes.push(None);
            r2.push(None);
            continue;
        }
        let log_m: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
        let fit = ols(&log_r, &log_m)?;
        slopes.push(Some(fit.slope));
        r2.push(Some(fit.r_squared));
    }
    Ok(LocalExponentField {
        points: points.to_vec(),
        slopes,
        r_squared: r2,
        radii,
    })
}

/// One order of the exact scale-invariance check: the ratio
/// E[M(lambda A)^q] / (lambda^xi(q) E[M(A)^q]) with its delta-method
/// standard error. Equals one for exactly log-correlated fields.
#[derive(Debug, Clone)]
pub struct ScaleInvarianceRow {
    pub q: f64,
    pub ratio: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct ScaleInvarianceReport {
    pub lambda: f64,
    pub rows: Vec<ScaleInvarianceRow>,
    pub n_replicas: usize,
}

/// `pairs` holds per-replica masses (M(A), M(lambda A)) of a set and
/// its rescaling by `lambda` inside one field.
pub fn scale_invariance_test(
    pairs: &[(f64, f64)],
    lambda: f64,
    gamma: f64,
    d: usize,
    q_list: &[f64],
) -> Result<ScaleInvarianceReport> {
    if pairs.len() < 100 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 100,
            got: pairs.len(),
        });
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    let threshold = moment_threshold(gamma, d);
    let n = pairs.len() as f64;
    let mut rows = Vec::with_capacity(q_list.len());
    for &q in q_list {
        if q >= threshold {
            return Err(AnalysisError::InvalidParameter(format!(
                "moment order {q} is at or above the divergence threshold {threshold}"
            )));
        }
        if q < 0.0 && pairs.iter().any(|&(a, b)| a <= 0.0 || b <= 0.0) {
            return Err(AnalysisError::InvalidParameter(
                "negative orders require strictly positive masses".into(),
            ));
        }
        let a: Vec<f64> = pairs.iter().map(|p| p.0.powf(q)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1.powf(q)).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        if !(ma > 0.0 && mb > 0.0) {
            return Err(AnalysisError::InvalidParameter(format!(
                "degenerate moments at q = {q}"
            )));
        }
        let scale = lambda.powf(structure_exponent(gamma, d, q));
        let ratio = mb / (scale * ma);
        let (va, vb) = (variance(&a), variance(&b));
        let cov = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / (n - 1.0);
        let rel_var =
            (va / (ma * ma) + vb / (mb * mb) - 2.0 * cov / (ma * mb)).max(0.0) / n;
        rows.push(ScaleInvarianceRow {
            q,
            ratio,
            stderr: ratio * rel_var.sqrt(),
        });
    }
    Ok(ScaleInvarianceReport {
        lambda,
        rows,
        n_replicas: pairs.len(),
    })
}

/// Drift of the running field seen from a point rooted in the tilted
/// measure M_(q gamma), fitted against ln(1/eps) across the ladder.
///
/// The target slope is q gamma; the per-level increment variances are
/// reported so the tilt can be checked to move only the mean.
#[derive(Debug, Clone)]
pub struct ThickPointReport {
    pub drift: f64,
    pub drift_stderr: f64,
    pub drift_target: f64,
    pub r_squared: f64,
    /// Mass-weighted mean field at the rooted points, one entry per level.
    pub level_means: Vec<f64>,
    pub level_log_scales: Vec<f64>,
    /// Mass-weighted variance of the level-to-level field increment at
    /// the rooted points, one entry per ladder step.
    pub increment_variances: Vec<f64>,
    pub n_rooted: usize,
}

pub fn thick_point_drift(
    ladders: &[RefinementLadder],
    gamma: f64,
    base_q: f64,
    n_rooted_per_replica: usize,
    master: u64,
) -> Result<ThickPointReport> {
    if ladders.is_empty() {
        return Err(AnalysisError::TooFewReplicas { needed: 1, got: 0 });
    }
    if n_rooted_per_replica == 0 {
        return Err(AnalysisError::InvalidParameter(
            "need at least one rooted point per replica".into(),
        ));
    }
    if !(gamma >= 0.0) || !(base_q >= 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "gamma and base_q must be nonnegative".into(),
        ));
    }
    let n_levels = ladders[0].len();
    if n_levels < 3 {
        return Err(AnalysisError::InvalidParameter(format!(
            "drift fit needs at least 3 ladder levels, got {n_levels}"
        )));
    }
    let epss: Vec<f64> = ladders[0].levels().iter().map(|f| f.eps).collect();
    if ladders
        .iter()
        .any(|l| l.len() != n_levels || l.levels().iter().zip(&epss).any(|(f, &e)| f.eps != e))
    {
        return Err(AnalysisError::MismatchedEnsembles(
            "all ladders must share the same cutoff sequence".into(),
        ));
    }
    let tilt = base_q * gamma;

    // Accumulate mass-weighted first and second moments per level and
    // per increment; replica weight is the total tilted mass, shared
    // equally by its rooted points.
    let mut weight_total = 0.0;
    let mut level_sum = vec![0.0; n_levels];
    let mut inc_sum = vec![0.0; n_levels - 1];
    let mut inc_sq_sum = vec![0.0; n_levels - 1];
    let mut n_rooted = 0usize;
    for (r, ladder) in ladders.iter().enumerate() {
        let finest = ladder.finest();
        let tilted = build_subcritical(finest, tilt)?;
        let w_replica = tilted.total_mass();
        if !(w_replica > 0.0) {
            continue;
        }
        let mut rng = replica_rng(master, r as u64);
        let w_point = w_replica / n_rooted_per_replica as f64;
        for _ in 0..n_rooted_per_replica {
            let (cell, _) = sample_rooted_point(&tilted, &mut rng)?;
            n_rooted += 1;
            weight_total += w_point;
            let mut prev = 0.0;
            for (l, field) in ladder.levels().iter().enumerate() {
                let x = field.values[cell];
                level_sum[l] += w_point * x;
                if l > 0 {
                    let dx = x - prev;
                    inc_sum[l - 1] += w_point * dx;
                    inc_sq_sum[l - 1] += w_point * dx * dx;
                }
                prev = x;
            }
        }
    }
    if !(weight_total > 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "all replicas carried zero tilted mass".into(),
        ));
    }
    let level_means: Vec<f64> = level_sum.iter().map(|s| s / weight_total).collect();
    let level_log_scales: Vec<f64> = epss.iter().map(|e| (1.0 / e).ln()).collect();
    let increment_variances: Vec<f64> = inc_sum
        .iter()
        .zip(&inc_sq_sum)
        .map(|(s, sq)| (sq / weight_total - (s / weight_total).powi(2)).max(0.0))
        .collect();
    let fit = ols(&level_log_scales, &level_means)?;
    Ok(ThickPointReport {
        drift: fit.slope,
        drift_stderr: fit.slope_stderr,
        drift_target: tilt,
        r_squared: fit.r_squared,
        level_means,
        level_log_scales,
        increment_variances,
        n_rooted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::Regime;
    use crate::fields::{BandFamily, CutoffLadder, DenseBandLadder};
    use crate::kernels::{CovarianceKernel, ExactLogCutoff, StarCutoff, StarSeed};
    use crate::rng::{run_replicas, SeedLineage};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn lebesgue_measure(grid: GridDomain) -> ChaosMeasure {
        let n = grid.n_cells();
        let w = grid.cell_volume();
        ChaosMeasure {
            gamma: 0.0,
            regime: Regime::Subcritical,
            cell_masses: vec![w; n],
            eps: 0.25,
            weights: vec![w; n],
            negative_fraction: None,
            grid,
        }
    }

    fn interval_ensemble(
        n: usize,
        eps: f64,
        gamma: f64,
        n_replicas: usize,
        master: u64,
    ) -> Vec<ChaosMeasure> {
        let grid = GridDomain::unit_interval(n).unwrap();
        let ladder = CutoffLadder::new(vec![eps]).unwrap();
        let sampler =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, ladder).unwrap();
        run_replicas(n_replicas, |r| {
            let fields = sampler.sample_ladder(SeedLineage::new(master, r));
            build_subcritical(fields.finest(), gamma).unwrap()
        })
    }

    #[test]
    fn prefix_table_reproduces_brute_force_rectangle_sums() {
        let grid = GridDomain::unit_square(16).unwrap();
        let mut rng = replica_rng(42, 0);
        let masses: Vec<f64> = (0..grid.n_cells())
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        let prefix = PrefixMass::new(&grid, &masses).unwrap();
        for (center, r) in [
            (vec![0.5, 0.5], 0.25),
            (vec![0.3, 0.72], 0.11),
            (vec![0.06, 0.94], 0.2),
            (vec![0.5, 0.5], 0.002),
        ] {
            let brute: f64 = (0..grid.n_cells())
                .filter(|&i| {
                    grid.center(i)
                        .iter()
                        .zip(&center)
                        .all(|(c, x)| (c - x).abs() <= r)
                })
                .map(|i| masses[i])
                .sum();
            assert_relative_eq!(
                prefix.ball_mass(&center, r),
                brute,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn lebesgue_ball_masses_scale_linearly_in_each_order() {
        let grid = GridDomain::unit_interval(512).unwrap();
        let ensemble = vec![lebesgue_measure(grid.clone()), lebesgue_measure(grid)];
        let radii = [0.25, 0.125, 0.0625, 0.03125];
        let fit = fit_structure_exponent(
            &ensemble,
            &[0.0, 1.0, 2.0],
            &radii,
            CenterPolicy::InteriorLattice(3),
        )
        .unwrap();
        assert_abs_diff_eq!(fit.xi_hat[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.xi_hat[1], 1.0, epsilon = 0.03);
        assert_abs_diff_eq!(fit.xi_hat[2], 2.0, epsilon = 0.06);
        assert_eq!(fit.xi_theory, vec![0.0, 1.0, 2.0]);
        assert_eq!(fit.n_centers, 3);
        for r2 in &fit.r_squared[1..] {
            assert!(*r2 > 0.999);
        }
    }

    #[test]
    fn structure_exponent_fit_matches_theory_on_the_interval() {
        let gamma = 0.5;
        let ensemble = interval_ensemble(512, 1.0 / 128.0, gamma, 300, 4242);
        let radii = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
        let fit = fit_structure_exponent(
            &ensemble,
            &[1.0, 2.0],
            &radii,
            CenterPolicy::InteriorLattice(3),
        )
        .unwrap();
        // xi(1) = 1 exactly (mean measure is Lebesgue); xi(2) = 1.75.
        assert!(
            (fit.xi_hat[0] - 1.0).abs() < 0.05,
            "xi(1) = {} +- {}",
            fit.xi_hat[0],
            fit.xi_stderr[0]
        );
        assert!(
            (fit.xi_hat[1] - fit.xi_theory[1]).abs() < 0.15,
            "xi(2) = {} vs {}",
            fit.xi_hat[1],
            fit.xi_theory[1]
        );
        assert!(fit.r_squared[0] > 0.99);
    }

    #[test]
    fn radius_and_order_validation() {
        let ensemble = vec![lebesgue_measure(GridDomain::unit_interval(64).unwrap())];
        // Only 1/4 and 1/8 survive the [8h, L/4] window on a 64-cell grid.
        let err = fit_structure_exponent(
            &ensemble,
            &[1.0],
            &[0.25, 0.125, 0.0625, 0.03125],
            CenterPolicy::DomainCenter,
        )
        .unwrap_err();
        assert!(matches!(err, AnalysisError::InvalidParameter(_)));
        let err = fit_structure_exponent(
            &ensemble,
            &[1.0],
            &[0.125, 0.25],
            CenterPolicy::DomainCenter,
        )
        .unwrap_err();
        assert!(matches!(err, AnalysisError::InvalidParameter(_)));
        assert!(fit_structure_exponent(&[], &[1.0], &[0.25], CenterPolicy::DomainCenter).is_err());

        let subcritical = interval_ensemble(128, 0.25, 1.0, 2, 9);
        let err = fit_structure_exponent(
            &subcritical,
            &[2.0],
            &[0.25, 0.2, 0.125, 0.0625],
            CenterPolicy::DomainCenter,
        )
        .unwrap_err();
        assert!(matches!(err, AnalysisError::InvalidParameter(_)));
    }

    #[test]
    fn local_exponent_is_the_dimension_for_lebesgue() {
        let measure = lebesgue_measure(GridDomain::unit_square(256).unwrap());
        let radii = [0.25, 0.125, 0.0625, 0.03125];
        let points = vec![vec![0.5, 0.5], vec![0.3, 0.7], vec![0.05, 0.5]];
        let field = local_exponent(&measure, &points, &radii).unwrap();
        assert_eq!(field.evaluated(), 2);
        assert!(field.slopes[2].is_none(), "boundary point must be skipped");
        for s in field.slopes.iter().flatten() {
            assert_abs_diff_eq!(*s, 2.0, epsilon = 0.05);
        }
        assert_abs_diff_eq!(field.classified_fraction(2.0, 0.1), 1.0);
    }

    #[test]
    fn rooted_points_carry_the_tilted_local_exponent() {
        // Points sampled from the measure itself see the thick-point
        // exponent d + (1/2 - q) gamma^2 with q = 1, not the
        // Lebesgue-typical d + gamma^2/2.
        let gamma = 0.6;
        let target = super::super::spectra::local_exponent_target(gamma, 1, 1.0);
        let ensemble = interval_ensemble(256, 1.0 / 64.0, gamma, 600, 2026);
        let radii = [0.25, 0.125, 0.0625, 0.03125];
        let mut slope_sum = 0.0;
        let mut weight = 0.0;
        for (r, measure) in ensemble.iter().enumerate() {
            let mut rng = replica_rng(7000, r as u64);
            let mut points = Vec::new();
            for _ in 0..2 {
                let (_, p) = sample_rooted_point(measure, &mut rng).unwrap();
                points.push(p);
            }
            let field = local_exponent(measure, &points, &radii).unwrap();
            let w = measure.total_mass() / 2.0;
            for s in field.slopes.iter().flatten() {
                slope_sum += w * s;
                weight += w;
            }
        }
        let mean_slope = slope_sum / weight;
        assert!(
            (mean_slope - target).abs() < 0.12,
            "rooted exponent {mean_slope} vs target {target}"
        );
    }

    #[test]
    fn exact_log_masses_are_scale_invariant_and_star_masses_are_not() {
        let gamma = 0.5;
        let lambda: f64 = 0.5;
        let n = 256;
        let grid = GridDomain::unit_interval(n).unwrap();
        let in_a = |x: f64| (x - 0.5).abs() <= 0.125;
        let in_b = |x: f64| (x - 0.5).abs() <= 0.0625;

        // Quadrature oracle for the q = 2 ratio under the exact-log
        // kernel: E[M(B)^2] = sum over cell pairs of h^2 exp(gamma^2 K).
        let eps = 1.0 / 64.0;
        let kernel = ExactLogCutoff::new(1, 1.0, eps).unwrap();
        let second = |pred: &dyn Fn(f64) -> bool, k: &dyn CovarianceKernel| {
            let cells: Vec<usize> =
                (0..n).filter(|&i| pred(grid.center(i)[0])).collect();
            let h = grid.h();
            let mut s = 0.0;
            for &i in &cells {
                for &j in &cells {
                    let kij = k.eval(&grid.center(i), &grid.center(j)).unwrap();
                    s += h * h * (gamma * gamma * kij).exp();
                }
            }
            s
        };
        let xi2 = structure_exponent(gamma, 1, 2.0);
        let oracle_ratio =
            second(&in_b, &kernel) / (lambda.powf(xi2) * second(&in_a, &kernel));
        assert!(
            (oracle_ratio - 1.0).abs() < 0.03,
            "exact-log oracle ratio {oracle_ratio}"
        );

        // The star kernel deviates from a pure log by a linear term, so
        // the same ratio drifts once the sets are wide enough.
        let star = StarCutoff::new(StarSeed::Exponential, eps).unwrap();
        let gamma_star = 1.0;
        let in_a_wide = |x: f64| (x - 0.5).abs() <= 0.25;
        let second_star = |pred: &dyn Fn(f64) -> bool| {
            let cells: Vec<usize> =
                (0..n).filter(|&i| pred(grid.center(i)[0])).collect();
            let h = grid.h();
            let mut s = 0.0;
            for &i in &cells {
                for &j in &cells {
                    let kij = star.eval(&grid.center(i), &grid.center(j)).unwrap();
                    s += h * h * (gamma_star * gamma_star * kij).exp();
                }
            }
            s
        };
        let xi2_star = structure_exponent(gamma_star, 1, 2.0);
        let star_ratio =
            second_star(&in_a) / (lambda.powf(xi2_star) * second_star(&in_a_wide));
        assert!(
            (star_ratio - 1.0).abs() > 0.05,
            "star ratio {star_ratio} should drift"
        );

        // Monte Carlo ratios at q = 1 and q = 2 agree with exact scale
        // invariance within error bars.
        let ensemble = interval_ensemble(n, eps, gamma, 2000, 11);
        let pairs: Vec<(f64, f64)> = ensemble
            .iter()
            .map(|m| {
                (
                    m.mass_where(|x| in_a(x[0])),
                    m.mass_where(|x| in_b(x[0])),
                )
            })
            .collect();
        let report = scale_invariance_test(&pairs, lambda, gamma, 1, &[1.0, 2.0]).unwrap();
        for row in &report.rows {
            let band = (3.0 * row.stderr).max(0.02);
            assert!(
                (row.ratio - 1.0).abs() < band,
                "q = {}: ratio {} +- {}",
                row.q,
                row.ratio,
                row.stderr
            );
        }
    }

    #[test]
    fn scale_invariance_validation() {
        let pairs = vec![(1.0, 0.5); 200];
        assert!(scale_invariance_test(&pairs, 1.5, 0.5, 1, &[1.0]).is_err());
        assert!(scale_invariance_test(&pairs[..50], 0.5, 0.5, 1, &[1.0]).is_err());
        assert!(scale_invariance_test(&pairs, 0.5, 1.0, 1, &[2.0]).is_err());
    }

    #[test]
    fn thick_point_drift_recovers_the_tilt() {
        let gamma = 0.6;
        let grid = GridDomain::unit_interval(256).unwrap();
        let ladder =
            CutoffLadder::new(vec![0.25, 0.125, 0.0625, 0.03125, 0.015625]).unwrap();
        let sampler =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, ladder).unwrap();
        let ladders: Vec<_> = run_replicas(1600, |r| {
            sampler.sample_ladder(SeedLineage::new(606, r))
        });

        let report = thick_point_drift(&ladders, gamma, 1.0, 2, 77).unwrap();
        assert_abs_diff_eq!(report.drift_target, gamma);
        assert!(
            (report.drift - gamma).abs() < 0.1,
            "drift {} vs {}",
            report.drift,
            gamma
        );
        // Dyadic exact-log bands have variance ln 2 at a point; the tilt
        // moves only the mean.
        let ln2 = std::f64::consts::LN_2;
        for v in &report.increment_variances {
            assert!(
                (v - ln2).abs() < 0.15 * ln2,
                "increment variance {v} vs {ln2}"
            );
        }
        assert_eq!(report.n_rooted, 3200);

        let flat = thick_point_drift(&ladders, gamma, 0.0, 2, 78).unwrap();
        assert!(
            flat.drift.abs() < 0.06,
            "untilted drift {} should vanish",
            flat.drift
        );
    }

    #[test]
    fn thick_point_validation() {
        let grid = GridDomain::unit_interval(64).unwrap();
        let ladder = CutoffLadder::new(vec![0.25, 0.125]).unwrap();
        let sampler =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, ladder).unwrap();
        let ladders = vec![sampler.sample_ladder(SeedLineage::new(1, 0))];
        assert!(matches!(
            thick_point_drift(&ladders, 0.5, 1.0, 1, 0),
            Err(AnalysisError::InvalidParameter(_))
        ));
        assert!(thick_point_drift(&[], 0.5, 1.0, 1, 0).is_err());
        let deep = CutoffLadder::new(vec![0.25, 0.125, 0.0625]).unwrap();
        let sampler3 =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, deep).unwrap();
        let ok = vec![sampler3.sample_ladder(SeedLineage::new(1, 0))];
        assert!(thick_point_drift(&ok, 0.5, 1.0, 0, 0).is_err());
    }
}
