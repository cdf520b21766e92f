//! Report-style diagnostics shared by all field constructions.
//!
//! [`smoothness_check`] measures empirical structure functions
//! `D(s, eps) = E[(X_eps(x) - X_eps(y))^2]` for separations `s <= eps` at
//! every ladder level and fits a single envelope `C (s/eps)^alpha` across
//! levels. A construction that is smooth below its cutoff produces a
//! positive rate `alpha` and a stable envelope; a construction whose small
//! scales are unresolved or level-dependent does not.
//!
//! [`ladder_consistency_check`] verifies the two bookkeeping properties a
//! refinement ladder promises: increments of distinct levels are
//! uncorrelated, and the stored variance profile matches the sampled
//! fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rng::{run_replicas, SeedLineage};
use crate::stats;

use super::{FieldError, RefinementLadder, Result};

/// Relative headroom of the envelope constant over the fitted prefactor.
const ENVELOPE_MARGIN: f64 = 1.25;
/// Largest admissible fraction of buckets above the envelope.
const VIOLATION_BUDGET: f64 = 0.05;
/// Structure functions below this level count as identically zero.
const DEGENERATE_FLOOR: f64 = 1e-12;
/// Separation buckets per ladder level (geometrically spaced).
const BUCKETS_PER_LEVEL: usize = 12;

/// One ladder level's slice of a smoothness report.
#[derive(Debug, Clone)]
pub struct SmoothnessLevel {
    pub eps: f64,
    /// Separation buckets measured at this level.
    pub n_buckets: usize,
    /// Fraction of buckets above the fitted envelope.
    pub violation_fraction: f64,
    /// Largest ratio of a measured bucket to the envelope.
    pub max_ratio: f64,
    /// Envelope constant at the linear rate: `max_s D(s, eps) * eps / s`.
    pub linear_rate_constant: f64,
}

/// Outcome of [`smoothness_check`].
#[derive(Debug, Clone)]
pub struct SmoothnessReport {
    /// Fitted structure-function rate.
    pub alpha_hat: f64,
    /// Fitted prefactor of `D = C (s/eps)^alpha`.
    pub c_fit: f64,
    /// Envelope constant actually used for the violation count.
    pub c_envelope: f64,
    pub levels: Vec<SmoothnessLevel>,
    /// All structure functions vanished, so the fit is vacuous.
    pub degenerate: bool,
    pub pass: bool,
}

/// Mean squared increment along `axis` at a separation of `m` cells,
/// averaged over every aligned pair in the grid.
fn axis_mean_sq_increment(values: &[f64], ns: &[usize], axis: usize, m: usize) -> f64 {
    let stride: usize = ns[axis + 1..].iter().product();
    let span = ns[axis];
    let outer: usize = ns[..axis].iter().product();
    let inner = stride;
    let mut sum = 0.0;
    let mut count = 0usize;
    for o in 0..outer {
        let base = o * span * stride;
        for i in 0..span - m {
            for j in 0..inner {
                let a = base + i * stride + j;
                let d = values[a] - values[a + m * stride];
                sum += d * d;
                count += 1;
            }
        }
    }
    sum / count as f64
}

/// Geometrically spaced cell separations `1 ..= m_max`, deduplicated.
fn separation_buckets(m_max: usize) -> Vec<usize> {
    if m_max <= BUCKETS_PER_LEVEL {
        return (1..=m_max).collect();
    }
    let mut out = Vec::with_capacity(BUCKETS_PER_LEVEL);
    let ratio = (m_max as f64).powf(1.0 / (BUCKETS_PER_LEVEL - 1) as f64);
    for i in 0..BUCKETS_PER_LEVEL {
        let m = ratio.powi(i as i32).round() as usize;
        let m = m.clamp(1, m_max);
        if out.last() != Some(&m) {
            out.push(m);
        }
    }
    out
}

/// Empirical modulus-of-continuity check below the cutoff.
///
/// `sample` draws one ladder per replica; all replicas must share the grid
/// and cutoff schedule. Structure functions are averaged over axis-aligned
/// pairs with separation at most the level cutoff, pooled across levels,
/// and fitted by least squares in log-log coordinates. The check passes
/// when the fitted rate is positive and a single envelope
/// `C (s/eps)^alpha` with 25% headroom covers all levels with at most 5%
/// of buckets in violation.
pub fn smoothness_check<F>(sample: F, master: u64, n_replicas: usize) -> Result<SmoothnessReport>
where
    F: Fn(SeedLineage) -> RefinementLadder + Sync,
{
    if n_replicas < 2 {
        return Err(FieldError::InvalidParameter(
            "smoothness check needs at least 2 replicas".into(),
        ));
    }
    let probe = sample(SeedLineage::new(master, 0));
    let grid = probe.finest().grid.clone();
    let h = grid.h();
    // (level, eps, axis, m) buckets, fixed across replicas.
    let mut buckets: Vec<(usize, f64, usize, usize)> = Vec::new();
    for (l, level) in probe.levels().iter().enumerate() {
        let m_max = (level.eps / h + 1e-9).floor() as usize;
        let m_max = m_max.min(*grid.shape().iter().max().unwrap() - 1);
        if m_max < 1 {
            continue;
        }
        for axis in 0..grid.dim() {
            for m in separation_buckets(m_max.min(grid.shape()[axis] - 1)) {
                buckets.push((l, level.eps, axis, m));
            }
        }
    }
    if buckets.is_empty() {
        return Err(FieldError::InvalidParameter(
            "no separations at or below the cutoff fit on this grid".into(),
        ));
    }
    let per_replica = run_replicas(n_replicas, |r| {
        let ladder = sample(SeedLineage::new(master, r));
        buckets
            .iter()
            .map(|&(l, _, axis, m)| {
                let level = ladder.level(l);
                axis_mean_sq_increment(&level.values, level.grid.shape(), axis, m)
            })
            .collect::<Vec<f64>>()
    });
    let mut d_mean = vec![0.0; buckets.len()];
    for row in &per_replica {
        for (acc, v) in d_mean.iter_mut().zip(row) {
            *acc += v / n_replicas as f64;
        }
    }

    let n_levels = probe.len();
    let mut levels: Vec<SmoothnessLevel> = probe
        .levels()
        .iter()
        .map(|lv| SmoothnessLevel {
            eps: lv.eps,
            n_buckets: 0,
            violation_fraction: 0.0,
            max_ratio: 0.0,
            linear_rate_constant: 0.0,
        })
        .collect();

    if d_mean.iter().all(|&d| d < DEGENERATE_FLOOR) {
        return Ok(SmoothnessReport {
            alpha_hat: 0.0,
            c_fit: 0.0,
            c_envelope: 0.0,
            levels,
            degenerate: true,
            pass: true,
        });
    }

    let mut xs = Vec::with_capacity(buckets.len());
    let mut ys = Vec::with_capacity(buckets.len());
    for (&(_, eps, _, m), &d) in buckets.iter().zip(&d_mean) {
        if d < DEGENERATE_FLOOR {
            continue;
        }
        xs.push((m as f64 * h / eps).ln());
        ys.push(d.ln());
    }
    let fit = stats::ols(&xs, &ys).map_err(|e| {
        FieldError::InvalidParameter(format!("structure-function fit failed: {e}"))
    })?;
    let alpha_hat = fit.slope;
    let c_fit = fit.intercept.exp();
    let c_envelope = c_fit * ENVELOPE_MARGIN;

    let mut violations = vec![0usize; n_levels];
    let mut counts = vec![0usize; n_levels];
    for (&(l, eps, _, m), &d) in buckets.iter().zip(&d_mean) {
        let s_over_eps = m as f64 * h / eps;
        let envelope = c_envelope * s_over_eps.powf(alpha_hat);
        let ratio = if envelope > 0.0 { d / envelope } else { 0.0 };
        counts[l] += 1;
        if ratio > 1.0 {
            violations[l] += 1;
        }
        let level = &mut levels[l];
        level.n_buckets += 1;
        level.max_ratio = level.max_ratio.max(ratio);
        level.linear_rate_constant = level.linear_rate_constant.max(d / s_over_eps);
    }
    for (l, level) in levels.iter_mut().enumerate() {
        if counts[l] > 0 {
            level.violation_fraction = violations[l] as f64 / counts[l] as f64;
        }
    }
    let total_violations: usize = violations.iter().sum();
    let total_buckets: usize = counts.iter().sum();
    let pass = alpha_hat > 0.0
        && (total_violations as f64) <= VIOLATION_BUDGET * total_buckets as f64;

    Ok(SmoothnessReport {
        alpha_hat,
        c_fit,
        c_envelope,
        levels,
        degenerate: false,
        pass,
    })
}

/// Outcome of [`ladder_consistency_check`].
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub n_replicas: usize,
    /// Distinct-band point pairs whose correlation was measured.
    pub band_pairs_checked: usize,
    pub max_band_correlation: f64,
    /// `4 / sqrt(n_replicas)`.
    pub correlation_bound: f64,
    /// Largest relative gap between sampled and stored variance.
    pub max_variance_gap: f64,
    /// `5 sqrt(2 / n_replicas)` plus an absolute floor.
    pub variance_bound: f64,
    pub pass: bool,
}

/// Checks that distinct ladder increments are empirically uncorrelated on
/// randomly chosen point pairs and that the finest level's stored variance
/// profile matches the sampled fields.
///
/// Point pairs are drawn deterministically from `master` (stream 0, which
/// no replica uses), so the report is reproducible.
pub fn ladder_consistency_check<F>(
    sample: F,
    master: u64,
    n_replicas: usize,
    n_pairs: usize,
) -> Result<ConsistencyReport>
where
    F: Fn(SeedLineage) -> RefinementLadder + Sync,
{
    if n_replicas < 16 {
        return Err(FieldError::InvalidParameter(
            "consistency check needs at least 16 replicas".into(),
        ));
    }
    let probe = sample(SeedLineage::new(master, 0));
    let n_levels = probe.len();
    let n_cells = probe.finest().grid.n_cells();

    let mut pick = ChaCha8Rng::seed_from_u64(master);
    let mut pairs = Vec::with_capacity(n_pairs);
    if n_levels >= 2 {
        for _ in 0..n_pairs {
            let li = pick.random_range(0..n_levels);
            let lj = loop {
                let l = pick.random_range(0..n_levels);
                if l != li {
                    break l;
                }
            };
            let a = pick.random_range(0..n_cells);
            let b = pick.random_range(0..n_cells);
            pairs.push((li, a, lj, b));
        }
    }
    let n_var_points = n_pairs.min(n_cells);
    let var_points: Vec<usize> = (0..n_var_points)
        .map(|_| pick.random_range(0..n_cells))
        .collect();

    let mut needed_bands: Vec<usize> = pairs
        .iter()
        .flat_map(|&(li, _, lj, _)| [li, lj])
        .collect();
    needed_bands.sort_unstable();
    needed_bands.dedup();

    let rows = run_replicas(n_replicas, |r| {
        let ladder = sample(SeedLineage::new(master, r));
        let mut increments = std::collections::HashMap::new();
        for &l in &needed_bands {
            increments.insert(l, ladder.increment_values(l));
        }
        let mut row = Vec::with_capacity(2 * pairs.len() + var_points.len());
        for &(li, a, lj, b) in &pairs {
            row.push(increments[&li][a]);
            row.push(increments[&lj][b]);
        }
        let finest = ladder.finest();
        for &p in &var_points {
            row.push(finest.values[p]);
        }
        row
    });

    let column = |idx: usize| -> Vec<f64> { rows.iter().map(|row| row[idx]).collect() };

    let mut max_corr: f64 = 0.0;
    for (k, _) in pairs.iter().enumerate() {
        let u = column(2 * k);
        let v = column(2 * k + 1);
        let (mu, mv) = (stats::mean(&u), stats::mean(&v));
        let mut cov = 0.0;
        let mut vu = 0.0;
        let mut vv = 0.0;
        for (x, y) in u.iter().zip(&v) {
            cov += (x - mu) * (y - mv);
            vu += (x - mu) * (x - mu);
            vv += (y - mv) * (y - mv);
        }
        if vu > 1e-300 && vv > 1e-300 {
            max_corr = max_corr.max((cov / (vu * vv).sqrt()).abs());
        }
    }
    let correlation_bound = 4.0 / (n_replicas as f64).sqrt();

    let stored = probe.finest().variance.values().to_vec();
    let mut max_gap: f64 = 0.0;
    for (k, &p) in var_points.iter().enumerate() {
        let series = column(2 * pairs.len() + k);
        let emp = series.iter().map(|v| v * v).sum::<f64>() / series.len() as f64;
        let scale = stored[p].max(emp).max(1e-12);
        max_gap = max_gap.max((emp - stored[p]).abs() / scale);
    }
    let variance_bound = 5.0 * (2.0 / n_replicas as f64).sqrt() + 1e-9;

    let pass = max_corr <= correlation_bound && max_gap <= variance_bound;
    Ok(ConsistencyReport {
        n_replicas,
        band_pairs_checked: pairs.len(),
        max_band_correlation: max_corr,
        correlation_bound,
        max_variance_gap: max_gap,
        variance_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        CutoffLadder, GffLadderSampler, GridDomain, RefinementSampler, VarianceProfile,
    };
    use crate::kernels::RectangleDomain;
    use std::sync::Arc;

    #[test]
    fn exact_log_refinement_has_the_linear_rate() {
        // Below the cutoff the partial-sum kernel gives
        // E[(X(x) - X(y))^2] = 2 |x - y| / eps exactly, so the fitted
        // envelope is alpha = 1, C = 2.
        let grid = GridDomain::unit_interval(128).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 8).unwrap();
        let report =
            smoothness_check(|lineage| sampler.sample_ladder(lineage), 31, 300).unwrap();
        assert!(report.pass, "report: {report:?}");
        assert!(!report.degenerate);
        assert!(
            (report.alpha_hat - 1.0).abs() < 0.1,
            "alpha_hat = {}",
            report.alpha_hat
        );
        assert!(
            (report.c_fit - 2.0).abs() < 0.4,
            "c_fit = {}",
            report.c_fit
        );
    }

    #[test]
    fn gff_heat_bands_are_smooth_below_the_cutoff() {
        // Heat smoothing makes the field differentiable, so the measured
        // rate is the quadratic one; the linear-rate envelope constants
        // stay stable across levels, which is the bound the bands promise.
        let domain = RectangleDomain::new(1.0, 1.0).unwrap();
        let grid = GridDomain::unit_square(32).unwrap();
        let ladder = CutoffLadder::new(vec![0.125, 0.0625]).unwrap();
        let sampler = GffLadderSampler::new(domain, &grid, ladder, 24).unwrap();
        let report =
            smoothness_check(|lineage| sampler.sample_ladder(lineage), 32, 300).unwrap();
        assert!(report.pass, "report: {report:?}");
        assert!(
            report.alpha_hat > 1.0,
            "alpha_hat = {} should beat the linear rate",
            report.alpha_hat
        );
        let constants: Vec<f64> = report
            .levels
            .iter()
            .map(|l| l.linear_rate_constant)
            .collect();
        let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = constants.iter().cloned().fold(0.0, f64::max);
        assert!(
            hi / lo < 2.0,
            "linear-rate constants spread too far: {constants:?}"
        );
    }

    #[test]
    fn constant_field_passes_degenerately() {
        let grid = GridDomain::unit_interval(16).unwrap();
        let make = |lineage: SeedLineage| {
            let level = crate::fields::FieldRealization {
                grid: grid.clone(),
                values: vec![3.0; grid.n_cells()],
                eps: 0.5,
                variance: Arc::new(VarianceProfile::constant(0.0, grid.n_cells())),
                construction: crate::fields::ConstructionTag::LevelSum,
                lineage,
                level: 0,
            };
            RefinementLadder::new(vec![level])
        };
        let report = smoothness_check(make, 5, 8).unwrap();
        assert!(report.degenerate);
        assert!(report.pass);
    }

    #[test]
    fn independent_ladders_pass_consistency() {
        let grid = GridDomain::unit_interval(64).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 6).unwrap();
        let report =
            ladder_consistency_check(|lineage| sampler.sample_ladder(lineage), 77, 600, 20)
                .unwrap();
        assert!(report.pass, "report: {report:?}");
        assert_eq!(report.band_pairs_checked, 20);
        assert!(report.max_band_correlation <= report.correlation_bound);
    }

    #[test]
    fn duplicated_noise_fails_consistency() {
        // Level 1 reuses level 0's field, so the "increment" X_1 - X_0 of
        // one rung correlates perfectly with a shifted copy of itself.
        let grid = GridDomain::unit_interval(32).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 2).unwrap();
        let make = |lineage: SeedLineage| {
            let base = sampler.sample_partial(lineage, 2);
            let mut doubled = base.clone();
            doubled.values = base.values.iter().map(|v| 2.0 * v).collect();
            doubled.level = 1;
            RefinementLadder::new(vec![base, doubled])
        };
        let report = ladder_consistency_check(make, 13, 400, 20).unwrap();
        assert!(!report.pass);
        assert!(report.max_band_correlation > report.correlation_bound);
    }
}
