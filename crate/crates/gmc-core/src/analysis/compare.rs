//! Cross-construction and cross-kernel checks: convexity comparisons
//! for ordered covariances, law equivalence between cutoff families,
//! star-scale consistency, degeneracy scans over the coupling, and
//! statistics of the running maximum.

use crate::chaos::{build_subcritical, ChaosMeasure};
use crate::fields::{
    standard_normals, BandFamily, CutoffLadder, DenseBandLadder, GridDomain, RefinementLadder,
};
use crate::kernels::{assemble_covariance_matrix, CovarianceKernel, StarSeed};
use crate::rng::{run_replicas, SeedLineage};
use crate::stats::{ks_two_sample, mean, median, stderr_of_mean, variance, KsTest};

use super::{AnalysisError, Result};

/// One-sided 99% normal quantile used by the comparison tests.
const Z_99: f64 = 2.326;

/// Test functional applied to the total mass in a convexity comparison.
#[derive(Debug, Clone, Copy)]
pub enum ComparisonProbe {
    /// F(m) = m^2, convex.
    SquareMass,
    /// F(m) = exp(-m), convex.
    ExpNegMass,
    /// F(m) = -exp(-m), concave.
    NegExpNegMass,
}

impl ComparisonProbe {
    fn apply(self, m: f64) -> f64 {
        match self {
            ComparisonProbe::SquareMass => m * m,
            ComparisonProbe::ExpNegMass => (-m).exp(),
            ComparisonProbe::NegExpNegMass => -(-m).exp(),
        }
    }

    fn convex(self) -> bool {
        !matches!(self, ComparisonProbe::NegExpNegMass)
    }
}

/// Outcome of a convexity comparison between two pointwise-ordered
/// kernels: for convex F the kernel with larger covariance dominates,
/// E[F(M_lower)] <= E[F(M_upper)]; concave F reverses the inequality.
#[derive(Debug, Clone)]
pub struct KahaneReport {
    /// Largest amount by which the lower kernel exceeded the upper one
    /// on the grid; must be within roundoff of zero for a valid test.
    pub max_order_violation: f64,
    pub mean_lower: f64,
    pub mean_lower_stderr: f64,
    pub mean_upper: f64,
    pub mean_upper_stderr: f64,
    /// Paired mean of F(upper mass) - F(lower mass).
    pub diff_mean: f64,
    pub diff_stderr: f64,
    /// Closed-form values of E[F], available for the square probe.
    pub exact_lower: Option<f64>,
    pub exact_upper: Option<f64>,
    pub pass: bool,
    pub n_replicas: usize,
}

/// Compares E[F(total mass)] under two kernels with K_lower <= K_upper
/// pointwise, using one standard-normal draw per replica pushed through
/// both Cholesky factors so the comparison is paired.
pub fn kahane_comparison_test(
    kernel_lower: &dyn CovarianceKernel,
    kernel_upper: &dyn CovarianceKernel,
    probe: ComparisonProbe,
    grid: &GridDomain,
    gamma: f64,
    n_replicas: usize,
    master: u64,
) -> Result<KahaneReport> {
    if n_replicas < 100 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 100,
            got: n_replicas,
        });
    }
    if kernel_lower.dim() != grid.dim() || kernel_upper.dim() != grid.dim() {
        return Err(AnalysisError::InvalidParameter(format!(
            "kernel dimensions {} and {} must match the grid dimension {}",
            kernel_lower.dim(),
            kernel_upper.dim(),
            grid.dim()
        )));
    }
    if !(gamma >= 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "gamma must be nonnegative".into(),
        ));
    }
    let centers = grid.centers();
    let n = centers.len();
    let cov_lower = assemble_covariance_matrix(kernel_lower, &centers)?;
    let cov_upper = assemble_covariance_matrix(kernel_upper, &centers)?;
    let mut violation = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            violation = violation.max(cov_lower.get(i, j) - cov_upper.get(i, j));
        }
    }
    let violation = violation.max(0.0);
    if violation > 1e-9 {
        return Err(AnalysisError::OrderingViolated(violation));
    }
    let var_lower = cov_lower.variances();
    let var_upper = cov_upper.variances();
    let chol_lower = cov_lower.cholesky()?;
    let chol_upper = cov_upper.cholesky()?;
    let w = grid.cell_volume();

    let total =
        |values: &[f64], vars: &[f64]| -> f64 {
            values
                .iter()
                .zip(vars)
                .map(|(&x, &v)| w * (gamma * x - 0.5 * gamma * gamma * v).exp())
                .sum()
        };
    let samples: Vec<(f64, f64)> = run_replicas(n_replicas, |r| {
        let mut rng = SeedLineage::new(master, r).rng();
        let z = standard_normals(&mut rng, n);
        let m_lower = total(&chol_lower.sample_from(&z), &var_lower);
        let m_upper = total(&chol_upper.sample_from(&z), &var_upper);
        (probe.apply(m_lower), probe.apply(m_upper))
    });
    let lows: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let highs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let diffs: Vec<f64> = samples.iter().map(|s| s.1 - s.0).collect();
    let diff_mean = mean(&diffs);
    let diff_stderr = stderr_of_mean(&diffs);
    let pass = if probe.convex() {
        diff_mean >= -Z_99 * diff_stderr
    } else {
        diff_mean <= Z_99 * diff_stderr
    };

    let (exact_lower, exact_upper) = match probe {
        ComparisonProbe::SquareMass => {
            let square = |m: &crate::kernels::CovarianceMatrix| -> f64 {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += w * w * (gamma * gamma * m.get(i, j)).exp();
                    }
                }
                s
            };
            (Some(square(&cov_lower)), Some(square(&cov_upper)))
        }
        _ => (None, None),
    };
    Ok(KahaneReport {
        max_order_violation: violation,
        mean_lower: mean(&lows),
        mean_lower_stderr: stderr_of_mean(&lows),
        mean_upper: mean(&highs),
        mean_upper_stderr: stderr_of_mean(&highs),
        diff_mean,
        diff_stderr,
        exact_lower,
        exact_upper,
        pass,
        n_replicas,
    })
}

/// Distributional comparison of two measure ensembles over a shared
/// domain: a KS test on total masses plus first and second moments of
/// the four-cell partition masses, reported as upper/lower ratios.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub totals_ks: KsTest,
    /// Per partition cell: mean mass of ensemble B over ensemble A.
    pub mean_ratios: Vec<f64>,
    /// Per partition cell: second moment of B over A.
    pub second_moment_ratios: Vec<f64>,
    /// Two-sample z-scores for the partition means, B minus A over the
    /// pooled standard error.
    pub mean_z: Vec<f64>,
    /// Two-sample z-scores for the partition second moments.
    pub second_moment_z: Vec<f64>,
    pub pass: bool,
}

fn partition_masses(measure: &ChaosMeasure) -> Result<Vec<f64>> {
    let grid = &measure.grid;
    let d = grid.dim();
    if d > 2 {
        return Err(AnalysisError::InvalidParameter(
            "partition comparison supports dimensions 1 and 2".into(),
        ));
    }
    let mut parts = vec![0.0; 4];
    for (i, &m) in measure.cell_masses.iter().enumerate() {
        let c = grid.center(i);
        let idx = if d == 1 {
            let t = (c[0] - grid.origin()[0]) / grid.extent(0);
            ((t * 4.0).floor() as usize).min(3)
        } else {
            let tx = (c[0] - grid.origin()[0]) / grid.extent(0);
            let ty = (c[1] - grid.origin()[1]) / grid.extent(1);
            2 * ((tx * 2.0).floor() as usize).min(1) + ((ty * 2.0).floor() as usize).min(1)
        };
        parts[idx] += m;
    }
    Ok(parts)
}

/// Tests whether two cutoff constructions produce the same chaos law.
///
/// Passes when the total masses are KS-compatible (p > 0.01) and the
/// partition-cell means and second moments agree within four pooled
/// standard errors; the raw ratios are reported for inspection.
pub fn approximation_equivalence_test(
    ensemble_a: &[ChaosMeasure],
    ensemble_b: &[ChaosMeasure],
) -> Result<EquivalenceReport> {
    for e in [ensemble_a, ensemble_b] {
        if e.len() < 100 {
            return Err(AnalysisError::TooFewReplicas {
                needed: 100,
                got: e.len(),
            });
        }
    }
    let ga = &ensemble_a[0].grid;
    let gb = &ensemble_b[0].grid;
    if ga.dim() != gb.dim() {
        return Err(AnalysisError::MismatchedEnsembles(
            "ensembles live in different dimensions".into(),
        ));
    }
    let same_domain = (0..ga.dim()).all(|a| {
        (ga.origin()[a] - gb.origin()[a]).abs() < 1e-12
            && (ga.extent(a) - gb.extent(a)).abs() < 1e-12
    });
    if !same_domain {
        return Err(AnalysisError::MismatchedEnsembles(
            "ensembles cover different domains".into(),
        ));
    }
    let totals_a: Vec<f64> = ensemble_a.iter().map(|m| m.total_mass()).collect();
    let totals_b: Vec<f64> = ensemble_b.iter().map(|m| m.total_mass()).collect();
    let totals_ks = ks_two_sample(&totals_a, &totals_b)?;

    let parts_a: Vec<Vec<f64>> = ensemble_a
        .iter()
        .map(partition_masses)
        .collect::<Result<_>>()?;
    let parts_b: Vec<Vec<f64>> = ensemble_b
        .iter()
        .map(partition_masses)
        .collect::<Result<_>>()?;
    let mut mean_ratios = Vec::with_capacity(4);
    let mut second_moment_ratios = Vec::with_capacity(4);
    let mut mean_z = Vec::with_capacity(4);
    let mut second_moment_z = Vec::with_capacity(4);
    let two_sample_z = |a: &[f64], b: &[f64]| -> f64 {
        let se2 = stderr_of_mean(a).powi(2) + stderr_of_mean(b).powi(2);
        (mean(b) - mean(a)) / se2.sqrt().max(f64::MIN_POSITIVE)
    };
    for cell in 0..4 {
        let a1: Vec<f64> = parts_a.iter().map(|p| p[cell]).collect();
        let b1: Vec<f64> = parts_b.iter().map(|p| p[cell]).collect();
        let a2: Vec<f64> = a1.iter().map(|m| m * m).collect();
        let b2: Vec<f64> = b1.iter().map(|m| m * m).collect();
        mean_ratios.push(mean(&b1) / mean(&a1));
        second_moment_ratios.push(mean(&b2) / mean(&a2));
        mean_z.push(two_sample_z(&a1, &b1));
        second_moment_z.push(two_sample_z(&a2, &b2));
    }
    let within = |z: &f64| z.abs() <= 4.0;
    let pass = totals_ks.p_value > 0.01
        && mean_z.iter().all(within)
        && second_moment_z.iter().all(within);
    Ok(EquivalenceReport {
        totals_ks,
        mean_ratios,
        second_moment_ratios,
        mean_z,
        second_moment_z,
        pass,
    })
}

/// Per-band consistency data for a star-scale kernel.
#[derive(Debug, Clone)]
pub struct StarBandCheck {
    pub eps_hi: f64,
    pub eps_lo: f64,
    /// Band variance at a point; exactly ln(eps_hi/eps_lo) when the
    /// seed is normalized to k(0) = 1.
    pub variance_at_zero: f64,
    /// |mean of the normalized band exponential - 1| at the probe cell.
    pub mean_one_gap: f64,
    pub mean_one_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct StarScaleReport {
    pub bands: Vec<StarBandCheck>,
    /// KS test between chaos totals built in two scale steps and in one.
    pub two_scale_ks: KsTest,
    pub pass: bool,
}

/// Checks the exact scale decomposition of a star kernel: the bands
/// [1, eps] and [eps, eps^2] carry variance ln(1/eps) each, every band
/// exponential is mean one, and sampling to eps^2 in two steps or one
/// gives the same chaos law.
pub fn star_scale_test(
    seed: StarSeed,
    grid: &GridDomain,
    eps: f64,
    gamma: f64,
    n_replicas: usize,
    master: u64,
) -> Result<StarScaleReport> {
    if grid.dim() != 1 {
        return Err(AnalysisError::InvalidParameter(
            "star-scale kernels are one-dimensional".into(),
        ));
    }
    if n_replicas < 100 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 100,
            got: n_replicas,
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    let family = BandFamily::star(seed)?;
    let two_step = CutoffLadder::new(vec![eps, eps * eps])?;
    let one_step = CutoffLadder::new(vec![eps * eps])?;
    let sampler_two = DenseBandLadder::new(family, grid, two_step)?;
    let sampler_one = DenseBandLadder::new(family, grid, one_step)?;

    let probe_cell = grid.n_cells() / 2;
    let x = grid.center(probe_cell);
    let band_edges = [(1.0, eps), (eps, eps * eps)];
    let mut band_vars = Vec::new();
    for &(hi, lo) in &band_edges {
        band_vars.push(family.band_cov(hi, lo, &x, &x)?);
    }

    struct Draw {
        band_exponentials: [f64; 2],
        total_two: f64,
    }
    let draws: Vec<Draw> = run_replicas(n_replicas, |r| {
        let ladder = sampler_two.sample_ladder(SeedLineage::new(master, r));
        let band0 = ladder.level(0).values[probe_cell];
        let band1 = ladder.increment_values(1)[probe_cell];
        let total_two = build_subcritical(ladder.finest(), gamma)
            .expect("subcritical build cannot fail on a finite field")
            .total_mass();
        Draw {
            band_exponentials: [
                (gamma * band0 - 0.5 * gamma * gamma * band_vars[0]).exp(),
                (gamma * band1 - 0.5 * gamma * gamma * band_vars[1]).exp(),
            ],
            total_two,
        }
    });
    let totals_one: Vec<f64> = run_replicas(n_replicas, |r| {
        let ladder = sampler_one.sample_ladder(SeedLineage::new(master + 1, r));
        build_subcritical(ladder.finest(), gamma)
            .expect("subcritical build cannot fail on a finite field")
            .total_mass()
    });

    let mut bands = Vec::new();
    let mut mean_one_ok = true;
    for (b, &(hi, lo)) in band_edges.iter().enumerate() {
        let exps: Vec<f64> = draws.iter().map(|d| d.band_exponentials[b]).collect();
        let gap = (mean(&exps) - 1.0).abs();
        let se = stderr_of_mean(&exps);
        mean_one_ok &= gap <= 3.0 * se.max(1e-12);
        bands.push(StarBandCheck {
            eps_hi: hi,
            eps_lo: lo,
            variance_at_zero: band_vars[b],
            mean_one_gap: gap,
            mean_one_stderr: se,
        });
    }
    let totals_two: Vec<f64> = draws.iter().map(|d| d.total_two).collect();
    let two_scale_ks = ks_two_sample(&totals_two, &totals_one)?;
    let log_ratio = (band_edges[0].0 / band_edges[0].1).ln();
    let vars_exact = bands
        .iter()
        .all(|b| (b.variance_at_zero - log_ratio).abs() < 1e-9);
    let pass = mean_one_ok && vars_exact && two_scale_ks.p_value > 0.01;
    Ok(StarScaleReport {
        bands,
        two_scale_ks,
        pass,
    })
}

/// Median total masses across a cutoff ladder for one coupling.
#[derive(Debug, Clone)]
pub struct DegeneracyRow {
    pub gamma: f64,
    /// Median of the mean-one-normalized total mass, one per level.
    pub medians: Vec<f64>,
    /// Set when the medians decay monotonically by a factor >= 10
    /// across the ladder.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct DegeneracyReport {
    pub eps_levels: Vec<f64>,
    pub rows: Vec<DegeneracyRow>,
}

/// Scans couplings for almost-sure degeneracy: under the mean-one
/// normalization the total mass collapses to zero beyond the critical
/// coupling, which shows up as a steady downward drift of the median.
pub fn degeneracy_scan<F>(
    sample: F,
    gamma_list: &[f64],
    n_replicas: usize,
    master: u64,
) -> Result<DegeneracyReport>
where
    F: Fn(SeedLineage) -> RefinementLadder + Sync,
{
    if gamma_list.is_empty() {
        return Err(AnalysisError::InvalidParameter(
            "need at least one coupling".into(),
        ));
    }
    if gamma_list.iter().any(|&g| !(g >= 0.0)) {
        return Err(AnalysisError::InvalidParameter(
            "couplings must be nonnegative".into(),
        ));
    }
    if n_replicas < 20 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 20,
            got: n_replicas,
        });
    }
    let per_replica: Vec<Vec<Vec<f64>>> = run_replicas(n_replicas, |r| {
        let ladder = sample(SeedLineage::new(master, r));
        gamma_list
            .iter()
            .map(|&g| {
                ladder
                    .levels()
                    .iter()
                    .map(|level| {
                        build_subcritical(level, g)
                            .expect("mean-one build cannot fail on a finite field")
                            .total_mass()
                    })
                    .collect()
            })
            .collect()
    });
    let n_levels = per_replica[0][0].len();
    let eps_levels: Vec<f64> = {
        let ladder = sample(SeedLineage::new(master, 0));
        ladder.levels().iter().map(|f| f.eps).collect()
    };
    let mut rows = Vec::with_capacity(gamma_list.len());
    for (gi, &gamma) in gamma_list.iter().enumerate() {
        let medians: Vec<f64> = (0..n_levels)
            .map(|l| {
                let samples: Vec<f64> =
                    per_replica.iter().map(|rep| rep[gi][l]).collect();
                median(&samples)
            })
            .collect();
        let monotone = medians.windows(2).all(|w| w[1] <= 1.05 * w[0]);
        let collapsed = medians[n_levels - 1] <= 0.1 * medians[0];
        rows.push(DegeneracyRow {
            gamma,
            medians,
            degenerate: monotone && collapsed,
        });
    }
    Ok(DegeneracyReport { eps_levels, rows })
}

/// Per-level statistics of the running maximum of the field.
#[derive(Debug, Clone)]
pub struct MaxLevelStats {
    pub eps: f64,
    /// Mean pointwise variance at this level.
    pub c: f64,
    pub mean_sup: f64,
    /// mean_sup / c; approaches sqrt(2d) from below as the cutoff deepens.
    pub sup_over_c: f64,
    /// Mean of sup - sqrt(2d) c + (3 / (2 sqrt(2d))) ln c, the recentering
    /// under which the maximum is tight. NaN when c is not positive.
    pub recentered_mean: f64,
    pub recentered_sd: f64,
    /// KS distance between this level's recentered sample and the
    /// previous one; shrinks when the recentered law converges.
    pub ks_to_previous: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MaxFieldReport {
    pub levels: Vec<MaxLevelStats>,
    /// sup_over_c at the finest level divided by sqrt(2d).
    pub first_order_ratio: f64,
}

/// Collects max-field statistics across a refinement ladder: the
/// first-order growth sup X / Var -> sqrt(2d) and the tightness of the
/// log-corrected recentering.
pub fn max_field_statistics<F>(
    sample: F,
    d: usize,
    n_replicas: usize,
    master: u64,
) -> Result<MaxFieldReport>
where
    F: Fn(SeedLineage) -> RefinementLadder + Sync,
{
    if d == 0 {
        return Err(AnalysisError::InvalidParameter(
            "dimension must be positive".into(),
        ));
    }
    if n_replicas < 50 {
        return Err(AnalysisError::TooFewReplicas {
            needed: 50,
            got: n_replicas,
        });
    }
    let root_2d = (2.0 * d as f64).sqrt();
    let reference = sample(SeedLineage::new(master, 0));
    let n_levels = reference.len();
    let epss: Vec<f64> = reference.levels().iter().map(|f| f.eps).collect();
    let cs: Vec<f64> = reference
        .levels()
        .iter()
        .map(|f| mean(f.variance.values()))
        .collect();

    let sups: Vec<Vec<f64>> = run_replicas(n_replicas, |r| {
        let ladder = sample(SeedLineage::new(master, r));
        ladder
            .levels()
            .iter()
            .map(|f| f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    });

    let mut recentered_prev: Option<Vec<f64>> = None;
    let mut levels = Vec::with_capacity(n_levels);
    for l in 0..n_levels {
        let sup_samples: Vec<f64> = sups.iter().map(|s| s[l]).collect();
        let c = cs[l];
        let mean_sup = mean(&sup_samples);
        let (recentered_mean, recentered_sd, recentered, sup_over_c) = if c > 0.0 {
            let rec: Vec<f64> = sup_samples
                .iter()
                .map(|&s| s - root_2d * c + 1.5 / root_2d * c.ln())
                .collect();
            (
                mean(&rec),
                variance(&rec).sqrt(),
                Some(rec),
                mean_sup / c,
            )
        } else {
            (f64::NAN, f64::NAN, None, f64::NAN)
        };
        let ks_to_previous = match (&recentered_prev, &recentered) {
            (Some(prev), Some(cur)) => ks_two_sample(prev, cur).ok().map(|k| k.statistic),
            _ => None,
        };
        levels.push(MaxLevelStats {
            eps: epss[l],
            c,
            mean_sup,
            sup_over_c,
            recentered_mean,
            recentered_sd,
            ks_to_previous,
        });
        recentered_prev = recentered;
    }
    let first_order_ratio = levels
        .last()
        .map(|s| s.sup_over_c / root_2d)
        .unwrap_or(f64::NAN);
    Ok(MaxFieldReport {
        levels,
        first_order_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstructionTag, FieldRealization, VarianceProfile};
    use crate::kernels::{ExactLogCutoff, KernelError};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    /// Kernel scaled by a constant factor; stays positive semidefinite
    /// and sits below the original whenever the factor is below one.
    struct Scaled<'a> {
        inner: &'a dyn CovarianceKernel,
        factor: f64,
    }

    impl CovarianceKernel for Scaled<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }

        fn eval(&self, x: &[f64], y: &[f64]) -> std::result::Result<f64, KernelError> {
            Ok(self.factor * self.inner.eval(x, y)?)
        }

        fn variance(&self, x: &[f64]) -> std::result::Result<f64, KernelError> {
            Ok(self.factor * self.inner.variance(x)?)
        }

        fn description(&self) -> String {
            format!("{} scaled by {}", self.inner.description(), self.factor)
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
    fn ordered_kernels_respect_the_convex_comparison() {
        let grid = GridDomain::unit_interval(64).unwrap();
        let upper = ExactLogCutoff::new(1, 1.0, 1.0 / 16.0).unwrap();
        let lower = Scaled {
            inner: &upper,
            factor: 0.5,
        };
        let report = kahane_comparison_test(
            &lower,
            &upper,
            ComparisonProbe::SquareMass,
            &grid,
            0.7,
            500,
            314,
        )
        .unwrap();
        assert!(report.pass, "convex comparison failed: {report:?}");
        assert!(report.max_order_violation <= 1e-9);
        let (exact_lower, exact_upper) =
            (report.exact_lower.unwrap(), report.exact_upper.unwrap());
        assert!(exact_lower < exact_upper);
        assert!(
            (report.mean_lower - exact_lower).abs() < 4.0 * report.mean_lower_stderr,
            "lower second moment {} +- {} vs exact {}",
            report.mean_lower,
            report.mean_lower_stderr,
            exact_lower
        );
        assert!(
            (report.mean_upper - exact_upper).abs() < 4.0 * report.mean_upper_stderr,
            "upper second moment {} +- {} vs exact {}",
            report.mean_upper,
            report.mean_upper_stderr,
            exact_upper
        );

        let concave = kahane_comparison_test(
            &lower,
            &upper,
            ComparisonProbe::NegExpNegMass,
            &grid,
            0.7,
            500,
            314,
        )
        .unwrap();
        assert!(concave.pass, "concave comparison failed: {concave:?}");
        assert!(concave.diff_mean <= 0.0, "concave probe should decrease");

        assert!(matches!(
            kahane_comparison_test(
                &upper,
                &lower,
                ComparisonProbe::SquareMass,
                &grid,
                0.7,
                500,
                314,
            ),
            Err(AnalysisError::OrderingViolated(_))
        ));
    }

    #[test]
    fn identical_kernels_compare_as_equal() {
        let grid = GridDomain::unit_interval(32).unwrap();
        let kernel = ExactLogCutoff::new(1, 1.0, 0.125).unwrap();
        let report = kahane_comparison_test(
            &kernel,
            &kernel,
            ComparisonProbe::ExpNegMass,
            &grid,
            0.5,
            200,
            1,
        )
        .unwrap();
        assert_eq!(report.max_order_violation, 0.0);
        assert!(report.pass);
        assert_abs_diff_eq!(report.diff_mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn same_law_ensembles_pass_and_mismatched_couplings_fail() {
        let a = interval_ensemble(128, 1.0 / 32.0, 0.6, 400, 21);
        let b = interval_ensemble(128, 1.0 / 32.0, 0.6, 400, 22);
        let report = approximation_equivalence_test(&a, &b).unwrap();
        assert!(report.pass, "same-law ensembles rejected: {report:?}");

        let c = interval_ensemble(128, 1.0 / 32.0, 0.85, 400, 23);
        let cross = approximation_equivalence_test(&a, &c).unwrap();
        assert!(!cross.pass, "different couplings accepted: {cross:?}");

        assert!(approximation_equivalence_test(&a[..50], &b).is_err());
    }

    #[test]
    fn star_bands_are_log_variance_mean_one_and_composable() {
        let grid = GridDomain::unit_interval(512).unwrap();
        let report = star_scale_test(
            StarSeed::Exponential,
            &grid,
            0.125,
            0.6,
            300,
            987,
        )
        .unwrap();
        assert!(report.pass, "star scale test failed: {report:?}");
        let ln_ratio = (1.0f64 / 0.125).ln();
        for band in &report.bands {
            assert_abs_diff_eq!(band.variance_at_zero, ln_ratio, epsilon = 1e-9);
            assert!(band.mean_one_gap <= 3.0 * band.mean_one_stderr.max(1e-12));
        }
        assert!(report.two_scale_ks.p_value > 0.01);

        let square = GridDomain::unit_square(8).unwrap();
        assert!(star_scale_test(StarSeed::Exponential, &square, 0.25, 0.5, 200, 0).is_err());
    }

    #[test]
    fn degeneracy_scan_separates_the_phases() {
        let grid = GridDomain::unit_interval(512).unwrap();
        let eps: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
        let ladder = CutoffLadder::new(eps).unwrap();
        let sampler =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, ladder).unwrap();
        let report = degeneracy_scan(
            |lineage| sampler.sample_ladder(lineage),
            &[0.0, 0.8, 2.0],
            200,
            555,
        )
        .unwrap();
        assert_eq!(report.eps_levels.len(), 8);

        let flat = &report.rows[0];
        assert!(!flat.degenerate);
        for m in &flat.medians {
            assert_abs_diff_eq!(*m, 1.0, epsilon = 1e-12);
        }

        let subcritical = &report.rows[1];
        assert!(
            !subcritical.degenerate,
            "subcritical flagged: {:?}",
            subcritical.medians
        );

        let supercritical = &report.rows[2];
        assert!(
            supercritical.degenerate,
            "supercritical missed: {:?}",
            supercritical.medians
        );
    }

    #[test]
    fn max_statistics_track_the_log_depth() {
        let grid = GridDomain::unit_interval(1024).unwrap();
        let ladder =
            CutoffLadder::new(vec![0.25, 0.0625, 0.015625, 1.0 / 256.0]).unwrap();
        let sampler =
            DenseBandLadder::new(BandFamily::exact_log(1, 1.0).unwrap(), &grid, ladder).unwrap();
        let report = max_field_statistics(
            |lineage| sampler.sample_ladder(lineage),
            1,
            200,
            4321,
        )
        .unwrap();
        assert_eq!(report.levels.len(), 4);
        for pair in report.levels.windows(2) {
            assert!(
                pair[1].mean_sup > pair[0].mean_sup,
                "running maximum must grow with depth"
            );
        }
        let finest = report.levels.last().unwrap();
        assert!(
            report.first_order_ratio > 0.7 && report.first_order_ratio < 1.1,
            "first-order ratio {} at c = {}",
            report.first_order_ratio,
            finest.c
        );
        assert!(finest.recentered_mean.is_finite());
        assert!(finest.ks_to_previous.is_some());
    }

    #[test]
    fn constant_fields_have_constant_maxima() {
        let grid = GridDomain::unit_interval(16).unwrap();
        let make_level = |eps: f64| FieldRealization {
            grid: grid.clone(),
            values: vec![2.5; 16],
            eps,
            variance: Arc::new(VarianceProfile::constant(0.0, 16)),
            construction: ConstructionTag::DenseCholesky,
            lineage: SeedLineage::new(0, 0),
            level: 0,
        };
        let report = max_field_statistics(
            |_| RefinementLadder::new(vec![make_level(0.5), make_level(0.25)]),
            1,
            60,
            0,
        )
        .unwrap();
        for level in &report.levels {
            assert_abs_diff_eq!(level.mean_sup, 2.5);
            assert!(level.recentered_mean.is_nan());
        }
        assert!(report.first_order_ratio.is_nan());
    }
}
