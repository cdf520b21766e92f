//! Dense Cholesky sampling and refinement ladders.
//!
//! These routes assemble explicit covariance matrices, so they work for any
//! kernel but are capped at [`DENSE_CELL_CAP`] cells; larger grids need the
//! scale-slab or mode-space routes. Refinement ladders factor one matrix per
//! level and draw each level from its own rng stream, which makes the
//! increments independent by construction and every partial sum exactly
//! distributed as the corresponding cutoff field.

use std::sync::Arc;

use crate::kernels::{
    assemble_covariance_matrix, eval_star_kernel, star_band, CovarianceKernel, CovarianceMatrix,
    SigmaPositiveDecomposition, StarSeed,
};
use crate::linalg::{cholesky_with_jitter, CholeskyFactor};
use crate::rng::SeedLineage;

use super::{
    standard_normals, ConstructionTag, CutoffLadder, FieldError, FieldRealization, GridDomain,
    RefinementLadder, Result, VarianceProfile, DENSE_CELL_CAP,
};

fn check_dense_cap(grid: &GridDomain) -> Result<()> {
    if grid.n_cells() > DENSE_CELL_CAP {
        return Err(FieldError::GridTooLarge {
            cells: grid.n_cells(),
            cap: DENSE_CELL_CAP,
            hint: "use the scale-slab or mode-space routes for grids this large".into(),
        });
    }
    Ok(())
}

/// Draws `L z` from a prebuilt covariance matrix over the grid's cell
/// centers. `eps` labels the cutoff the matrix represents.
pub fn sample_gaussian_on_grid(
    cov: &CovarianceMatrix,
    grid: &GridDomain,
    eps: f64,
    lineage: SeedLineage,
) -> Result<FieldRealization> {
    if cov.n != grid.n_cells() {
        return Err(FieldError::InvalidParameter(format!(
            "covariance is {}x{} but the grid has {} cells",
            cov.n,
            cov.n,
            grid.n_cells()
        )));
    }
    check_dense_cap(grid)?;
    let chol = cov.cholesky()?;
    let mut rng = lineage.rng();
    let z = standard_normals(&mut rng, cov.n);
    Ok(FieldRealization {
        grid: grid.clone(),
        values: chol.sample_from(&z),
        eps,
        variance: Arc::new(VarianceProfile::Exact(cov.variances())),
        construction: ConstructionTag::DenseCholesky,
        lineage,
        level: 0,
    })
}

/// Reusable dense sampler: assembles and factors the covariance once, then
/// draws replicas from it.
#[derive(Debug, Clone)]
pub struct DenseSampler {
    grid: GridDomain,
    chol: CholeskyFactor,
    variance: Arc<VarianceProfile>,
    eps: f64,
    description: String,
}

impl DenseSampler {
    pub fn new(kernel: &dyn CovarianceKernel, grid: &GridDomain, eps: f64) -> Result<Self> {
        check_dense_cap(grid)?;
        if kernel.dim() != grid.dim() {
            return Err(FieldError::InvalidParameter(format!(
                "kernel dimension {} does not match grid dimension {}",
                kernel.dim(),
                grid.dim()
            )));
        }
        let cov = assemble_covariance_matrix(kernel, &grid.centers())?;
        let variance = Arc::new(VarianceProfile::Exact(cov.variances()));
        let chol = cov.cholesky()?;
        Ok(Self {
            grid: grid.clone(),
            chol,
            variance,
            eps,
            description: kernel.description(),
        })
    }

    pub fn sample(&self, lineage: SeedLineage) -> FieldRealization {
        let mut rng = lineage.rng();
        let z = standard_normals(&mut rng, self.grid.n_cells());
        FieldRealization {
            grid: self.grid.clone(),
            values: self.chol.sample_from(&z),
            eps: self.eps,
            variance: self.variance.clone(),
            construction: ConstructionTag::DenseCholesky,
            lineage,
            level: 0,
        }
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn variance(&self) -> &Arc<VarianceProfile> {
        &self.variance
    }

    /// Diagonal boost the factorization needed, zero for a clean factor.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// Kernel families whose ladder increments have exact closed-form
/// covariances.
#[derive(Debug, Clone, Copy)]
pub enum BandFamily {
    /// Exact-log cutoff bands in dimension 1 or 2.
    ExactLog(SigmaPositiveDecomposition),
    /// Star-scale bands in dimension 1.
    Star(StarSeed),
}

impl BandFamily {
    pub fn exact_log(d: usize, t: f64) -> Result<Self> {
        Ok(BandFamily::ExactLog(SigmaPositiveDecomposition::new(d, t)?))
    }

    pub fn star(seed: StarSeed) -> Result<Self> {
        seed.validate()?;
        Ok(BandFamily::Star(seed))
    }

    pub fn dim(&self) -> usize {
        match self {
            BandFamily::ExactLog(dec) => dec.dim(),
            BandFamily::Star(_) => 1,
        }
    }

    /// Coarsest admissible cutoff.
    pub fn top_scale(&self) -> f64 {
        match self {
            BandFamily::ExactLog(dec) => dec.top_scale(),
            BandFamily::Star(_) => 1.0,
        }
    }

    fn distance(x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cutoff_cov(&self, eps: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            BandFamily::ExactLog(dec) => Ok(dec.cutoff_value(eps, Self::distance(x, y))),
            BandFamily::Star(seed) => Ok(eval_star_kernel(seed, eps, x[0] - y[0])?),
        }
    }

    pub fn band_cov(&self, eps_hi: f64, eps_lo: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            BandFamily::ExactLog(dec) => {
                Ok(dec.band_value(eps_hi, eps_lo, Self::distance(x, y)))
            }
            BandFamily::Star(seed) => Ok(star_band(seed, eps_hi, eps_lo, x[0] - y[0])?),
        }
    }

    pub fn cutoff_variance(&self, eps: f64) -> f64 {
        match self {
            BandFamily::ExactLog(dec) => dec.cutoff_variance(eps),
            BandFamily::Star(_) => (1.0 / eps).ln(),
        }
    }
}

fn assemble_symmetric(
    points: &[Vec<f64>],
    diag: f64,
    mut off: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let n = points.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = diag;
        for j in 0..i {
            let v = off(&points[i], &points[j])?;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(data)
}

/// Dense ladder sampler over a cutoff ladder: level 0 carries the field at
/// the coarsest cutoff, each later level adds the independent band between
/// consecutive cutoffs.
#[derive(Debug, Clone)]
pub struct DenseBandLadder {
    grid: GridDomain,
    ladder: CutoffLadder,
    factors: Vec<CholeskyFactor>,
    variances: Vec<Arc<VarianceProfile>>,
}

impl DenseBandLadder {
    pub fn new(family: BandFamily, grid: &GridDomain, ladder: CutoffLadder) -> Result<Self> {
        check_dense_cap(grid)?;
        if family.dim() != grid.dim() {
            return Err(FieldError::InvalidParameter(format!(
                "band family dimension {} does not match grid dimension {}",
                family.dim(),
                grid.dim()
            )));
        }
        ladder.validate_for_grid(grid)?;
        if ladder.levels()[0] > family.top_scale() {
            return Err(FieldError::InvalidParameter(format!(
                "ladder top {} exceeds the family's top scale {}",
                ladder.levels()[0],
                family.top_scale()
            )));
        }
        let points = grid.centers();
        let n = points.len();
        let mut factors = Vec::with_capacity(ladder.len());
        let mut variances = Vec::with_capacity(ladder.len());
        let mut cumulative = 0.0;
        for (k, &eps) in ladder.levels().iter().enumerate() {
            let data = if k == 0 {
                cumulative = family.cutoff_variance(eps);
                assemble_symmetric(&points, cumulative, |x, y| family.cutoff_cov(eps, x, y))?
            } else {
                let eps_hi = ladder.levels()[k - 1];
                let diag = family.cutoff_variance(eps) - family.cutoff_variance(eps_hi);
                cumulative += diag;
                assemble_symmetric(&points, diag, |x, y| family.band_cov(eps_hi, eps, x, y))?
            };
            factors.push(cholesky_with_jitter(&data, n)?);
            variances.push(Arc::new(VarianceProfile::constant(cumulative, n)));
        }
        Ok(Self {
            grid: grid.clone(),
            ladder,
            factors,
            variances,
        })
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn ladder(&self) -> &CutoffLadder {
        &self.ladder
    }

    pub fn max_jitter(&self) -> f64 {
        self.factors.iter().map(|f| f.jitter).fold(0.0, f64::max)
    }

    /// All levels for one replica; level `k` uses the replica's stream `k`.
    pub fn sample_ladder(&self, lineage: SeedLineage) -> RefinementLadder {
        let n = self.grid.n_cells();
        let mut running = vec![0.0; n];
        let mut levels = Vec::with_capacity(self.factors.len());
        for (k, factor) in self.factors.iter().enumerate() {
            let mut rng = lineage.level_rng(k as u64);
            let z = standard_normals(&mut rng, n);
            let inc = factor.sample_from(&z);
            for (r, i) in running.iter_mut().zip(&inc) {
                *r += i;
            }
            levels.push(FieldRealization {
                grid: self.grid.clone(),
                values: running.clone(),
                eps: self.ladder.levels()[k],
                variance: self.variances[k].clone(),
                construction: ConstructionTag::LevelSum,
                lineage,
                level: k,
            });
        }
        RefinementLadder::new(levels)
    }
}

/// Samples the integer levels of the sigma-positive decomposition and their
/// partial sums; the sum of the first `n` levels is exactly the cutoff field
/// at `eps = (1/n)^(1/mu)`.
#[derive(Debug, Clone)]
pub struct RefinementSampler {
    grid: GridDomain,
    decomposition: SigmaPositiveDecomposition,
    factors: Vec<CholeskyFactor>,
    variances: Vec<Arc<VarianceProfile>>,
}

impl RefinementSampler {
    pub fn new(d: usize, t: f64, grid: &GridDomain, n_levels: usize) -> Result<Self> {
        check_dense_cap(grid)?;
        let decomposition = SigmaPositiveDecomposition::new(d, t)?;
        if grid.dim() != d {
            return Err(FieldError::InvalidParameter(format!(
                "decomposition dimension {d} does not match grid dimension {}",
                grid.dim()
            )));
        }
        if n_levels >= 1 {
            let eps = decomposition.level_cutoff(n_levels);
            if eps < 2.0 * grid.h() - 1e-12 {
                return Err(FieldError::LadderBelowGrid { eps, h: grid.h() });
            }
        }
        let points = grid.centers();
        let n = points.len();
        let mut factors = Vec::with_capacity(n_levels);
        let mut variances = Vec::with_capacity(n_levels);
        let mut cumulative = 0.0;
        for level in 1..=n_levels {
            let diag = decomposition.level_variance(level);
            cumulative += diag;
            let data = assemble_symmetric(&points, diag, |x, y| {
                Ok(decomposition.level_value(level, BandFamily::distance(x, y)))
            })?;
            factors.push(cholesky_with_jitter(&data, n)?);
            variances.push(Arc::new(VarianceProfile::constant(cumulative, n)));
        }
        Ok(Self {
            grid: grid.clone(),
            decomposition,
            factors,
            variances,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.factors.len()
    }

    pub fn decomposition(&self) -> &SigmaPositiveDecomposition {
        &self.decomposition
    }

    pub fn max_jitter(&self) -> f64 {
        self.factors.iter().map(|f| f.jitter).fold(0.0, f64::max)
    }

    /// Partial sum of the first `n_levels` decomposition levels for one
    /// replica. Zero levels give the zero field, labeled with an infinite
    /// cutoff because nothing is resolved yet.
    pub fn sample_partial(&self, lineage: SeedLineage, n_levels: usize) -> FieldRealization {
        assert!(
            n_levels <= self.factors.len(),
            "requested {n_levels} levels but only {} were factored",
            self.factors.len()
        );
        let n = self.grid.n_cells();
        let mut running = vec![0.0; n];
        for (k, factor) in self.factors.iter().take(n_levels).enumerate() {
            let mut rng = lineage.level_rng(k as u64);
            let z = standard_normals(&mut rng, n);
            let inc = factor.sample_from(&z);
            for (r, i) in running.iter_mut().zip(&inc) {
                *r += i;
            }
        }
        let (eps, variance) = if n_levels == 0 {
            (f64::INFINITY, Arc::new(VarianceProfile::constant(0.0, n)))
        } else {
            (
                self.decomposition.level_cutoff(n_levels),
                self.variances[n_levels - 1].clone(),
            )
        };
        FieldRealization {
            grid: self.grid.clone(),
            values: running,
            eps,
            variance,
            construction: ConstructionTag::LevelSum,
            lineage,
            level: n_levels.saturating_sub(1),
        }
    }

    /// All partial sums `X_1, ..., X_N` for one replica, sharing increments.
    pub fn sample_ladder(&self, lineage: SeedLineage) -> RefinementLadder {
        let n = self.grid.n_cells();
        let mut running = vec![0.0; n];
        let mut levels = Vec::with_capacity(self.factors.len());
        for (k, factor) in self.factors.iter().enumerate() {
            let mut rng = lineage.level_rng(k as u64);
            let z = standard_normals(&mut rng, n);
            let inc = factor.sample_from(&z);
            for (r, i) in running.iter_mut().zip(&inc) {
                *r += i;
            }
            levels.push(FieldRealization {
                grid: self.grid.clone(),
                values: running.clone(),
                eps: self.decomposition.level_cutoff(k + 1),
                variance: self.variances[k].clone(),
                construction: ConstructionTag::LevelSum,
                lineage,
                level: k,
            });
        }
        RefinementLadder::new(levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Result as KernelResult;
    use crate::rng::run_replicas;
    use crate::stats;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand_distr::{Distribution, StandardNormal};

    /// White covariance: unit variance, zero between distinct points.
    struct WhiteKernel {
        d: usize,
        var: f64,
    }

    impl CovarianceKernel for WhiteKernel {
        fn dim(&self) -> usize {
            self.d
        }
        fn eval(&self, _x: &[f64], _y: &[f64]) -> KernelResult<f64> {
            Ok(0.0)
        }
        fn variance(&self, _x: &[f64]) -> KernelResult<f64> {
            Ok(self.var)
        }
        fn description(&self) -> String {
            format!("white noise, variance {}", self.var)
        }
    }

    #[test]
    fn single_cell_sample_scales_the_normal() {
        let grid = GridDomain::unit_interval(1).unwrap();
        let cov = CovarianceMatrix {
            n: 1,
            data: vec![4.0],
            points: vec![vec![0.5]],
            kernel_description: "point variance 4".into(),
        };
        let lineage = SeedLineage::new(7, 0);
        let field = sample_gaussian_on_grid(&cov, &grid, 0.1, lineage).unwrap();
        let mut rng = lineage.rng();
        let z: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(field.values[0], 2.0 * z);
    }

    #[test]
    fn same_lineage_is_bit_identical() {
        let grid = GridDomain::unit_interval(16).unwrap();
        let sampler = DenseSampler::new(&WhiteKernel { d: 1, var: 1.0 }, &grid, 0.125).unwrap();
        let a = sampler.sample(SeedLineage::new(42, 3));
        let b = sampler.sample(SeedLineage::new(42, 3));
        assert_eq!(a.values, b.values);
        let c = sampler.sample(SeedLineage::new(42, 4));
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn identity_covariance_empirical_covariance_is_identity() {
        let grid = GridDomain::unit_interval(8).unwrap();
        let sampler = DenseSampler::new(&WhiteKernel { d: 1, var: 1.0 }, &grid, 0.25).unwrap();
        assert_eq!(sampler.jitter(), 0.0);
        let n_rep = 10_000;
        let fields = run_replicas(n_rep, |r| sampler.sample(SeedLineage::new(11, r)).values);
        let n = grid.n_cells();
        let mut second = vec![0.0; n * n];
        for f in &fields {
            for i in 0..n {
                for j in 0..n {
                    second[i * n + j] += f[i] * f[j];
                }
            }
        }
        let tol = 5.0 / (n_rep as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                let emp = second[i * n + j] / n_rep as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (emp - want).abs() < tol,
                    "entry ({i},{j}): {emp} vs {want}"
                );
            }
        }
    }

    #[test]
    fn refinement_variance_bookkeeping_is_exact() {
        let grid = GridDomain::unit_interval(16).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 8).unwrap();
        let field = sampler.sample_partial(SeedLineage::new(1, 0), 8);
        let analytic = sampler.decomposition().partial_sum(0.0, 8);
        for &v in field.variance.values() {
            assert_relative_eq!(v, analytic, max_relative = 1e-12);
        }
        assert_relative_eq!(
            analytic,
            sampler
                .decomposition()
                .cutoff_variance(sampler.decomposition().level_cutoff(8)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_levels_give_the_zero_field() {
        let grid = GridDomain::unit_interval(8).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 4).unwrap();
        let field = sampler.sample_partial(SeedLineage::new(5, 2), 0);
        assert!(field.values.iter().all(|&v| v == 0.0));
        assert!(field.eps.is_infinite());
    }

    #[test]
    fn refinement_partial_sums_match_cutoff_covariance() {
        let grid = GridDomain::unit_interval(256).unwrap();
        let sampler = RefinementSampler::new(1, 1.0, &grid, 30).unwrap();
        let (i, j) = (0, 128);
        let r = (grid.center(j)[0] - grid.center(i)[0]).abs();
        assert_abs_diff_eq!(r, 0.5);
        let n_rep = 2000;
        let prods = run_replicas(n_rep, |rep| {
            let field = sampler.sample_partial(SeedLineage::new(31, rep), 30);
            field.values[i] * field.values[j]
        });
        let want = sampler.decomposition().partial_sum(r, 30);
        let emp = stats::mean(&prods);
        let stderr = stats::stderr_of_mean(&prods);
        assert!(
            (emp - want).abs() < 3.0 * stderr,
            "covariance {emp} vs {want}, stderr {stderr}"
        );
    }

    #[test]
    fn band_ladder_partial_variances_match_cutoffs_exactly() {
        let grid = GridDomain::unit_interval(32).unwrap();
        let family = BandFamily::exact_log(1, 1.0).unwrap();
        let ladder = CutoffLadder::dyadic(0.5, 3).unwrap();
        let dense = DenseBandLadder::new(family, &grid, ladder.clone()).unwrap();
        let rungs = dense.sample_ladder(SeedLineage::new(3, 0));
        assert_eq!(rungs.len(), 4);
        let dec = SigmaPositiveDecomposition::new(1, 1.0).unwrap();
        for (k, field) in rungs.levels().iter().enumerate() {
            let eps = ladder.levels()[k];
            assert_eq!(field.eps, eps);
            for &v in field.variance.values() {
                assert_relative_eq!(v, dec.cutoff_variance(eps), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn band_ladder_increments_are_uncorrelated() {
        let grid = GridDomain::unit_interval(32).unwrap();
        let family = BandFamily::exact_log(1, 1.0).unwrap();
        let ladder = CutoffLadder::dyadic(0.5, 3).unwrap();
        let dense = DenseBandLadder::new(family, &grid, ladder).unwrap();
        let n_rep = 4000;
        let pairs = run_replicas(n_rep, |rep| {
            let rungs = dense.sample_ladder(SeedLineage::new(17, rep));
            let y1 = rungs.increment_values(1);
            let y2 = rungs.increment_values(2);
            (y1[5], y2[20])
        });
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mean_ab =
            pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / n_rep as f64;
        let corr = mean_ab
            / (stats::variance(&a) * stats::variance(&b)).sqrt();
        assert!(
            corr.abs() < 4.0 / (n_rep as f64).sqrt(),
            "cross-band correlation {corr}"
        );
    }

    #[test]
    fn star_band_ladder_matches_star_kernel() {
        let grid = GridDomain::unit_interval(16).unwrap();
        let family = BandFamily::star(StarSeed::Triangle { t: 1.0 }).unwrap();
        let ladder = CutoffLadder::dyadic(0.5, 2).unwrap();
        let dense = DenseBandLadder::new(family, &grid, ladder).unwrap();
        let rungs = dense.sample_ladder(SeedLineage::new(23, 0));
        let finest = rungs.finest();
        for &v in finest.variance.values() {
            assert_relative_eq!(v, (1.0 / 0.125_f64).ln(), max_relative = 1e-10);
        }
        let n_rep = 3000;
        let (i, j) = (2, 6);
        let x = grid.center(i)[0] - grid.center(j)[0];
        let want = eval_star_kernel(&StarSeed::Triangle { t: 1.0 }, 0.125, x).unwrap();
        let prods = run_replicas(n_rep, |rep| {
            let f = dense.sample_ladder(SeedLineage::new(29, rep));
            let v = &f.finest().values;
            v[i] * v[j]
        });
        let emp = stats::mean(&prods);
        let stderr = stats::stderr_of_mean(&prods);
        assert!(
            (emp - want).abs() < 3.0 * stderr,
            "covariance {emp} vs {want}, stderr {stderr}"
        );
    }

    #[test]
    fn dense_cap_is_enforced() {
        let grid = GridDomain::unit_interval(DENSE_CELL_CAP + 1).unwrap();
        let err = DenseSampler::new(&WhiteKernel { d: 1, var: 1.0 }, &grid, 0.5).unwrap_err();
        assert!(matches!(err, FieldError::GridTooLarge { .. }));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let grid = GridDomain::unit_square(4).unwrap();
        let err = DenseSampler::new(&WhiteKernel { d: 1, var: 1.0 }, &grid, 0.5).unwrap_err();
        assert!(matches!(err, FieldError::InvalidParameter(_)));
        let family = BandFamily::star(StarSeed::Exponential).unwrap();
        let ladder = CutoffLadder::dyadic(0.5, 1).unwrap();
        assert!(DenseBandLadder::new(family, &grid, ladder).is_err());
    }
}
