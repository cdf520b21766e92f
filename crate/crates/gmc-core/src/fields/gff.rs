//! Mode-space samplers for the Dirichlet free field on a rectangle, plus
//! circle averaging.
//!
//! With Dirichlet eigenpairs `(lambda_jk, e_jk)` of the rectangle, the
//! samplers draw `X = sqrt(2 pi) sum_{j,k <= J} sqrt(w(lambda)) beta_jk
//! e_jk` for i.i.d. standard normals `beta_jk`, so the covariance is the
//! truncated mode sum `2 pi sum w(lambda) e_jk(x) e_jk(y)` of
//! [`crate::kernels`]. The weight `w` selects the construction: sharp
//! truncation, heat smoothing at scale `eps`, a heat band between two
//! scales, or the massive resolvent. Everything is separable in the two
//! axes, so a replica costs two small matrix products instead of a dense
//! factor, and the variance profile is an exact mode sum as well.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kernels::RectangleDomain;
use crate::rng::{run_replicas, SeedLineage};
use crate::special::bessel_j0;

use super::{
    standard_normals, ConstructionTag, CutoffLadder, FieldError, FieldRealization, GridDomain,
    RefinementLadder, Result, VarianceProfile,
};

/// Default number of angles for discretized circle averages.
pub const CIRCLE_ANGLES: usize = 64;

/// Mode-space covariance weight `w(lambda)` for eigenvalue `lambda < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "weight", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeWeight {
    /// `1 / (-lambda)`: the truncated Green function itself.
    SharpTruncation,
    /// `exp(lambda eps^2 / 2) / (-lambda)`: heat-kernel smoothing at `eps`.
    HeatSmoothing { eps: f64 },
    /// Difference of two heat smoothings, the independent band between
    /// cutoffs `eps_hi > eps_lo`. Equal scales give the zero field.
    HeatBand { eps_hi: f64, eps_lo: f64 },
    /// `1 / (m^2 - lambda)`: massive resolvent, a short-range control.
    Massive { mass: f64 },
}

impl ModeWeight {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FieldError::InvalidParameter(msg));
        match *self {
            ModeWeight::SharpTruncation => Ok(()),
            ModeWeight::HeatSmoothing { eps } => {
                if !(eps >= 0.0) || !eps.is_finite() {
                    return bad(format!("smoothing scale must be nonnegative, got {eps}"));
                }
                Ok(())
            }
            ModeWeight::HeatBand { eps_hi, eps_lo } => {
                if !(eps_lo >= 0.0) || !(eps_hi >= eps_lo) || !eps_hi.is_finite() {
                    return bad(format!(
                        "heat band needs eps_hi >= eps_lo >= 0, got {eps_hi} and {eps_lo}"
                    ));
                }
                Ok(())
            }
            ModeWeight::Massive { mass } => {
                if !(mass > 0.0) || !mass.is_finite() {
                    return bad(format!("mass must be positive, got {mass}"));
                }
                Ok(())
            }
        }
    }

    /// Covariance weight applied to a mode with eigenvalue `lambda < 0`.
    pub fn coefficient(&self, lambda: f64) -> f64 {
        match *self {
            ModeWeight::SharpTruncation => 1.0 / (-lambda),
            ModeWeight::HeatSmoothing { eps } => (lambda * eps * eps / 2.0).exp() / (-lambda),
            ModeWeight::HeatBand { eps_hi, eps_lo } => {
                ((lambda * eps_lo * eps_lo / 2.0).exp() - (lambda * eps_hi * eps_hi / 2.0).exp())
                    / (-lambda)
            }
            ModeWeight::Massive { mass } => 1.0 / (mass * mass - lambda),
        }
    }

    fn construction(&self) -> ConstructionTag {
        match self {
            ModeWeight::SharpTruncation | ModeWeight::Massive { .. } => ConstructionTag::GffEigen,
            ModeWeight::HeatSmoothing { .. } | ModeWeight::HeatBand { .. } => {
                ConstructionTag::GffHeatWhiteNoise
            }
        }
    }
}

/// `a (ar x ac) * b (ac x bc)`, row-major.
fn matmul(a: &[f64], ar: usize, ac: usize, b: &[f64], bc: usize) -> Vec<f64> {
    let mut out = vec![0.0; ar * bc];
    for i in 0..ar {
        for k in 0..ac {
            let aik = a[i * ac + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * bc..(k + 1) * bc];
            let orow = &mut out[i * bc..(i + 1) * bc];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

/// `a (ar x ac) * b^T` for `b (br x ac)`, row-major.
fn matmul_abt(a: &[f64], ar: usize, ac: usize, b: &[f64], br: usize) -> Vec<f64> {
    let mut out = vec![0.0; ar * br];
    for i in 0..ar {
        let arow = &a[i * ac..(i + 1) * ac];
        for j in 0..br {
            let brow = &b[j * ac..(j + 1) * ac];
            out[i * br + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Shared sine tables for a rectangle/grid pair.
#[derive(Debug, Clone)]
struct ModeBasis {
    domain: RectangleDomain,
    grid: GridDomain,
    n_modes: usize,
    /// `nx x J`, `sin(j pi x_i / lx)`.
    sx: Vec<f64>,
    /// `ny x J`, `sin(k pi y_i / ly)`.
    sy: Vec<f64>,
}

impl ModeBasis {
    fn new(domain: RectangleDomain, grid: &GridDomain, n_modes: usize) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(FieldError::InvalidParameter(
                "rectangle mode sampling needs a two-dimensional grid".into(),
            ));
        }
        if n_modes == 0 {
            return Err(FieldError::InvalidParameter(
                "mode sampling needs at least one mode per axis".into(),
            ));
        }
        for c in grid.centers() {
            if !domain.contains_interior(&c) {
                return Err(FieldError::InvalidParameter(format!(
                    "grid center {c:?} lies outside the open rectangle (0, {}) x (0, {})",
                    domain.lx, domain.ly
                )));
            }
        }
        let (nx, ny) = (grid.shape()[0], grid.shape()[1]);
        let mut sx = vec![0.0; nx * n_modes];
        let mut sy = vec![0.0; ny * n_modes];
        for i in 0..nx {
            let x = grid.origin()[0] + (i as f64 + 0.5) * grid.h();
            for j in 1..=n_modes {
                sx[i * n_modes + j - 1] = (j as f64 * std::f64::consts::PI * x / domain.lx).sin();
            }
        }
        for i in 0..ny {
            let y = grid.origin()[1] + (i as f64 + 0.5) * grid.h();
            for k in 1..=n_modes {
                sy[i * n_modes + k - 1] = (k as f64 * std::f64::consts::PI * y / domain.ly).sin();
            }
        }
        Ok(Self {
            domain,
            grid: grid.clone(),
            n_modes,
            sx,
            sy,
        })
    }

    fn nx(&self) -> usize {
        self.grid.shape()[0]
    }

    fn ny(&self) -> usize {
        self.grid.shape()[1]
    }

    /// Full per-mode field amplitudes `sqrt(2 pi w(lambda)) * 2/sqrt(lx ly)`
    /// as a `J x J` matrix.
    fn amplitudes(&self, weight: ModeWeight) -> Vec<f64> {
        let j_max = self.n_modes;
        let norm = 2.0 / (self.domain.lx * self.domain.ly).sqrt();
        let mut amp = vec![0.0; j_max * j_max];
        for j in 1..=j_max {
            for k in 1..=j_max {
                let lambda = self.domain.eigenvalue(j, k);
                let coef = weight.coefficient(lambda);
                debug_assert!(coef >= 0.0, "mode weight went negative: {coef}");
                amp[(j - 1) * j_max + (k - 1)] =
                    norm * (2.0 * std::f64::consts::PI * coef).sqrt();
            }
        }
        amp
    }

    /// Field values `Sx (amp . beta) Sy^T` for scaled coefficients.
    fn field_values(&self, scaled: &[f64]) -> Vec<f64> {
        let t = matmul(&self.sx, self.nx(), self.n_modes, scaled, self.n_modes);
        matmul_abt(&t, self.nx(), self.n_modes, &self.sy, self.ny())
    }

    /// Exact variance profile `sum amp^2 sx^2 sy^2` per grid point.
    fn variance_from_amplitudes(&self, amp: &[f64]) -> Vec<f64> {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
        let t = matmul(&sq(&self.sx), self.nx(), self.n_modes, &sq(amp), self.n_modes);
        matmul_abt(&t, self.nx(), self.n_modes, &sq(&self.sy), self.ny())
    }

    /// Heat-smoothed variance at the domain center with a reference mode
    /// count, used to translate mode counts into an effective cutoff.
    fn heat_variance_at_center(&self, eps: f64, j_ref: usize) -> f64 {
        let center = [self.domain.lx / 2.0, self.domain.ly / 2.0];
        let mut v = 0.0;
        for j in 1..=j_ref {
            for k in 1..=j_ref {
                let lambda = self.domain.eigenvalue(j, k);
                let e = self.domain.eigenfunction(j, k, &center);
                v += 2.0
                    * std::f64::consts::PI
                    * (lambda * eps * eps / 2.0).exp()
                    * e
                    * e
                    / (-lambda);
            }
        }
        v
    }

    /// Effective cutoff for a non-scale weight: the `eps` whose
    /// heat-smoothed center variance (at a finer reference truncation)
    /// matches this construction's center variance. Reported as a label,
    /// never used in formulas.
    fn matched_cutoff(&self, amp: &[f64]) -> f64 {
        let center = [self.domain.lx / 2.0, self.domain.ly / 2.0];
        let norm = 2.0 / (self.domain.lx * self.domain.ly).sqrt();
        let mut target = 0.0;
        for j in 1..=self.n_modes {
            for k in 1..=self.n_modes {
                let a = amp[(j - 1) * self.n_modes + (k - 1)];
                let e = self.domain.eigenfunction(j, k, &center) / norm;
                target += a * a * e * e;
            }
        }
        let j_ref = (4 * self.n_modes).max(128);
        let mut lo = 1e-9_f64;
        let mut hi = self.domain.lx.min(self.domain.ly);
        if target >= self.heat_variance_at_center(lo, j_ref) {
            return lo;
        }
        if target <= self.heat_variance_at_center(hi, j_ref) {
            return hi;
        }
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if self.heat_variance_at_center(mid, j_ref) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }
}

/// Separable sampler for one mode-space weight at a fixed truncation.
#[derive(Debug, Clone)]
pub struct GffModeSampler {
    basis: ModeBasis,
    weight: ModeWeight,
    amp: Vec<f64>,
    variance: Arc<VarianceProfile>,
    eps: f64,
}

impl GffModeSampler {
    /// `n_modes` counts sine modes per axis, matching the truncated kernel
    /// sums in [`crate::kernels`].
    pub fn new(
        domain: RectangleDomain,
        grid: &GridDomain,
        n_modes: usize,
        weight: ModeWeight,
    ) -> Result<Self> {
        weight.validate()?;
        let basis = ModeBasis::new(domain, grid, n_modes)?;
        let amp = basis.amplitudes(weight);
        let variance = Arc::new(VarianceProfile::Exact(
            basis.variance_from_amplitudes(&amp),
        ));
        let eps = match weight {
            ModeWeight::HeatSmoothing { eps } => eps,
            ModeWeight::HeatBand { eps_lo, .. } => eps_lo,
            ModeWeight::SharpTruncation | ModeWeight::Massive { .. } => basis.matched_cutoff(&amp),
        };
        Ok(Self {
            basis,
            weight,
            amp,
            variance,
            eps,
        })
    }

    pub fn grid(&self) -> &GridDomain {
        &self.basis.grid
    }

    pub fn domain(&self) -> RectangleDomain {
        self.basis.domain
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes
    }

    pub fn weight(&self) -> ModeWeight {
        self.weight
    }

    pub fn variance(&self) -> &Arc<VarianceProfile> {
        &self.variance
    }

    /// Cutoff label carried by realizations: the scale parameter itself for
    /// heat weights, a variance-matched equivalent for the others.
    pub fn effective_cutoff(&self) -> f64 {
        self.eps
    }

    pub fn sample(&self, lineage: SeedLineage) -> FieldRealization {
        let j = self.basis.n_modes;
        let mut rng = lineage.rng();
        let mut beta = standard_normals(&mut rng, j * j);
        for (b, a) in beta.iter_mut().zip(&self.amp) {
            *b *= a;
        }
        FieldRealization {
            grid: self.basis.grid.clone(),
            values: self.basis.field_values(&beta),
            eps: self.eps,
            variance: self.variance.clone(),
            construction: self.weight.construction(),
            lineage,
            level: 0,
        }
    }
}

/// Heat-band refinement ladder: level 0 is the field smoothed at the
/// coarsest scale, each later level adds the independent band down to the
/// next scale, so the partial sums are exactly the heat-smoothed fields at
/// every rung.
#[derive(Debug, Clone)]
pub struct GffLadderSampler {
    basis: ModeBasis,
    ladder: CutoffLadder,
    amps: Vec<Vec<f64>>,
    variances: Vec<Arc<VarianceProfile>>,
}

impl GffLadderSampler {
    pub fn new(
        domain: RectangleDomain,
        grid: &GridDomain,
        ladder: CutoffLadder,
        n_modes: usize,
    ) -> Result<Self> {
        ladder.validate_for_grid(grid)?;
        if ladder.levels()[0] > domain.lx.min(domain.ly) {
            return Err(FieldError::InvalidParameter(format!(
                "ladder top {} exceeds the domain size",
                ladder.levels()[0]
            )));
        }
        let basis = ModeBasis::new(domain, grid, n_modes)?;
        let mut amps = Vec::with_capacity(ladder.len());
        let mut variances = Vec::with_capacity(ladder.len());
        let mut cumulative = vec![0.0; grid.n_cells()];
        for (k, &eps) in ladder.levels().iter().enumerate() {
            let weight = if k == 0 {
                ModeWeight::HeatSmoothing { eps }
            } else {
                ModeWeight::HeatBand {
                    eps_hi: ladder.levels()[k - 1],
                    eps_lo: eps,
                }
            };
            let amp = basis.amplitudes(weight);
            for (c, v) in cumulative
                .iter_mut()
                .zip(basis.variance_from_amplitudes(&amp))
            {
                *c += v;
            }
            amps.push(amp);
            variances.push(Arc::new(VarianceProfile::Exact(cumulative.clone())));
        }
        Ok(Self {
            basis,
            ladder,
            amps,
            variances,
        })
    }

    pub fn ladder(&self) -> &CutoffLadder {
        &self.ladder
    }

    pub fn grid(&self) -> &GridDomain {
        &self.basis.grid
    }

    /// Exact variance profile of the partial sum at rung `k`.
    pub fn variance_at(&self, k: usize) -> &Arc<VarianceProfile> {
        &self.variances[k]
    }

    pub fn sample_ladder(&self, lineage: SeedLineage) -> RefinementLadder {
        let j = self.basis.n_modes;
        let n = self.basis.grid.n_cells();
        let mut running = vec![0.0; n];
        let mut levels = Vec::with_capacity(self.amps.len());
        for (k, amp) in self.amps.iter().enumerate() {
            let mut rng = lineage.level_rng(k as u64);
            let mut beta = standard_normals(&mut rng, j * j);
            for (b, a) in beta.iter_mut().zip(amp) {
                *b *= a;
            }
            for (r, v) in running.iter_mut().zip(self.basis.field_values(&beta)) {
                *r += v;
            }
            levels.push(FieldRealization {
                grid: self.basis.grid.clone(),
                values: running.clone(),
                eps: self.ladder.levels()[k],
                variance: self.variances[k].clone(),
                construction: ConstructionTag::GffHeatWhiteNoise,
                lineage,
                level: k,
            });
        }
        RefinementLadder::new(levels)
    }
}

/// Odd reflection of a cell index about the grid faces with period `2n`,
/// matching the sine-series continuation of a Dirichlet field.
fn reflect_index(i: i64, n: usize) -> (usize, f64) {
    let period = 2 * n as i64;
    let j = i.rem_euclid(period);
    if j < n as i64 {
        (j as usize, 1.0)
    } else {
        ((period - 1 - j) as usize, -1.0)
    }
}

/// Bilinear interpolation of cell-center values at an arbitrary point, with
/// the field continued by odd reflection outside the grid.
fn bilinear_extended(grid: &GridDomain, values: &[f64], p: [f64; 2]) -> f64 {
    let (nx, ny) = (grid.shape()[0], grid.shape()[1]);
    let fx = (p[0] - grid.origin()[0]) / grid.h() - 0.5;
    let fy = (p[1] - grid.origin()[1]) / grid.h() - 0.5;
    let ix = fx.floor();
    let iy = fy.floor();
    let tx = fx - ix;
    let ty = fy - iy;
    let mut acc = 0.0;
    for (dx, wx) in [(0i64, 1.0 - tx), (1, tx)] {
        let (gx, ox) = reflect_index(ix as i64 + dx, nx);
        for (dy, wy) in [(0i64, 1.0 - ty), (1, ty)] {
            let (gy, oy) = reflect_index(iy as i64 + dy, ny);
            acc += wx * wy * ox * oy * values[gx * ny + gy];
        }
    }
    acc
}

fn check_circle_average(grid: &GridDomain, eps: f64, n_angles: usize) -> Result<()> {
    if grid.dim() != 2 {
        return Err(FieldError::InvalidParameter(
            "circle averaging needs a two-dimensional grid".into(),
        ));
    }
    if n_angles < 8 {
        return Err(FieldError::InvalidParameter(format!(
            "circle averaging needs at least 8 angles, got {n_angles}"
        )));
    }
    if !(eps > 0.0) || eps < 4.0 * grid.h() {
        return Err(FieldError::InvalidParameter(format!(
            "circle radius {eps} is below four grid spacings (h = {})",
            grid.h()
        )));
    }
    Ok(())
}

/// Mean of the field over `n_angles` equally spaced points on the circle of
/// radius `eps` around every cell center, interpolated bilinearly from the
/// cell values with odd reflection across the grid faces.
pub fn circle_average_values(
    grid: &GridDomain,
    values: &[f64],
    eps: f64,
    n_angles: usize,
) -> Result<Vec<f64>> {
    check_circle_average(grid, eps, n_angles)?;
    let angles: Vec<[f64; 2]> = (0..n_angles)
        .map(|m| {
            let th = (m as f64 + 0.5) / n_angles as f64 * std::f64::consts::TAU;
            [eps * th.cos(), eps * th.sin()]
        })
        .collect();
    let mut out = Vec::with_capacity(grid.n_cells());
    for flat in 0..grid.n_cells() {
        let c = grid.center(flat);
        let mut acc = 0.0;
        for a in &angles {
            acc += bilinear_extended(grid, values, [c[0] + a[0], c[1] + a[1]]);
        }
        out.push(acc / n_angles as f64);
    }
    Ok(out)
}

/// Circle-averages one realization. The variance profile of the averaged
/// field is not the input's, so the caller supplies one, typically the
/// empirical profile of a [`CircleAverageEnsemble`].
pub fn circle_average(
    fine: &FieldRealization,
    eps: f64,
    variance: Arc<VarianceProfile>,
) -> Result<FieldRealization> {
    let values = circle_average_values(&fine.grid, &fine.values, eps, CIRCLE_ANGLES)?;
    Ok(FieldRealization {
        grid: fine.grid.clone(),
        values,
        eps,
        variance,
        construction: ConstructionTag::CircleAverage,
        lineage: fine.lineage,
        level: fine.level,
    })
}

/// Circle-average construction over replicas of a mode-space field: a first
/// pass estimates the per-point variance of the averaged field, then
/// replicas are replayed deterministically with that shared profile.
#[derive(Debug, Clone)]
pub struct CircleAverageEnsemble {
    sampler: GffModeSampler,
    eps: f64,
    n_angles: usize,
    n_replicas: usize,
    master: u64,
    variance: Arc<VarianceProfile>,
}

impl CircleAverageEnsemble {
    pub fn new(
        sampler: GffModeSampler,
        eps: f64,
        n_replicas: usize,
        master: u64,
    ) -> Result<Self> {
        Self::with_angles(sampler, eps, n_replicas, master, CIRCLE_ANGLES)
    }

    pub fn with_angles(
        sampler: GffModeSampler,
        eps: f64,
        n_replicas: usize,
        master: u64,
        n_angles: usize,
    ) -> Result<Self> {
        check_circle_average(sampler.grid(), eps, n_angles)?;
        if n_replicas < 2 {
            return Err(FieldError::InvalidParameter(
                "empirical variance needs at least two replicas".into(),
            ));
        }
        let averaged = run_replicas(n_replicas, |r| {
            let fine = sampler.sample(SeedLineage::new(master, r));
            circle_average_values(&fine.grid, &fine.values, eps, n_angles)
                .expect("parameters were validated")
        });
        let n = sampler.grid().n_cells();
        let mut sq = vec![0.0; n];
        for rep in &averaged {
            for (s, v) in sq.iter_mut().zip(rep) {
                *s += v * v;
            }
        }
        // The construction is centered, so the mean-square is the unbiased
        // variance estimate.
        for s in sq.iter_mut() {
            *s /= n_replicas as f64;
        }
        Ok(Self {
            sampler,
            eps,
            n_angles,
            n_replicas,
            master,
            variance: Arc::new(VarianceProfile::Empirical(sq)),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_replicas(&self) -> usize {
        self.n_replicas
    }

    pub fn variance(&self) -> &Arc<VarianceProfile> {
        &self.variance
    }

    /// Replays replica `r` of the underlying field and returns its circle
    /// average with the shared empirical variance profile.
    pub fn realize(&self, replica: u64) -> FieldRealization {
        let lineage = SeedLineage::new(self.master, replica);
        let fine = self.sampler.sample(lineage);
        let values = circle_average_values(&fine.grid, &fine.values, self.eps, self.n_angles)
            .expect("parameters were validated");
        FieldRealization {
            grid: fine.grid,
            values,
            eps: self.eps,
            variance: self.variance.clone(),
            construction: ConstructionTag::CircleAverage,
            lineage,
            level: 0,
        }
    }
}

/// Exact circle average of a pure Dirichlet mode: the sine continuation is
/// a plane-wave combination, so averaging over the circle of radius `eps`
/// multiplies the mode by `J_0(eps sqrt(-lambda))`.
pub fn mode_circle_average_factor(domain: &RectangleDomain, j: usize, k: usize, eps: f64) -> f64 {
    bessel_j0(eps * (-domain.eigenvalue(j, k)).sqrt())
}
