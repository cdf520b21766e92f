//! Scale-slab white-noise sampler for log-correlated fields on large grids.
//!
//! Scales `t` in `[2h, T]` are split into slabs `[2kh, 2(k+1)h)`. Slab `k`
//! carries i.i.d. cell noise on a padded lattice, and a cell's slab field is
//! the noise sum over the square window of halfwidth `k` around it, scaled
//! by `s_k` with
//!
//! - `s_k^2 = h   * int_slab dt/t^2 = 1/(2k(k+1))` in dimension 1,
//! - `s_k^2 = h^2 * int_slab dt/t^3 = (1/k^2 - 1/(k+1)^2)/8` in dimension 2,
//!
//! the slab discretizations of the cone measures whose full integrals have
//! logarithmic diagonals. Window sums of overlapping squares give the exact
//! stationary covariance
//!
//! `C(delta) = sum_k s_k^2 prod_axes (2k+1 - |delta_a|)_+`
//!
//! in cell units, which is `ln(T / (h ||delta||_inf))` plus a bounded,
//! direction-dependent offset. Each slab is summed with a prefix table, so
//! a replica costs `O(cells)` per slab, and slab `k` always draws from
//! stream `k` of the replica, making realizations independent of how a
//! ladder groups slabs into levels.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::rng::SeedLineage;

use super::{
    standard_normals, ConstructionTag, CutoffLadder, FieldError, FieldRealization, GridDomain,
    RefinementLadder, Result, VarianceProfile,
};

/// Per-cell noise scale for slab `k`.
fn slab_sigma_sq(d: usize, k: usize) -> f64 {
    let kf = k as f64;
    match d {
        1 => 1.0 / (2.0 * kf * (kf + 1.0)),
        2 => (1.0 / (kf * kf) - 1.0 / ((kf + 1.0) * (kf + 1.0))) / 8.0,
        _ => unreachable!("slab sampler is one- or two-dimensional"),
    }
}

/// Adds `sigma` times the centered window sums of fresh slab noise.
fn add_slab(values: &mut [f64], ns: &[usize], k: usize, sigma: f64, rng: &mut ChaCha8Rng) {
    match ns {
        [n] => {
            let pn = n + 2 * k;
            let mut p = standard_normals(rng, pn);
            for i in 1..pn {
                p[i] += p[i - 1];
            }
            for i in 0..*n {
                let mut s = p[i + 2 * k];
                if i > 0 {
                    s -= p[i - 1];
                }
                values[i] += sigma * s;
            }
        }
        [n0, n1] => {
            let (px, py) = (n0 + 2 * k, n1 + 2 * k);
            let mut p = standard_normals(rng, px * py);
            for a in 0..px {
                for b in 1..py {
                    p[a * py + b] += p[a * py + b - 1];
                }
            }
            for a in 1..px {
                for b in 0..py {
                    p[a * py + b] += p[(a - 1) * py + b];
                }
            }
            for i in 0..*n0 {
                for j in 0..*n1 {
                    let (a1, b1) = (i + 2 * k, j + 2 * k);
                    let mut s = p[a1 * py + b1];
                    if i > 0 {
                        s -= p[(i - 1) * py + b1];
                    }
                    if j > 0 {
                        s -= p[a1 * py + j - 1];
                    }
                    if i > 0 && j > 0 {
                        s += p[(i - 1) * py + j - 1];
                    }
                    values[i * n1 + j] += sigma * s;
                }
            }
        }
        _ => unreachable!("slab sampler is one- or two-dimensional"),
    }
}

/// White-noise scale-slab sampler with square windows.
#[derive(Debug, Clone)]
pub struct SquareConeSampler {
    grid: GridDomain,
    ladder: CutoffLadder,
    /// `T_eff = 2 h k_top`; slabs run over `k = 1 .. k_top - 1`.
    k_top: usize,
    /// Slab index at which the field for ladder level `j` starts.
    k_min: Vec<usize>,
    variances: Vec<Arc<VarianceProfile>>,
}

impl SquareConeSampler {
    /// `t` is the requested top scale; it is rounded to the nearest slab
    /// boundary `2 h k_top`. Every ladder cutoff must sit on a slab
    /// boundary as well, i.e. be an integer multiple of `2h`.
    pub fn new(grid: &GridDomain, t: f64, ladder: CutoffLadder) -> Result<Self> {
        let d = grid.dim();
        if d > 2 {
            return Err(FieldError::InvalidParameter(
                "the scale-slab route supports dimensions 1 and 2".into(),
            ));
        }
        ladder.validate_for_grid(grid)?;
        let step = 2.0 * grid.h();
        let k_top = (t / step).round() as usize;
        if k_top < 2 {
            return Err(FieldError::InvalidParameter(format!(
                "top scale {t} leaves no slab above the grid cutoff {step}"
            )));
        }
        let mut k_min = Vec::with_capacity(ladder.len());
        for &eps in ladder.levels() {
            let ratio = eps / step;
            let k = ratio.round();
            if (ratio - k).abs() > 1e-9 || k < 1.0 {
                return Err(FieldError::InvalidParameter(format!(
                    "ladder cutoff {eps} is not a positive multiple of two grid spacings \
                     ({step}); slab boundaries sit at multiples of {step}"
                )));
            }
            let k = k as usize;
            if k > k_top {
                return Err(FieldError::InvalidParameter(format!(
                    "ladder cutoff {eps} exceeds the effective top scale {}",
                    step * k_top as f64
                )));
            }
            k_min.push(k);
        }
        let n = grid.n_cells();
        let mut variances = Vec::with_capacity(ladder.len());
        for &k in &k_min {
            let var: f64 = (k..k_top)
                .map(|s| slab_sigma_sq(d, s) * ((2 * s + 1) as f64).powi(d as i32))
                .sum();
            variances.push(Arc::new(VarianceProfile::constant(var, n)));
        }
        Ok(Self {
            grid: grid.clone(),
            ladder,
            k_top,
            k_min,
            variances,
        })
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn ladder(&self) -> &CutoffLadder {
        &self.ladder
    }

    /// Effective top scale after rounding to a slab boundary.
    pub fn t_eff(&self) -> f64 {
        2.0 * self.grid.h() * self.k_top as f64
    }

    /// First slab included at ladder level `j`.
    pub fn slab_start(&self, level: usize) -> usize {
        self.k_min[level]
    }

    /// Exact variance of the field at ladder level `j` (stationary).
    pub fn variance_at(&self, level: usize) -> f64 {
        self.variances[level].values()[0]
    }

    /// Exact covariance of the level-`j` field between cells separated by
    /// `delta` (in cells): the window-overlap sum over included slabs.
    pub fn level_covariance(&self, level: usize, delta: &[i64]) -> f64 {
        self.slab_range_covariance(self.k_min[level], self.k_top, delta)
    }

    /// Exact covariance of the finest field.
    pub fn finest_covariance(&self, delta: &[i64]) -> f64 {
        self.level_covariance(self.ladder.len() - 1, delta)
    }

    fn slab_range_covariance(&self, k_lo: usize, k_hi: usize, delta: &[i64]) -> f64 {
        let d = self.grid.dim();
        assert_eq!(delta.len(), d);
        (k_lo..k_hi)
            .map(|k| {
                let overlap: f64 = delta
                    .iter()
                    .map(|&da| ((2 * k + 1) as i64 - da.abs()).max(0) as f64)
                    .product();
                slab_sigma_sq(d, k) * overlap
            })
            .sum()
    }

    /// All ladder levels for one replica. Slab `k` draws from replica
    /// stream `k`, so the same lineage produces the same fields no matter
    /// how the ladder splits the slabs.
    pub fn sample_ladder(&self, lineage: SeedLineage) -> RefinementLadder {
        let n = self.grid.n_cells();
        let mut running = vec![0.0; n];
        let mut levels = Vec::with_capacity(self.ladder.len());
        for (j, &eps) in self.ladder.levels().iter().enumerate() {
            let k_hi = if j == 0 { self.k_top } else { self.k_min[j - 1] };
            for k in self.k_min[j]..k_hi {
                let mut rng = lineage.level_rng(k as u64);
                let sigma = slab_sigma_sq(self.grid.dim(), k).sqrt();
                add_slab(&mut running, self.grid.shape(), k, sigma, &mut rng);
            }
            levels.push(FieldRealization {
                grid: self.grid.clone(),
                values: running.clone(),
                eps,
                variance: self.variances[j].clone(),
                construction: ConstructionTag::ScaleSlabWhiteNoise,
                lineage,
                level: j,
            });
        }
        RefinementLadder::new(levels)
    }

    /// Only the realization at ladder level `j`. Slabs are added in the
    /// same grouped order as `sample_ladder`, so the values match that
    /// ladder's rung bit for bit.
    pub fn sample_level(&self, lineage: SeedLineage, level: usize) -> FieldRealization {
        let n = self.grid.n_cells();
        let mut running = vec![0.0; n];
        for j in 0..=level {
            let k_hi = if j == 0 { self.k_top } else { self.k_min[j - 1] };
            for k in self.k_min[j]..k_hi {
                let mut rng = lineage.level_rng(k as u64);
                let sigma = slab_sigma_sq(self.grid.dim(), k).sqrt();
                add_slab(&mut running, self.grid.shape(), k, sigma, &mut rng);
            }
        }
        FieldRealization {
            grid: self.grid.clone(),
            values: running,
            eps: self.ladder.levels()[level],
            variance: self.variances[level].clone(),
            construction: ConstructionTag::ScaleSlabWhiteNoise,
            lineage,
            level,
        }
    }

    /// The realization at the finest cutoff.
    pub fn sample_finest(&self, lineage: SeedLineage) -> FieldRealization {
        self.sample_level(lineage, self.ladder.len() - 1)
    }
}
