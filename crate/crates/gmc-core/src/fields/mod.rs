//! Cutoff Gaussian field constructions on regular grids.
//!
//! A field realization is a vector of values at cell centers together with
//! the exact (or, for empirical constructions, estimated) variance profile at
//! the same points and the cutoff scale it represents. Chaos measures divide
//! by the variance profile pointwise, so constructions must report it
//! honestly rather than assuming stationarity.
//!
//! Construction routes:
//!
//! - [`dense`]: Cholesky factorization of an explicitly assembled covariance
//!   matrix; exact for any kernel but limited to small grids.
//! - [`cone`]: white-noise averaging over square scale slabs, linear in the
//!   grid size per slab, for exact-log kernels on big one- and
//!   two-dimensional grids, with independent ladder increments by
//!   construction.
//! - [`gff`]: eigenfunction and heat-band mode-space samplers for the
//!   Dirichlet free field on a rectangle, plus circle averaging.
//! - [`dgff_field`]: the discrete free field through its banded lattice
//!   factorization.
//! - [`checks`]: smoothness and ladder-consistency diagnostics.

pub mod checks;
pub mod cone;
pub mod dense;
pub mod dgff_field;
pub mod gff;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeedLineage;

pub use checks::{
    ladder_consistency_check, smoothness_check, ConsistencyReport, SmoothnessLevel,
    SmoothnessReport,
};
pub use cone::SquareConeSampler;
pub use dense::{
    sample_gaussian_on_grid, BandFamily, DenseBandLadder, DenseSampler, RefinementSampler,
};
pub use dgff_field::DgffSampler;
pub use gff::{
    circle_average, circle_average_values, CircleAverageEnsemble, GffLadderSampler,
    GffModeSampler, ModeWeight, CIRCLE_ANGLES,
};

/// Largest cell count for any grid in the crate.
pub const REFINEMENT_CELL_CAP: usize = 1 << 20;
/// Largest cell count for which dense covariance assembly is allowed.
pub const DENSE_CELL_CAP: usize = 1 << 13;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid field parameter: {0}")]
    InvalidParameter(String),
    #[error("grid of {cells} cells exceeds the cap of {cap} for this route; {hint}")]
    GridTooLarge {
        cells: usize,
        cap: usize,
        hint: String,
    },
    #[error(
        "cutoff ladder is finer than the grid resolves: eps = {eps:.6e} needs at least two \
         grid spacings (h = {h:.6e})"
    )]
    LadderBelowGrid { eps: f64, h: f64 },
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// Regular grid of cells with a common spacing along every axis. Cell
/// centers sit at `origin + (index + 1/2) h` per axis; indexing is row-major
/// with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    origin: Vec<f64>,
    ns: Vec<usize>,
    h: f64,
}

impl GridDomain {
    pub fn new(origin: Vec<f64>, ns: Vec<usize>, h: f64) -> Result<Self> {
        if origin.len() != ns.len() || origin.is_empty() || origin.len() > 3 {
            return Err(FieldError::InvalidParameter(format!(
                "grid needs matching origin/shape in dimension 1..=3, got {} and {}",
                origin.len(),
                ns.len()
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(FieldError::InvalidParameter(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        if ns.iter().any(|&n| n == 0) {
            return Err(FieldError::InvalidParameter(
                "grid must have at least one cell per axis".into(),
            ));
        }
        let cells: usize = ns.iter().product();
        if cells > REFINEMENT_CELL_CAP {
            return Err(FieldError::GridTooLarge {
                cells,
                cap: REFINEMENT_CELL_CAP,
                hint: "reduce the resolution or split the domain".into(),
            });
        }
        Ok(Self { origin, ns, h })
    }

    /// `n` cells on `[0, 1]`.
    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::new(vec![0.0], vec![n], 1.0 / n as f64)
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(vec![0.0, 0.0], vec![n, n], 1.0 / n as f64)
    }

    /// `n x n` cells on an axis-aligned square with the given corner and
    /// side length.
    pub fn square(corner: [f64; 2], side: f64, n: usize) -> Result<Self> {
        Self::new(corner.to_vec(), vec![n, n], side / n as f64)
    }

    pub fn dim(&self) -> usize {
        self.ns.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.ns
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn n_cells(&self) -> usize {
        self.ns.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.ns[axis] as f64 * self.h
    }

    /// Flat index of a multi-index.
    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        let mut flat = 0;
        for (m, n) in multi.iter().zip(&self.ns) {
            debug_assert!(m < n);
            flat = flat * n + m;
        }
        flat
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            multi[axis] = flat % self.ns[axis];
            flat /= self.ns[axis];
        }
        multi
    }

    /// Center of the cell with the given flat index.
    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.origin)
            .map(|(m, o)| o + (*m as f64 + 0.5) * self.h)
            .collect()
    }

    /// All cell centers in flat-index order.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.n_cells()).map(|i| self.center(i)).collect()
    }
}

/// Strictly decreasing sequence of cutoff scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffLadder {
    epss: Vec<f64>,
}

impl CutoffLadder {
    pub fn new(epss: Vec<f64>) -> Result<Self> {
        if epss.is_empty() {
            return Err(FieldError::InvalidParameter(
                "cutoff ladder must have at least one level".into(),
            ));
        }
        for w in epss.windows(2) {
            if !(w[1] < w[0]) {
                return Err(FieldError::InvalidParameter(format!(
                    "cutoff ladder must be strictly decreasing, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        if *epss.last().unwrap() <= 0.0 {
            return Err(FieldError::InvalidParameter(
                "cutoff scales must be positive".into(),
            ));
        }
        Ok(Self { epss })
    }

    /// `eps0 / 2^k` for `k = 0 .. n_levels`.
    pub fn dyadic(eps0: f64, n_levels: usize) -> Result<Self> {
        if !(eps0 > 0.0) {
            return Err(FieldError::InvalidParameter(format!(
                "ladder top must be positive, got {eps0}"
            )));
        }
        Self::new((0..=n_levels).map(|k| eps0 / (1u64 << k) as f64).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.epss
    }

    pub fn len(&self) -> usize {
        self.epss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epss.is_empty()
    }

    pub fn finest(&self) -> f64 {
        *self.epss.last().unwrap()
    }

    /// The finest cutoff must stay at or above two grid spacings, otherwise
    /// the grid cannot resolve the field it claims to carry.
    pub fn validate_for_grid(&self, grid: &GridDomain) -> Result<()> {
        if self.finest() < 2.0 * grid.h() - 1e-12 {
            return Err(FieldError::LadderBelowGrid {
                eps: self.finest(),
                h: grid.h(),
            });
        }
        Ok(())
    }
}

/// Variance of the field at every cell center, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarianceProfile {
    /// Computed exactly from the construction.
    Exact(Vec<f64>),
    /// Estimated across replicas; consumers should expect sampling noise.
    Empirical(Vec<f64>),
}

impl VarianceProfile {
    pub fn values(&self) -> &[f64] {
        match self {
            VarianceProfile::Exact(v) | VarianceProfile::Empirical(v) => v,
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, VarianceProfile::Empirical(_))
    }

    pub fn constant(v: f64, n: usize) -> Self {
        VarianceProfile::Exact(vec![v; n])
    }
}

/// Which route produced a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionTag {
    DenseCholesky,
    LevelSum,
    ScaleSlabWhiteNoise,
    GffEigen,
    GffHeatWhiteNoise,
    CircleAverage,
    DgffLattice,
}

/// One sampled cutoff field.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    pub grid: GridDomain,
    pub values: Vec<f64>,
    /// Cutoff scale this realization represents.
    pub eps: f64,
    pub variance: Arc<VarianceProfile>,
    pub construction: ConstructionTag,
    pub lineage: SeedLineage,
    /// Index within a refinement ladder (0 for standalone fields).
    pub level: usize,
}

impl FieldRealization {
    pub fn value(&self, multi: &[usize]) -> f64 {
        self.values[self.grid.index(multi)]
    }
}

/// One replica's realizations at every ladder level, ordered coarse to fine
/// and coupled so that `X_{k}` refines `X_{k-1}`. For constructions built
/// from independent bands, consecutive differences are the band fields.
#[derive(Debug, Clone)]
pub struct RefinementLadder {
    levels: Vec<FieldRealization>,
}

impl RefinementLadder {
    pub fn new(levels: Vec<FieldRealization>) -> Self {
        assert!(!levels.is_empty(), "a ladder needs at least one level");
        Self { levels }
    }

    pub fn levels(&self) -> &[FieldRealization] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &FieldRealization {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Finest realization.
    pub fn finest(&self) -> &FieldRealization {
        self.levels.last().unwrap()
    }

    /// Values of the increment `X_k - X_{k-1}` (the level itself for k = 0).
    pub fn increment_values(&self, k: usize) -> Vec<f64> {
        if k == 0 {
            return self.levels[0].values.clone();
        }
        self.levels[k]
            .values
            .iter()
            .zip(&self.levels[k - 1].values)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn into_levels(self) -> Vec<FieldRealization> {
        self.levels
    }
}

/// `n` independent standard normals from the given stream.
pub(crate) fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
