//! Covariance kernels for log-correlated Gaussian fields.
//!
//! Every field construction in this crate is driven by a kernel of the form
//! `K(x, y) = ln_+(T / |x - y|) + g(x, y)` with `g` bounded and continuous,
//! or by an exact Green function with the same logarithmic diagonal blowup.
//! The submodules provide:
//!
//! - [`exact_log`]: the pure truncated logarithm, its decomposition into a
//!   countable sum of nonnegative-definite levels, and the induced cutoff
//!   approximations with exact closed forms.
//! - [`star`]: kernels `int_1^{1/eps} k(u x) du / u` built from a seed
//!   covariance `k`, which satisfy an exact scaling relation.
//! - [`spherical`]: the three-dimensional kernel obtained by averaging a
//!   one-dimensional logarithm over directions of the sphere.
//! - [`green`]: Dirichlet Green functions of a rectangle through eigenfunction
//!   sums, their heat-kernel smoothings, and the massive variant.
//! - [`dgff`]: the lattice Green function of the square-lattice discrete
//!   Gaussian free field.
//! - [`covariance`]: assembly of dense covariance matrices from any kernel,
//!   with a diagonal jitter ladder for roundoff-scale eigenvalue defects.

pub mod covariance;
pub mod dgff;
pub mod exact_log;
pub mod green;
pub mod spherical;
pub mod star;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use covariance::{assemble_covariance_matrix, CovarianceMatrix};
pub use dgff::{DgffGreenSolver, SquareLattice};
pub use exact_log::{eval_exact_log, ExactLogCutoff, SigmaPositiveDecomposition};
pub use green::{
    green_rectangle_eigen, heat_band_green, massive_green, RectangleDomain, TruncatedSum,
};
pub use spherical::{eval_spherical_log, sphere_rule, spherical_log_reference, SphericalCutoff};
pub use star::{eval_star_kernel, star_band, StarCutoff, StarSeed};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel domain error: {0}")]
    Domain(String),
    #[error("{0}")]
    OpenProblem(String),
    #[error(transparent)]
    Quadrature(#[from] crate::quad::QuadError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Bounded continuous perturbation added on top of an exact-log kernel,
/// evaluated at a pair of points.
pub type GOffset = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Declarative description of a kernel family with its parameters. This is
/// the serializable half of [`KernelSpec`]; closures such as the bounded
/// offset live outside it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelFamily {
    /// `ln_+(T / |x - y|)` in dimension `d` (1, 2 or 3).
    ExactLog { d: usize, t: f64 },
    /// One-dimensional scale integral of a seed covariance.
    StarScale { seed: StarSeed },
    /// Directional average of the one-dimensional logarithm in dimension 3.
    SphericalLog { t: f64 },
    /// `2 pi` times the Dirichlet Green function of `(0, lx) x (0, ly)`.
    GreenDirichletRectangle { lx: f64, ly: f64 },
    /// Massive variant, `2 pi` times the Green function of `m^2 - Laplacian`.
    MassiveGreen { lx: f64, ly: f64, mass: f64 },
    /// Lattice Green function of the discrete free field on an `n x n`
    /// square grid with Dirichlet boundary.
    DgffSquareLattice { n: usize },
}

impl KernelFamily {
    /// Ambient dimension of the kernel's arguments.
    pub fn dim(&self) -> usize {
        match self {
            KernelFamily::ExactLog { d, .. } => *d,
            KernelFamily::StarScale { .. } => 1,
            KernelFamily::SphericalLog { .. } => 3,
            KernelFamily::GreenDirichletRectangle { .. } => 2,
            KernelFamily::MassiveGreen { .. } => 2,
            KernelFamily::DgffSquareLattice { .. } => 2,
        }
    }

    /// Validates parameter ranges; every constructor on [`KernelSpec`] calls
    /// this before returning.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelFamily::ExactLog { d, t } => {
                if !(1..=3).contains(d) {
                    return Err(KernelError::InvalidParameter(format!(
                        "exact-log dimension must be 1, 2 or 3, got {d}"
                    )));
                }
                require_positive(*t, "top scale T")?;
            }
            KernelFamily::StarScale { seed } => seed.validate()?,
            KernelFamily::SphericalLog { t } => require_positive(*t, "top scale T")?,
            KernelFamily::GreenDirichletRectangle { lx, ly } => {
                require_positive(*lx, "rectangle side lx")?;
                require_positive(*ly, "rectangle side ly")?;
            }
            KernelFamily::MassiveGreen { lx, ly, mass } => {
                require_positive(*lx, "rectangle side lx")?;
                require_positive(*ly, "rectangle side ly")?;
                require_positive(*mass, "mass")?;
            }
            KernelFamily::DgffSquareLattice { n } => {
                if *n < 2 {
                    return Err(KernelError::InvalidParameter(format!(
                        "lattice size must be at least 2, got {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn require_positive(value: f64, what: &str) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(KernelError::InvalidParameter(format!(
            "{what} must be a positive finite number, got {value}"
        )));
    }
    Ok(())
}

/// A validated kernel family together with an optional bounded offset.
#[derive(Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub g_offset: Option<GOffset>,
}

impl std::fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelSpec")
            .field("family", &self.family)
            .field("g_offset", &self.g_offset.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            g_offset: None,
        })
    }

    pub fn exact_log(d: usize, t: f64) -> Result<Self> {
        Self::new(KernelFamily::ExactLog { d, t })
    }

    pub fn star_scale(seed: StarSeed) -> Result<Self> {
        Self::new(KernelFamily::StarScale { seed })
    }

    pub fn spherical_log(t: f64) -> Result<Self> {
        Self::new(KernelFamily::SphericalLog { t })
    }

    pub fn green_rectangle(lx: f64, ly: f64) -> Result<Self> {
        Self::new(KernelFamily::GreenDirichletRectangle { lx, ly })
    }

    pub fn massive_green(lx: f64, ly: f64, mass: f64) -> Result<Self> {
        Self::new(KernelFamily::MassiveGreen { lx, ly, mass })
    }

    pub fn dgff(n: usize) -> Result<Self> {
        Self::new(KernelFamily::DgffSquareLattice { n })
    }

    /// Attaches a bounded continuous offset `g(x, y)`; only meaningful for
    /// the exact-log family.
    pub fn with_g_offset(mut self, g: GOffset) -> Self {
        self.g_offset = Some(g);
        self
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }
}

/// Pointwise-evaluable covariance used to assemble dense matrices. The
/// diagonal is served by [`CovarianceKernel::variance`] so that families
/// whose off-diagonal formula degenerates at zero separation still produce
/// exact variances.
pub trait CovarianceKernel: Send + Sync {
    fn dim(&self) -> usize;
    /// Covariance between two distinct points.
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64>;
    /// Variance at a point.
    fn variance(&self, x: &[f64]) -> Result<f64>;
    fn description(&self) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_validation_rejects_bad_parameters() {
        assert!(KernelSpec::exact_log(0, 1.0).is_err());
        assert!(KernelSpec::exact_log(4, 1.0).is_err());
        assert!(KernelSpec::exact_log(2, 0.0).is_err());
        assert!(KernelSpec::exact_log(2, f64::NAN).is_err());
        assert!(KernelSpec::green_rectangle(1.0, -1.0).is_err());
        assert!(KernelSpec::massive_green(1.0, 1.0, 0.0).is_err());
        assert!(KernelSpec::dgff(1).is_err());
        assert!(KernelSpec::exact_log(2, 1.0).is_ok());
    }

    #[test]
    fn family_serde_round_trip() {
        let fam = KernelFamily::MassiveGreen {
            lx: 1.0,
            ly: 2.0,
            mass: 2.0,
        };
        let json = serde_json::to_string(&fam).unwrap();
        assert!(json.contains("massive-green"));
        let back: KernelFamily = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fam);
        let unknown = r#"{"family":"exact-log","d":1,"t":1.0,"bogus":3}"#;
        assert!(serde_json::from_str::<KernelFamily>(unknown).is_err());
    }
}
