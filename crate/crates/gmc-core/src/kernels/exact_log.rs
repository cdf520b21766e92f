//! The truncated logarithm `ln_+(T / |x - y|)` and its decomposition into
//! nonnegative-definite levels.
//!
//! With `mu = 1` in dimension 1 and `mu = 1/2` in dimension 2, the kernel
//! satisfies the exact mixture representation
//!
//! ```text
//! ln_+(T / r) = (1 / mu) int_0^inf (t - r^mu)_+ nu_S(dt),
//! nu_S(dt) = 1_{[0, S]}(t) dt / t^2 + (1 / S) delta_S(dt),   S = T^mu,
//! ```
//!
//! and each function `r -> (t - r^mu)_+` is a covariance in the respective
//! dimension (the triangle function in d = 1, its square-root composition in
//! d = 2). Slicing the `t`-axis at `1/n` gives levels
//!
//! ```text
//! K_n(r) = (1 / mu) int_{[1/n, 1/(n-1))} (t - r^mu)_+ nu_S(dt),
//! ```
//!
//! each again a covariance, with `sum_{n <= N} K_n(r)` equal to the full
//! kernel exactly as soon as `1/N <= r^mu`. Truncating `nu_S` at `t >=
//! eps^mu` instead yields the continuum cutoff family
//!
//! ```text
//! K_eps(r) = ln(T / r)                                  for eps <= r <= T,
//!            ln(T / eps) + (1/mu) (1 - (r / eps)^mu)    for r <= eps,
//!            0                                          for r >= T,
//! ```
//!
//! which obeys the exact shift relation `K_{lambda eps}(lambda r) = K_eps(r)
//! + ln(1 / lambda)` for `lambda r <= T`, the workhorse of the
//! scale-invariance checks. No decomposition of this kind is known in
//! dimension 3; requesting one is an explicit error rather than a silent
//! approximation.

use super::{require_positive, CovarianceKernel, KernelError, KernelFamily, KernelSpec, Result};
use crate::quad;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_pair(d: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != d || y.len() != d {
        return Err(KernelError::Domain(format!(
            "points must have dimension {d}, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(norm(&diff))
}

/// Evaluates `ln_+(T / |x - y|)` plus the spec's bounded offset if present.
///
/// The diagonal is excluded: the kernel diverges there and every consumer
/// needs the cutoff variance instead.
pub fn eval_exact_log(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let KernelFamily::ExactLog { d, t } = spec.family else {
        return Err(KernelError::InvalidParameter(format!(
            "eval_exact_log needs an exact-log kernel, got {:?}",
            spec.family
        )));
    };
    let r = check_pair(d, x, y)?;
    if r == 0.0 {
        return Err(KernelError::Domain(
            "exact-log kernel diverges on the diagonal; use a cutoff variance".into(),
        ));
    }
    let base = (t / r).ln().max(0.0);
    let offset = spec.g_offset.as_ref().map_or(0.0, |g| g(x, y));
    Ok(base + offset)
}

/// The level decomposition of the exact logarithm in dimensions 1 and 2.
#[derive(Debug, Clone, Copy)]
pub struct SigmaPositiveDecomposition {
    d: usize,
    t: f64,
    mu: f64,
}

impl SigmaPositiveDecomposition {
    pub fn new(d: usize, t: f64) -> Result<Self> {
        require_positive(t, "top scale T")?;
        let mu = match d {
            1 => 1.0,
            2 => 0.5,
            3 => {
                return Err(KernelError::OpenProblem(
                    "no decomposition of ln_+(T/r) into nonnegative-definite summands is \
                     known in dimension 3; it is an open question whether one exists"
                        .into(),
                ))
            }
            other => {
                return Err(KernelError::InvalidParameter(format!(
                    "decomposition dimension must be 1, 2 or 3, got {other}"
                )))
            }
        };
        Ok(Self { d, t, mu })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn top_scale(&self) -> f64 {
        self.t
    }

    /// `int_{[a, b)} (t - rho)_+ nu_S(dt)` scaled by `1/mu`, for the slice
    /// belonging to one level or one cutoff band.
    fn slice_value(&self, a: f64, b: f64, r: f64) -> f64 {
        let s = self.t.powf(self.mu);
        let rho = r.powf(self.mu);
        let alpha = a.max(rho);
        let beta = b.min(s);
        let mut acc = 0.0;
        if beta > alpha {
            if alpha == 0.0 {
                // Zero separation with the slice reaching down to scale
                // zero: the variance integral diverges.
                return f64::INFINITY;
            }
            acc += (beta / alpha).ln() + rho * (1.0 / beta - 1.0 / alpha);
        }
        if s >= a && s < b {
            acc += (s - rho).max(0.0) / s;
        }
        acc / self.mu
    }

    /// Closed form of level `n >= 1`, the slice `t in [1/n, 1/(n-1))`.
    pub fn level_value(&self, n: usize, r: f64) -> f64 {
        assert!(n >= 1, "levels are indexed from 1");
        assert!(r >= 0.0, "separation must be nonnegative");
        let a = 1.0 / n as f64;
        let b = if n == 1 {
            f64::INFINITY
        } else {
            1.0 / (n - 1) as f64
        };
        self.slice_value(a, b, r)
    }

    /// Same slice as [`Self::level_value`] computed by adaptive quadrature on
    /// the density part of `nu_S`, as an independent check of the closed
    /// form.
    pub fn level_value_quadrature(&self, n: usize, r: f64, tol: f64) -> Result<f64> {
        assert!(n >= 1, "levels are indexed from 1");
        let s = self.t.powf(self.mu);
        let rho = r.powf(self.mu);
        let a = 1.0 / n as f64;
        let b = if n == 1 {
            f64::INFINITY
        } else {
            1.0 / (n - 1) as f64
        };
        let hi = b.min(s);
        let mut acc = 0.0;
        if hi > a {
            let q = quad::integrate(|t| (t - rho).max(0.0) / (t * t), a, hi, tol)?;
            acc += q.value;
        }
        if s >= a && s < b {
            acc += (s - rho).max(0.0) / s;
        }
        Ok(acc / self.mu)
    }

    /// Variance contributed by level `n`.
    pub fn level_variance(&self, n: usize) -> f64 {
        self.level_value(n, 0.0)
    }

    /// Cutoff scale reached by the first `n` levels: their slices cover
    /// `t >= 1/n`, so the partial sum is the cutoff kernel at
    /// `eps = (1/n)^(1/mu)`.
    pub fn level_cutoff(&self, n_levels: usize) -> f64 {
        assert!(n_levels >= 1, "level cutoff needs at least one level");
        (1.0 / n_levels as f64).powf(1.0 / self.mu)
    }

    /// `sum_{n=1}^{N} K_n(r)`. Equals `ln_+(T/r)` exactly once
    /// `1/N <= r^mu`.
    pub fn partial_sum(&self, r: f64, n_levels: usize) -> f64 {
        (1..=n_levels).map(|n| self.level_value(n, r)).sum()
    }

    /// Exact remainder after `N` levels,
    /// `ln_+(T/r) - sum_{n <= N} K_n(r)`, which is the slice `t < 1/N`.
    pub fn truncation_tail(&self, r: f64, n_levels: usize) -> f64 {
        assert!(n_levels >= 1);
        self.slice_value(0.0, 1.0 / n_levels as f64, r)
    }

    /// Full kernel value, for convenience in tests.
    pub fn full_value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            f64::INFINITY
        } else {
            (self.t / r).ln().max(0.0)
        }
    }

    /// The continuum cutoff kernel obtained by truncating `nu_S` at
    /// `t >= eps^mu`.
    pub fn cutoff_value(&self, eps: f64, r: f64) -> f64 {
        assert!(eps > 0.0, "cutoff must be positive");
        if r >= self.t {
            return 0.0;
        }
        if r >= eps {
            return (self.t / r).ln();
        }
        let base = (self.t / eps).ln();
        if base < 0.0 {
            // Cutoff coarser than the top scale: only the tail of the atom
            // survives, computed from the slice directly.
            return self.slice_value(eps.powf(self.mu), f64::INFINITY, r);
        }
        base + (1.0 - (r / eps).powf(self.mu)) / self.mu
    }

    /// Variance of the cutoff field, `ln(T / eps) + 1/mu` for `eps <= T`.
    pub fn cutoff_variance(&self, eps: f64) -> f64 {
        self.cutoff_value(eps, 0.0)
    }

    /// Covariance of the band increment between cutoffs `eps_hi > eps_lo`.
    pub fn band_value(&self, eps_hi: f64, eps_lo: f64, r: f64) -> f64 {
        assert!(
            eps_hi > eps_lo && eps_lo > 0.0,
            "band needs eps_hi > eps_lo > 0"
        );
        self.cutoff_value(eps_lo, r) - self.cutoff_value(eps_hi, r)
    }
}

/// Dense-sampling kernel for the cutoff exact logarithm.
#[derive(Clone)]
pub struct ExactLogCutoff {
    decomposition: SigmaPositiveDecomposition,
    eps: f64,
    g_offset: Option<super::GOffset>,
}

impl ExactLogCutoff {
    pub fn new(d: usize, t: f64, eps: f64) -> Result<Self> {
        require_positive(eps, "cutoff eps")?;
        if eps >= t {
            return Err(KernelError::InvalidParameter(format!(
                "cutoff eps = {eps} must be smaller than the top scale T = {t}"
            )));
        }
        Ok(Self {
            decomposition: SigmaPositiveDecomposition::new(d, t)?,
            eps,
            g_offset: None,
        })
    }

    pub fn from_spec(spec: &KernelSpec, eps: f64) -> Result<Self> {
        let KernelFamily::ExactLog { d, t } = spec.family else {
            return Err(KernelError::InvalidParameter(
                "cutoff construction needs an exact-log kernel".into(),
            ));
        };
        let mut cutoff = Self::new(d, t, eps)?;
        cutoff.g_offset = spec.g_offset.clone();
        Ok(cutoff)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn decomposition(&self) -> &SigmaPositiveDecomposition {
        &self.decomposition
    }
}

impl CovarianceKernel for ExactLogCutoff {
    fn dim(&self) -> usize {
        self.decomposition.dim()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let r = check_pair(self.dim(), x, y)?;
        let offset = self.g_offset.as_ref().map_or(0.0, |g| g(x, y));
        Ok(self.decomposition.cutoff_value(self.eps, r) + offset)
    }

    fn variance(&self, x: &[f64]) -> Result<f64> {
        let offset = self.g_offset.as_ref().map_or(0.0, |g| g(x, x));
        Ok(self.decomposition.cutoff_variance(self.eps) + offset)
    }

    fn description(&self) -> String {
        format!(
            "exact-log cutoff (d = {}, T = {}, eps = {:.6e})",
            self.decomposition.dim(),
            self.decomposition.top_scale(),
            self.eps
        )
    }
}
