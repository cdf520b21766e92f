//! Dense covariance matrix assembly from pointwise kernels.
//!
//! Off-diagonal entries come from [`CovarianceKernel::eval`], the diagonal
//! from [`CovarianceKernel::variance`], and factorization goes through the
//! jitter ladder in [`crate::linalg`]: exact-arithmetic positive
//! semidefiniteness can be lost to roundoff at the 1e-15 scale, so a failed
//! clean factorization retries with diagonal boosts of 1e-12, 1e-10 and 1e-8
//! times the mean variance before giving up with an eigenvalue diagnostic.

use super::{CovarianceKernel, KernelError, Result};
use crate::linalg::{cholesky_with_jitter, CholeskyFactor};

/// Symmetric covariance matrix over an explicit point set.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub n: usize,
    /// Row-major full symmetric storage.
    pub data: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub kernel_description: String,
}

impl CovarianceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Cholesky factor through the jitter ladder.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        Ok(cholesky_with_jitter(&self.data, self.n)?)
    }
}

/// Evaluates the kernel on all point pairs.
pub fn assemble_covariance_matrix(
    kernel: &dyn CovarianceKernel,
    points: &[Vec<f64>],
) -> Result<CovarianceMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(KernelError::InvalidParameter(
            "covariance assembly needs at least one point".into(),
        ));
    }
    let d = kernel.dim();
    for p in points {
        if p.len() != d {
            return Err(KernelError::Domain(format!(
                "point {p:?} does not match kernel dimension {d}"
            )));
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = kernel.variance(&points[i])?;
        for j in 0..i {
            let v = kernel.eval(&points[i], &points[j])?;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(CovarianceMatrix {
        n,
        data,
        points: points.to_vec(),
        kernel_description: kernel.description(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::exact_log::ExactLogCutoff;
    use crate::kernels::spherical::SphericalCutoff;
    use crate::kernels::star::{StarCutoff, StarSeed};
    use approx::assert_abs_diff_eq;

    fn line_points(n: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![a + (b - a) * (i as f64 + 0.5) / n as f64])
            .collect()
    }

    #[test]
    fn exact_log_cutoff_matrix_is_positive_definite() {
        let kernel = ExactLogCutoff::new(1, 1.0, 1.0 / 32.0).unwrap();
        let points = line_points(64, 0.0, 1.0);
        let cov = assemble_covariance_matrix(&kernel, &points).unwrap();
        assert_abs_diff_eq!(cov.get(0, 0), 32.0_f64.ln() + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.get(3, 7), cov.get(7, 3), epsilon = 0.0);
        let factor = cov.cholesky().unwrap();
        assert_eq!(factor.jitter, 0.0);
    }

    #[test]
    fn star_and_spherical_matrices_factor_within_the_ladder() {
        let star = StarCutoff::new(StarSeed::Triangle { t: 1.0 }, 1.0 / 16.0).unwrap();
        let cov = assemble_covariance_matrix(&star, &line_points(48, 0.0, 0.5)).unwrap();
        let factor = cov.cholesky().unwrap();
        assert!(factor.jitter <= 1e-8 * cov.get(0, 0));

        let spherical = SphericalCutoff::new(1.0, 1.0 / 16.0, 600).unwrap();
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 / 30.0;
                vec![0.1 + 0.3 * t, 0.2 * (3.0 * t).sin(), 0.1 + 0.2 * t * t]
            })
            .collect();
        let cov = assemble_covariance_matrix(&spherical, &pts).unwrap();
        cov.cholesky().unwrap();
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let kernel = ExactLogCutoff::new(2, 1.0, 1.0 / 8.0).unwrap();
        let err = assemble_covariance_matrix(&kernel, &[vec![0.0]]).unwrap_err();
        assert!(matches!(err, KernelError::Domain(_)));
    }
}
