//! Special functions needed by the field constructions and the test
//! statistics: the Bessel function `J0` (circle averages of plane waves) and
//! the Kolmogorov distribution (two-sample distribution comparisons).

/// Bessel function of the first kind, order zero.
///
/// Power series below `|x| <= 8` (full double accuracy there), rational
/// asymptotic expansion beyond (absolute error below 1e-8, which is far
/// inside the Monte Carlo tolerances it feeds).
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..64 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        sum
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785_398_164;
        let p = 1.0
            + y * (-0.109_862_862_7e-2
                + y * (0.273_451_040_7e-4
                    + y * (-0.207_337_063_9e-5 + y * 0.209_388_721_1e-6)));
        let q = -0.156_249_999_5e-1
            + y * (0.143_048_876_5e-3
                + y * (-0.691_114_765_1e-5
                    + y * (0.762_109_516_1e-6 + y * (-0.934_935_152e-7))));
        (0.636_619_772 / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q)
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
///
/// The dual theta series is used for small arguments where the primary series
/// converges slowly.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // cdf = sqrt(2 pi) / lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let mut cdf = 0.0;
        for k in 1..32 {
            let m = (2 * k - 1) as f64;
            let t = (-m * m * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
            cdf += t;
            if t < 1e-20 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..128 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn j0_reference_values() {
        assert_abs_diff_eq!(bessel_j0(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-14);
        assert_abs_diff_eq!(bessel_j0(2.404_825_557_695_773), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(bessel_j0(5.0), -0.177_596_771_314_338_3, epsilon = 1e-13);
        // Asymptotic branch.
        assert_abs_diff_eq!(bessel_j0(10.0), -0.245_935_764_451_348_3, epsilon = 1e-8);
        assert_abs_diff_eq!(bessel_j0(25.0), 0.096_266_783_275_958_8, epsilon = 1e-8);
    }

    #[test]
    fn j0_matches_circle_average_quadrature() {
        // J0(r) = (1/2pi) int_0^{2pi} cos(r cos(t)) dt.
        for r in [0.5, 3.0, 7.5, 14.0] {
            let n = 4096;
            let mut acc = 0.0;
            for i in 0..n {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                acc += (r * t.cos()).cos();
            }
            acc /= n as f64;
            assert_abs_diff_eq!(bessel_j0(r), acc, epsilon = 1e-8);
        }
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // Q(1.0) and Q(0.5) from the defining series, Q small/large limits.
        assert_abs_diff_eq!(kolmogorov_sf(1.0), 0.270_000, epsilon = 1e-6);
        assert_abs_diff_eq!(kolmogorov_sf(0.5), 0.963_945, epsilon = 1e-6);
        assert!(kolmogorov_sf(0.05) > 1.0 - 1e-12);
        assert!(kolmogorov_sf(3.0) < 1e-7);
    }

    #[test]
    fn kolmogorov_sf_branches_agree_near_crossover() {
        // Evaluate both series forms at the switch point.
        let lambda: f64 = 0.3;
        let primary: f64 = {
            let mut sum = 0.0;
            let mut sign = 1.0;
            for k in 1..256 {
                let kf = k as f64;
                sum += sign * (-2.0 * kf * kf * lambda * lambda).exp();
                sign = -sign;
            }
            2.0 * sum
        };
        assert_abs_diff_eq!(kolmogorov_sf(0.299_999_9), primary, epsilon = 1e-9);
        assert_abs_diff_eq!(kolmogorov_sf(0.300_000_1), primary, epsilon = 1e-9);
    }
}
