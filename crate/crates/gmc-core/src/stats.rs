//! Estimators shared by the analysis operations: moments with Monte Carlo
//! error bars, bootstrap resampling, rank statistics, the two-sample
//! Kolmogorov-Smirnov test, the Hill tail-index estimator and least-squares
//! fits on log-log axes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::special::kolmogorov_sf;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("tail fit needs {needed} strictly positive top-order statistics, found {got}")]
    InsufficientTail { needed: usize, got: usize },
    #[error("regression needs at least {needed} distinct abscissae, got {got}")]
    DegenerateDesign { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, StatsError>;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len().max(1) as f64).sqrt()
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn weighted_mean(xs: &[f64], ws: &[f64]) -> f64 {
    assert_eq!(xs.len(), ws.len());
    let total: f64 = ws.iter().sum();
    xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / total
}

/// Bootstrap standard error of an arbitrary statistic.
pub fn bootstrap_stderr(
    xs: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    n_boot: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut values = Vec::with_capacity(n_boot);
    let mut resample = vec![0.0; xs.len()];
    for _ in 0..n_boot {
        for slot in resample.iter_mut() {
            *slot = xs[rng.random_range(0..xs.len())];
        }
        values.push(stat(&resample));
    }
    variance(&values).sqrt()
}

/// Bootstrap percentile confidence interval of a statistic.
pub fn bootstrap_ci(
    xs: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    n_boot: usize,
    level: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut values = Vec::with_capacity(n_boot);
    let mut resample = vec![0.0; xs.len()];
    for _ in 0..n_boot {
        for slot in resample.iter_mut() {
            *slot = xs[rng.random_range(0..xs.len())];
        }
        values.push(stat(&resample));
    }
    let alpha = 0.5 * (1.0 - level);
    (quantile(&values, alpha), quantile(&values, 1.0 - alpha))
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.len() < 8 || b.len() < 8 {
        return Err(StatsError::TooFewSamples {
            needed: 8,
            got: a.len().min(b.len()),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while ia < sa.len() && ib < sb.len() {
        let xa = sa[ia];
        let xb = sb[ib];
        let x = xa.min(xb);
        while ia < sa.len() && sa[ia] <= x {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= x {
            ib += 1;
        }
        d = d.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsTest {
        statistic: d,
        p_value,
        n_a: sa.len(),
        n_b: sb.len(),
    })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if samples.len() < 8 {
        return Err(StatsError::TooFewSamples {
            needed: 8,
            got: samples.len(),
        });
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).max((i + 1) as f64 / n - f));
    }
    let ne = n.sqrt();
    let p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsTest {
        statistic: d,
        p_value,
        n_a: s.len(),
        n_b: 0,
    })
}

/// Hill estimate of the tail index from the top order statistics.
#[derive(Debug, Clone, Copy)]
pub struct HillFit {
    pub alpha: f64,
    pub k_used: usize,
}

pub fn hill_estimator(xs: &[f64], top_fraction: f64) -> Result<HillFit> {
    assert!(
        top_fraction > 0.0 && top_fraction < 1.0,
        "top fraction must lie in (0, 1)"
    );
    let mut sorted = xs.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let k = ((xs.len() as f64 * top_fraction).floor() as usize).min(xs.len().saturating_sub(1));
    let needed = 50;
    if k < needed || sorted[k] <= 0.0 {
        let got = sorted.iter().take(k + 1).filter(|x| **x > 0.0).count();
        return Err(StatsError::InsufficientTail { needed, got });
    }
    let threshold = sorted[k];
    let log_sum: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    Ok(HillFit {
        alpha: k as f64 / log_sum,
        k_used: k,
    })
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<OlsFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: n });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(StatsError::DegenerateDesign { needed: 2, got: 1 });
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - slope * x - intercept;
            e * e
        })
        .sum();
    let tss: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sigma2 = rss / (n - 2) as f64;
    Ok(OlsFit {
        slope,
        intercept,
        slope_stderr: (sigma2 / sxx).sqrt(),
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments_and_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_abs_diff_eq!(mean(&xs), 3.0);
        assert_abs_diff_eq!(variance(&xs), 2.5);
        assert_abs_diff_eq!(median(&xs), 3.0);
        assert_abs_diff_eq!(quantile(&xs, 0.25), 2.0);
        assert_abs_diff_eq!(weighted_mean(&[1.0, 3.0], &[3.0, 1.0]), 1.5);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let fit = ols(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn ols_stderr_brackets_noise_scale() {
        let mut rng = replica_rng(42, 0);
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 20.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1.0 + 0.5 * x + 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit = ols(&xs, &ys).unwrap();
        assert!((fit.slope - 0.5).abs() < 4.0 * fit.slope_stderr);
        assert!(fit.slope_stderr < 0.01);
    }

    #[test]
    fn ks_accepts_same_distribution_and_rejects_shifted() {
        let mut rng = replica_rng(7, 0);
        let a: Vec<f64> = (0..2000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let b: Vec<f64> = (0..2000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let same = ks_two_sample(&a, &b).unwrap();
        assert!(same.p_value > 0.01, "p = {}", same.p_value);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        let diff = ks_two_sample(&a, &shifted).unwrap();
        assert!(diff.p_value < 1e-6, "p = {}", diff.p_value);
    }

    #[test]
    fn ks_one_sample_accepts_true_cdf_and_rejects_wrong_one() {
        let mut rng = replica_rng(9, 0);
        let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let same = ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(same.p_value > 0.01, "p = {}", same.p_value);
        let wrong = ks_one_sample(&u, |x| x.clamp(0.0, 1.0).powi(2)).unwrap();
        assert!(wrong.p_value < 1e-6, "p = {}", wrong.p_value);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = replica_rng(11, 0);
        let alpha = 2.0;
        let xs: Vec<f64> = (0..20000)
            .map(|_| {
                let u: f64 = rng.random();
                u.powf(-1.0 / alpha)
            })
            .collect();
        let fit = hill_estimator(&xs, 0.05).unwrap();
        assert_eq!(fit.k_used, 1000);
        assert!((fit.alpha - alpha).abs() < 0.2, "alpha = {}", fit.alpha);
    }

    #[test]
    fn hill_rejects_light_tail_budget() {
        let xs = vec![1.0; 100];
        assert!(matches!(
            hill_estimator(&xs, 0.05),
            Err(StatsError::InsufficientTail { .. })
        ));
    }

    #[test]
    fn bootstrap_stderr_matches_analytic_for_mean() {
        let mut rng = replica_rng(3, 0);
        let xs: Vec<f64> = (0..400)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let mut boot_rng = replica_rng(3, 1);
        let se = bootstrap_stderr(&xs, mean, 400, &mut boot_rng);
        let analytic = stderr_of_mean(&xs);
        assert!((se / analytic - 1.0).abs() < 0.3, "{se} vs {analytic}");
    }
}
