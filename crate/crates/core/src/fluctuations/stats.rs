//! Sample statistics: covariance, moments, quantiles and the one-sample
//! Kolmogorov–Smirnov test against a centred normal law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Linear-interpolation quantile of already sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

/// Unbiased sample covariance matrix of equally long series.
pub fn empirical_covariance(series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = series.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    if let Some(bad) = series.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let means: Vec<f64> = series.iter().map(|s| mean(s)).collect();
    let m = series.len();
    let mut cov = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let c = series[i]
                .iter()
                .zip(&series[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / (n as f64 - 1.0);
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    pub sigma2: f64,
    pub ks_stat: f64,
    pub ks_p: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic and asymptotic p-value against `N(0, sigma2)`, with sample
/// skewness and excess kurtosis (moment estimators).
pub fn normality_tests(x: &[f64], sigma2: f64) -> Result<NormalityReport> {
    let n = x.len();
    if n < 100 {
        return Err(Error::InvalidParameter(format!(
            "normality tests need at least 100 samples, got {n}"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "predicted variance {sigma2} must be positive"
        )));
    }
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("sample has zero variance".into()));
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n as f64;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n as f64;
    let law =
        Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let s = sorted(x);
    let nf = n as f64;
    let ks_stat = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = law.cdf(v);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    let ks_p = kolmogorov_survival((root + 0.12 + 0.11 / root) * ks_stat);
    Ok(NormalityReport {
        n,
        sigma2,
        ks_stat,
        ks_p,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn covariance_examples() {
        let a = vec![1.0, 2.0, 4.0, 7.0];
        let cov = empirical_covariance(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(cov[0][0], cov[1][1]);
        assert_relative_eq!(cov[0][1] / cov[0][0], 1.0);
        assert_relative_eq!(cov[0][0], variance(&a));
        let flat = empirical_covariance(&[vec![3.0; 5], vec![3.0; 5]]).unwrap();
        assert!(flat.iter().flatten().all(|&v| v == 0.0));
        assert!(empirical_covariance(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(empirical_covariance(&[vec![1.0]]).is_err());
    }

    #[test]
    fn independent_coins_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let coin = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a: Vec<f64> = (0..n).map(|_| coin(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| coin(&mut rng)).collect();
        let cov = empirical_covariance(&[a, b]).unwrap();
        assert!(cov[0][1].abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // classical critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert_relative_eq!(kolmogorov_survival(1.3581), 0.05, epsilon = 1e-4);
        assert_relative_eq!(kolmogorov_survival(1.6276), 0.01, epsilon = 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_is_calibrated_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut passes = 0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
            if normality_tests(&x, 1.0).unwrap().ks_p > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 98, "{passes}/100");
    }

    #[test]
    fn ks_detects_uniform_alternative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = normality_tests(&x, 1.0 / 3.0).unwrap();
        assert!(r.ks_p < 0.01);
        // uniform: zero skew, excess kurtosis −1.2
        assert!(r.skewness.abs() < 0.05);
        assert_relative_eq!(r.excess_kurtosis, -1.2, epsilon = 0.05);
    }

    #[test]
    fn normality_input_checks() {
        assert!(matches!(
            normality_tests(&vec![1.0; 200], 1.0),
            Err(Error::Degenerate(_))
        ));
        assert!(normality_tests(&vec![1.0; 50], 1.0).is_err());
        let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert!(normality_tests(&x, 0.0).is_err());
    }

    #[test]
    fn quantiles_and_fit() {
        let s = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
        let (slope, icept) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert_relative_eq!(slope, 2.0);
        assert_relative_eq!(icept, 1.0);
    }
}
