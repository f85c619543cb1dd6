//! Goodness of fit utilities: one-sample Kolmogorov-Smirnov, Q-Q points and
//! sample moments.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quad::compensated_sum;

pub const KS_MIN_SAMPLES: usize = 8;
const KOLMOGOROV_TERMS: usize = 100;

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let p = if x < 1.0 {
        // Theta-function form, fast for small arguments.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut s = 0.0;
        for k in 1..=KOLMOGOROV_TERMS {
            let m = (2 * k - 1) as f64;
            let t = (-m * m * c).exp();
            s += t;
            if t < 1e-300 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s
    } else {
        let mut s = 0.0;
        for k in 1..=KOLMOGOROV_TERMS {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { t } else { -t };
            if t < 1e-300 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a continuous `cdf`, asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { got: samples.len(), need: KS_MIN_SAMPLES });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult { statistic, p_value: kolmogorov_sf(n.sqrt() * statistic) })
}

/// Order statistics against `quantile((i - 1/2) / M)`.
pub fn qq_points(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.into_iter()
        .enumerate()
        .map(|(i, x)| (quantile((i as f64 + 0.5) / m), x))
        .collect()
}

fn standard() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// CDF of `N(0, variance)`.
pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    standard().cdf(x / variance.sqrt())
}

/// Quantile of `N(0, variance)`.
pub fn normal_quantile(p: f64, variance: f64) -> f64 {
    variance.sqrt() * standard().inverse_cdf(p)
}

/// Sample moments with standard errors. The variance error assumes normality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { got: xs.len(), need: 2 });
    }
    let m = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / m;
    let variance = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (m - 1.0);
    Ok(Summary {
        count: xs.len(),
        mean,
        mean_stderr: (variance / m).sqrt(),
        variance,
        variance_stderr: variance * (2.0 / (m - 1.0)).sqrt(),
    })
}

/// Whether `variance` is within `k` standard errors of `reference`, with the
/// error taken from the chi-square law of the estimator at the reference.
pub fn variance_agrees(variance: f64, reference: f64, count: usize, k: f64) -> bool {
    let sigma = reference * (2.0 / (count as f64 - 1.0)).sqrt();
    (variance - reference).abs() <= k * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn kolmogorov_branches_agree() {
        // Both series are valid near 1; compare them there.
        let x: f64 = 1.0;
        let small = {
            let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * (1..50).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>()
        };
        assert!((kolmogorov_sf(x) - small).abs() < 1e-14);
        // reference values of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
        assert!(kolmogorov_sf(0.2) > 0.9999);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn uniform_draws_pass() {
        let mut rng = stream(2024, Purpose::Fixtures, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
    }

    #[test]
    fn plotting_positions_give_half_step() {
        let m = 40;
        let xs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let r = ks_test(&xs, |x| x).unwrap();
        assert!((r.statistic - 0.5 / m as f64).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            ks_test(&[0.1, 0.2, 0.3, 0.4], |x| x),
            Err(Error::TooFewSamples { got: 4, need: KS_MIN_SAMPLES })
        );
    }

    #[test]
    fn qq_identity_and_median() {
        assert_eq!(qq_points(&[0.0], |p| normal_quantile(p, 1.0)), vec![(0.0, 0.0)]);
        let m = 200;
        let xs: Vec<f64> = (0..m).map(|i| normal_quantile((i as f64 + 0.5) / m as f64, 2.0)).rev().collect();
        for (a, b) in qq_points(&xs, |p| normal_quantile(p, 2.0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_tails_show_in_qq() {
        // normal scores stretched more and more towards both ends
        let m = 500;
        let xs: Vec<f64> = (0..m)
            .map(|i| {
                let p = (i as f64 + 0.5) / m as f64;
                let z = normal_quantile(p, 1.0);
                z / (0.05 + 0.95 * (1.0 - (2.0 * p - 1.0).abs()))
            })
            .collect();
        let pts = qq_points(&xs, |p| normal_quantile(p, 1.0));
        let dev: Vec<f64> = pts.iter().map(|(a, b)| (a - b).abs()).collect();
        let iqr = dev[m / 4..3 * m / 4].iter().copied().fold(0.0, f64::max);
        let tail = dev[..m / 20].iter().chain(&dev[m - m / 20..]).copied().fold(0.0, f64::max);
        assert!(tail > 3.0 * iqr, "{tail} vs {iqr}");
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_cdf(0.0, 4.0) - 0.5).abs() < 1e-15);
        // the library quantile is good to about 1e-11
        assert!((normal_cdf(normal_quantile(0.975, 4.0), 4.0) - 0.975).abs() < 1e-10);
        assert!((normal_quantile(0.975, 4.0) - 2.0 * 1.959963984540054).abs() < 1e-9);
    }
}
