//! One-sample Kolmogorov–Smirnov test against a normal law.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

pub const KS_SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub samples: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value ≥ 0.01`.
    pub passed: bool,
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Tests `xs` against `N(mean, sd²)`; `mean = None` centres on the sample mean.
pub fn ks_normal(xs: &[f64], mean: Option<f64>, sd: f64) -> KsTest {
    let n = xs.len();
    if n == 0 || !(sd > 0.0) {
        return KsTest {
            samples: n,
            statistic: f64::NAN,
            p_value: f64::NAN,
            passed: false,
        };
    }
    let mu = mean.unwrap_or_else(|| xs.iter().sum::<f64>() / n as f64);
    let law = Normal::new(mu, sd).expect("positive standard deviation");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = law.cdf(*x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    let p = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
    KsTest {
        samples: n,
        statistic: d,
        p_value: p,
        passed: p >= KS_SIGNIFICANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_quantiles(n: usize) -> Vec<f64> {
        let law = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| law.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect()
    }

    #[test]
    fn tail_values() {
        // P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098.
        assert!((kolmogorov_tail(1.36) - 0.049).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_tail(0.1), 1.0);
    }

    #[test]
    fn exact_quantiles_pass_and_shifted_ones_fail() {
        let xs = normal_quantiles(1000);
        let t = ks_normal(&xs, Some(0.0), 1.0);
        assert!(t.statistic <= 0.5 / 1000.0 + 1e-6, "{}", t.statistic);
        assert!(t.passed);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.2).collect();
        assert!(!ks_normal(&shifted, Some(0.0), 1.0).passed);
        assert!(ks_normal(&shifted, None, 1.0).passed);
        assert!(!ks_normal(&xs, Some(0.0), 2.0).passed);
    }
}
