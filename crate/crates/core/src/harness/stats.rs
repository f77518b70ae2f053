use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ks_distance: f64,
    pub sample_sizes: (usize, usize),
    /// Mean of the first sample minus mean of the second.
    pub mean_diff: f64,
    /// Standard deviation of the first sample over that of the second.
    pub std_ratio: f64,
    pub threshold: Option<f64>,
    pub verdict: Option<bool>,
}

impl ComparisonReport {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self.verdict = Some(self.ks_distance <= threshold);
        self
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let mu = mean(x);
    (x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Parameter("empty sample".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            count: x.iter().filter(|v| !v.is_finite()).count(),
        });
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Sup distance between the two empirical CDFs, by a merge scan over the sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<ComparisonReport> {
    Ok(ComparisonReport {
        ks_distance: ks_distance(a, b)?,
        sample_sizes: (a.len(), b.len()),
        mean_diff: mean(a) - mean(b),
        std_ratio: std_dev(a) / std_dev(b),
        threshold: None,
        verdict: None,
    })
}

/// One-sample KS distance against the standard normal.
pub fn ks_standard_normal(x: &[f64]) -> Result<f64> {
    let s = sorted(x)?;
    let normal = Normal::standard();
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (k, &v)| {
        let f = normal.cdf(v);
        d.max(f - k as f64 / n).max((k + 1) as f64 / n - f)
    }))
}

/// Normality of `x` after centering at its mean and dividing by `sigma`.
///
/// `mean_diff` is the empirical mean and `std_ratio` the empirical standard
/// deviation over `sigma`.
pub fn standardized_normal_report(x: &[f64], sigma: f64) -> Result<ComparisonReport> {
    let mu = mean(x);
    let z: Vec<f64> = x.iter().map(|v| (v - mu) / sigma).collect();
    Ok(ComparisonReport {
        ks_distance: ks_standard_normal(&z)?,
        sample_sizes: (x.len(), 0),
        mean_diff: mu,
        std_ratio: std_dev(x) / sigma,
        threshold: None,
        verdict: None,
    })
}
