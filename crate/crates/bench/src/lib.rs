//! Fixtures shared by the benchmarks.

use rmtedge_core::heavy_tail::{build_theta, sample_matrix};
use rmtedge_core::mp::{mp_quantiles, MPParams};
use rmtedge_core::spectral::{covariance_spectrum, Spectrum};
use rmtedge_core::Result;

/// The `(1 - t)`-scaled Marchenko-Pastur quantile spectrum.
pub fn quantile_spectrum(m: usize, c: f64, t: f64) -> Result<Spectrum> {
    let q = mp_quantiles(MPParams::new(c)?, m)?;
    Spectrum::new(
        q.into_iter().map(|x| (1.0 - t) * x).collect(),
        m,
        (m as f64 / c).round() as usize,
    )
}

/// Spectrum of one heavy-tailed sample with `c = 1/4`.
pub fn heavy_spectrum(alpha: f64, n: usize, seed: u64) -> Result<Spectrum> {
    let theta = build_theta(alpha, 1.0)?;
    covariance_spectrum(&sample_matrix(&theta, n / 4, n, seed)?)
}
