use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::ensemble::ReplicateRecord;
use crate::heavy_tail::Decomposition;
use crate::spectral::{covariance_spectrum, minor_spectra, stieltjes, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub lambda_minus: f64,
    /// Range of `Im m / sqrt(|E - l| + eta)` for `E >= l`.
    pub right_min: f64,
    pub right_max: f64,
    /// Range of `Im m sqrt(|E - l| + eta) / eta` for `E <= l`.
    pub left_min: f64,
    pub left_max: f64,
    pub c_h: f64,
    pub points: usize,
    /// The requested `eta_star` exceeds the bulk width or the upper limit 10.
    pub out_of_domain: bool,
    pub verdict: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

pub const DEFAULT_C_H: f64 = 10.0;

fn bulk_width(spec: &Spectrum) -> f64 {
    let mut v = spec.values.clone();
    v.sort_by(f64::total_cmp);
    let k = ((v.len() - 1) as f64 * 0.9).round() as usize;
    v[k] - v[0]
}

/// Square-root behaviour of `Im m` around the smallest eigenvalue, on a log grid.
///
/// The grid stops at `eta = min(10, w)` with `w` the distance from the smallest
/// eigenvalue to the 0.9 quantile. Beyond the bulk width `Im m ~ 1/eta` and no
/// square-root law can hold with a fixed `c_h`; the quantile keeps a few
/// outlying eigenvalues from stretching the grid. An `eta_star` above that cap
/// is reported as out of domain.
pub fn regularity_check(spec: &Spectrum, eta_star: f64, window: f64) -> Result<RegularityReport> {
    regularity_check_with(spec, eta_star, window, DEFAULT_C_H)
}

pub fn regularity_check_with(spec: &Spectrum, eta_star: f64, window: f64, c_h: f64) -> Result<RegularityReport> {
    const N_E: usize = 12;
    const N_ETA: usize = 12;
    let l = spec.smallest();
    let cap = 10f64.min(bulk_width(spec));
    let eta_top = cap.max(eta_star);
    let mut offsets = vec![0.0];
    offsets.extend(log_grid(1e-3 * window, window, N_E));
    let (mut rmin, mut rmax, mut lmin, mut lmax) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    let mut points = 0;
    for &d in &offsets {
        for eta in log_grid(eta_star + (eta_star * d).sqrt(), eta_top, N_ETA) {
            let im = stieltjes(spec, Complex64::new(l + d, eta), 0)?.im;
            let r = im / (d + eta).sqrt();
            rmin = rmin.min(r);
            rmax = rmax.max(r);
            points += 1;
        }
        for eta in log_grid(eta_star, eta_top, N_ETA) {
            let im = stieltjes(spec, Complex64::new(l - d, eta), 0)?.im;
            let r = im * (d + eta).sqrt() / eta;
            lmin = lmin.min(r);
            lmax = lmax.max(r);
            points += 1;
        }
    }
    let out_of_domain = eta_star > cap;
    let inside = |lo: f64, hi: f64| lo >= 1.0 / c_h && hi <= c_h;
    Ok(RegularityReport {
        lambda_minus: l,
        right_min: rmin,
        right_max: rmax,
        left_min: lmin,
        left_max: lmax,
        c_h,
        points,
        out_of_domain,
        verdict: !out_of_domain && inside(rmin, rmax) && inside(lmin, lmax),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub fraction: f64,
    /// Largest observed `N^{2/3} |lambda_M - lambda_{-,t}|`.
    pub max_scaled: f64,
    pub count: usize,
    pub threshold: f64,
}

pub fn rigidity_check(records: &[ReplicateRecord], n: usize) -> RigidityReport {
    rigidity_check_with(records, n, 0.1)
}

/// Fraction of successful replicates with `|lambda_M - lambda_{-,t}| <= N^{-2/3 + eps}`.
pub fn rigidity_check_with(records: &[ReplicateRecord], n: usize, eps: f64) -> RigidityReport {
    let n = n as f64;
    let threshold = n.powf(-2.0 / 3.0 + eps);
    let gaps: Vec<f64> = records
        .iter()
        .filter(|r| r.failure.is_none())
        .map(|r| (r.lambda_m_y - r.lambda_minus_t).abs())
        .collect();
    let hits = gaps.iter().filter(|&&g| g <= threshold).count();
    RigidityReport {
        fraction: hits as f64 / gaps.len().max(1) as f64,
        max_scaled: gaps.iter().fold(0.0f64, |m, &g| m.max(g * n.powf(2.0 / 3.0))),
        count: gaps.len(),
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlacingBounds {
    /// Smallest eigenvalue with the heavy columns removed.
    pub lower: f64,
    pub middle: f64,
    /// Smallest eigenvalue with the heavy rows removed.
    pub upper: f64,
    pub holds: bool,
}

const INTERLACING_SLACK: f64 = 1e-9;

/// Interlacing bounds given the already computed `lambda_M(S(X))`.
pub fn interlacing_bounds(decomp: &Decomposition, lambda_m_x: f64) -> Result<InterlacingBounds> {
    let minors = minor_spectra(decomp)?;
    let lower = minors.col_removed.smallest();
    let upper = minors.row_removed.smallest();
    Ok(InterlacingBounds {
        lower,
        middle: lambda_m_x,
        upper,
        holds: lower <= lambda_m_x + INTERLACING_SLACK && lambda_m_x <= upper + INTERLACING_SLACK,
    })
}

/// `lambda_M(S(B^[D_c])) <= lambda_M(S(X)) <= lambda_{M-|D_r|}(S(B^(D_r)))`.
///
/// A degenerate decomposition (every row or every column heavy) is an error,
/// which callers treat as a skip.
pub fn interlacing_check(decomp: &Decomposition) -> Result<bool> {
    let lm = covariance_spectrum(&decomp.x())?.smallest();
    Ok(interlacing_bounds(decomp, lm)?.holds)
}
