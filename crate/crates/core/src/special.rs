//! Special functions and branch-aware complex helpers.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gamma function on the real line (poles at non-positive integers return NaN/inf).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Principal branch `w^p`, restricted to `Re w > 0` (or `w = 0` for `p > 0`).
///
/// Every power in the asymptotic constants is taken at an argument with
/// positive real part; anything else is reported instead of silently picking
/// a branch.
pub fn cpow_right_half(w: Complex64, p: f64) -> Result<Complex64> {
    if w == Complex64::new(0.0, 0.0) {
        if p > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::Domain(format!("0^{p} is singular")));
    }
    if w.re <= 0.0 {
        return Err(Error::Domain(format!("power base {w} has non-positive real part")));
    }
    Ok(w.powf(p))
}

/// Real cube root that keeps the sign.
pub fn real_cbrt(x: f64) -> f64 {
    x.cbrt()
}

/// `sqrt(z - a) * sqrt(z - b)` with both factors on the principal branch.
///
/// For `a < b` this product is analytic off the segment `[a, b]` and behaves
/// like `z - (a + b)/2` at infinity, which is what the Marchenko-Pastur
/// transform needs on both sides of the support.
pub fn sqrt_pair(z: Complex64, a: f64, b: f64) -> Complex64 {
    (z - a).sqrt() * (z - b).sqrt()
}
