//! Marchenko-Pastur law: edges, density, Stieltjes transform and quantiles.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::special::sqrt_pair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPParams {
    pub c: f64,
}

impl MPParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Parameter(format!("aspect ratio c = {c} must be positive")));
        }
        if (c - 1.0).abs() < 1e-12 {
            return Err(Error::Regime(
                "aspect ratio c = 1 is the hard-edge case and is excluded".into(),
            ));
        }
        Ok(MPParams { c })
    }
}

pub fn mp_edges(p: MPParams) -> (f64, f64) {
    let r = p.c.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Continuous part of the density.
pub fn mp_density(p: MPParams, x: f64) -> f64 {
    let (lo, hi) = mp_edges(p);
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * p.c * x)
}

/// Mass of the atom at zero, `(1 - 1/c)_+`.
pub fn atom_mass(p: MPParams) -> f64 {
    (1.0 - 1.0 / p.c).max(0.0)
}

/// Solves `z c m^2 + (z - (1 - c)) m + 1 = 0` on the branch that is the
/// Stieltjes transform of the law.
///
/// The root is written with `sqrt(z - l-) sqrt(z - l+)` on principal branches,
/// which is analytic off the support, so real `z` outside the support needs
/// no regularization. Of the two algebraically equal forms of the root the
/// one without cancellation is used.
pub fn mp_stieltjes(p: MPParams, z: Complex64) -> Result<Complex64> {
    let (lo, hi) = mp_edges(p);
    if z.norm() == 0.0 {
        return Err(Error::Pole {
            z: format!("{z}"),
            eigenvalue: 0.0,
        });
    }
    if z.im == 0.0 && z.re > lo && z.re < hi {
        return Err(Error::Domain(format!(
            "real z = {} lies inside the support ({lo}, {hi})",
            z.re
        )));
    }
    let c = p.c;
    let r = sqrt_pair(z, lo, hi);
    let b = z - (1.0 - c);
    let plus = -b + r;
    let minus = -b - r;
    Ok(if plus.norm() >= minus.norm() {
        plus / (2.0 * c * z)
    } else {
        2.0 / minus
    })
}

/// Value and first `k` derivatives of the transform at `z`.
pub fn mp_stieltjes_derivs(p: MPParams, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
    if k > 3 {
        return Err(Error::Parameter(format!("derivative order {k} > 3")));
    }
    let (lo, hi) = mp_edges(p);
    let c = p.c;
    let m = mp_stieltjes(p, z)?;
    let mut out = vec![m];
    if k == 0 {
        return Ok(out);
    }
    // 2cz m = 1 - c - z + R with R^2 = (z - l-)(z - l+), so
    // R' = (z - 1 - c)/R, R R'' = 1 - R'^2, R R''' = -3 R' R''
    let r = sqrt_pair(z, lo, hi);
    let r1 = (z - 1.0 - c) / r;
    let r2 = (1.0 - r1 * r1) / r;
    let r3 = -3.0 * r1 * r2 / r;
    let n_derivs = [r1 - 1.0, r2, r3];
    for j in 1..=k {
        let prev = out[j - 1];
        out.push((n_derivs[j - 1] / (2.0 * c) - j as f64 * prev) / z);
    }
    Ok(out)
}

/// `d^k/dz^k [ m(z/(1-t)) / (1-t) ]`.
pub fn mp_stieltjes_scaled(p: MPParams, t: f64, z: Complex64, k: usize) -> Result<Complex64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Parameter(format!("t = {t} outside [0, 1)")));
    }
    let s = 1.0 - t;
    let d = mp_stieltjes_derivs(p, z / s, k)?;
    Ok(d[k] / s.powi(k as i32 + 1))
}

/// Cumulative distribution of the continuous part on `[l-, x]`.
///
/// With `x = l- + (l+ - l-)(1 - cos u)/2` the square-root edges disappear and
/// the integrand is smooth in `u`.
pub fn mp_cdf(p: MPParams, x: f64) -> Result<f64> {
    let (lo, hi) = mp_edges(p);
    if x <= lo {
        return Ok(0.0);
    }
    if x >= hi {
        return Ok(1.0 - atom_mass(p));
    }
    let u = angle_of(lo, hi, x);
    integrate(|v| cdf_integrand(p, lo, hi, v), 0.0, u, 1e-15, 1e-13)
}

fn angle_of(lo: f64, hi: f64, x: f64) -> f64 {
    (1.0 - 2.0 * (x - lo) / (hi - lo)).clamp(-1.0, 1.0).acos()
}

fn cdf_integrand(p: MPParams, lo: f64, hi: f64, u: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let x = lo + half * (1.0 - u.cos());
    let s = u.sin();
    half * half * s * s / (2.0 * PI * p.c * x)
}

/// `M` quantiles `F^{-1}((i - 1/2)/M)` of the law, including the atom when `c > 1`.
pub fn mp_quantiles(p: MPParams, m: usize) -> Result<Vec<f64>> {
    let (lo, hi) = mp_edges(p);
    let atom = atom_mass(p);
    let mut out = Vec::with_capacity(m);
    let mut u_prev = 0.0;
    let mut f_prev = 0.0;
    for i in 0..m {
        let q = (i as f64 + 0.5) / m as f64;
        if q <= atom {
            out.push(0.0);
            continue;
        }
        let target = q - atom;
        // Newton in the angle variable, safeguarded by a bracket
        let (mut a, mut b) = (u_prev, PI);
        let mut u = 0.5 * (a + b);
        for _ in 0..100 {
            let f = f_prev + integrate(|v| cdf_integrand(p, lo, hi, v), u_prev, u, 1e-16, 1e-14)? - target;
            if f > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let df = cdf_integrand(p, lo, hi, u);
            let mut next = u - f / df;
            if !(next > a && next < b) || !next.is_finite() {
                next = 0.5 * (a + b);
            }
            if (next - u).abs() < 1e-15 || b - a < 1e-15 {
                u = next;
                break;
            }
            u = next;
        }
        f_prev += integrate(|v| cdf_integrand(p, lo, hi, v), u_prev, u, 1e-16, 1e-14)?;
        u_prev = u;
        let half = 0.5 * (hi - lo);
        out.push(lo + half * (1.0 - u.cos()));
    }
    Ok(out)
}
