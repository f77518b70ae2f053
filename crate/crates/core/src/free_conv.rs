//! Subordination for the Gaussian divisible model `X + sqrt(t) W`.
//!
//! For a spectrum of `S(X)` with aspect ratio `c`, the transform `m_t` of the
//! model solves
//!
//! ```text
//! m_t = (1/M) sum_i b / (lambda_i - zeta),   b = 1 + c t m_t,
//! zeta = b^2 z - t (1 - c) b.
//! ```
//!
//! On the real line below `lambda_M(S(X))` the inverse of `z -> zeta` is
//! `Phi_t(x) = u^2 x + (1 - c) t u` with `u = 1 - c t m_X(x)`; the left edge
//! of the model is the value of `Phi_t` at its critical point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{mp_edges, MPParams};
use crate::special::real_cbrt;
use crate::spectral::{stieltjes_derivs, stieltjes_real, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinationState {
    pub z: Complex64,
    pub m_t: Complex64,
    pub zeta_t: Complex64,
    pub b_t: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_fixed_point: usize,
    pub max_newton: usize,
    pub initial_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-11,
            max_fixed_point: 400,
            max_newton: 60,
            initial_damping: 0.5,
        }
    }
}

struct Fpe<'a> {
    spec: &'a Spectrum,
    c: f64,
    t: f64,
    z: Complex64,
}

impl Fpe<'_> {
    fn zeta(&self, m: Complex64) -> (Complex64, Complex64) {
        let b = 1.0 + self.c * self.t * m;
        (b, b * b * self.z - self.t * (1.0 - self.c) * b)
    }

    /// Right-hand side of the fixed-point equation and its derivative in `m`.
    fn rhs(&self, m: Complex64) -> (Complex64, Complex64) {
        let (b, zeta) = self.zeta(m);
        let dzeta = (2.0 * b * self.z - self.t * (1.0 - self.c)) * (self.c * self.t);
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        for &lam in &self.spec.values {
            let g = 1.0 / (lam - zeta);
            s0 += g;
            s1 += g * g;
        }
        let inv = 1.0 / self.spec.m as f64;
        let rhs = b * s0 * inv;
        let drhs = (self.c * self.t * s0 + b * dzeta * s1) * inv;
        (rhs, drhs)
    }

    fn residual(&self, m: Complex64) -> f64 {
        let r = (m - self.rhs(m).0).norm();
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    }

    fn state(&self, m: Complex64) -> SubordinationState {
        let (b, zeta) = self.zeta(m);
        SubordinationState {
            z: self.z,
            m_t: m,
            zeta_t: zeta,
            b_t: b,
            residual: self.residual(m),
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("t = {t} outside (0, 1)")))
    }
}

/// Damped fixed-point iteration followed by Newton polish, from `m0`.
fn solve_from(fpe: &Fpe, m0: Complex64, opts: &SolverOptions) -> Result<Complex64> {
    let mut m = m0;
    let mut res = fpe.residual(m);
    let mut theta = opts.initial_damping;
    let mut history = Vec::new();
    let mut iterations = 0;
    while res > 1e-6 && iterations < opts.max_fixed_point {
        iterations += 1;
        let next = (1.0 - theta) * m + theta * fpe.rhs(m).0;
        let next_res = fpe.residual(next);
        if next_res < res {
            m = next;
            res = next_res;
            theta = (theta * 1.25).min(1.0);
        } else {
            theta *= 0.5;
            history.push(theta);
            if theta < 1e-8 {
                break;
            }
        }
    }
    for _ in 0..opts.max_newton {
        if res <= opts.tol {
            break;
        }
        iterations += 1;
        let (rhs, drhs) = fpe.rhs(m);
        let step = (m - rhs) / (1.0 - drhs);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = m - lambda * step;
            let trial_res = fpe.residual(trial);
            if trial_res < res {
                m = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(lambda);
        if !accepted {
            break;
        }
    }
    if res <= opts.tol {
        Ok(m)
    } else {
        history.truncate(32);
        Err(Error::NoConvergence {
            iterations,
            residual: res,
            damping: history,
        })
    }
}

fn herglotz_ok(z: Complex64, m: Complex64) -> bool {
    m.im > 0.0 && (z * m).im > 0.0
}

/// Solve for `m_t(z)`. Real `z` is reached by continuation from `z + i eta`.
pub fn solve_subordination(spec: &Spectrum, t: f64, z: Complex64) -> Result<SubordinationState> {
    solve_subordination_with(spec, t, z, None, &SolverOptions::default())
}

pub fn solve_subordination_with(
    spec: &Spectrum,
    t: f64,
    z: Complex64,
    initial: Option<Complex64>,
    opts: &SolverOptions,
) -> Result<SubordinationState> {
    check_t(t)?;
    let c = spec.c_n();
    if z.im < 0.0 {
        let s = solve_subordination_with(spec, t, z.conj(), initial.map(|m| m.conj()), opts)?;
        return Ok(SubordinationState {
            z,
            m_t: s.m_t.conj(),
            zeta_t: s.zeta_t.conj(),
            b_t: s.b_t.conj(),
            residual: s.residual,
        });
    }
    if z.im == 0.0 {
        return solve_real(spec, t, z.re, opts);
    }
    let fpe = Fpe { spec, c, t, z };
    let mut starts = Vec::new();
    if let Some(m0) = initial {
        starts.push(m0);
    }
    starts.push(stieltjes_derivs(spec, z, 0)?[0]);
    starts.push(-1.0 / z);
    let mut last_err = None;
    for m0 in starts {
        match solve_from(&fpe, m0, opts) {
            Ok(m) if herglotz_ok(z, m) => return Ok(fpe.state(m)),
            Ok(m) => {
                last_err = Some(Error::Branch(format!(
                    "solution m = {m} at z = {z} violates Im m > 0 or Im(z m) > 0"
                )))
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one start was tried"))
}

/// Continuation in `eta` down to 1e-10, then Newton on the real axis itself.
fn solve_real(spec: &Spectrum, t: f64, x: f64, opts: &SolverOptions) -> Result<SubordinationState> {
    let c = spec.c_n();
    let mut eta = 0.5 * spec.largest().max(1.0);
    let mut m = None;
    while eta > 1e-10 {
        let s = solve_subordination_with(spec, t, Complex64::new(x, eta), m, opts)?;
        m = Some(s.m_t);
        eta *= 0.25;
    }
    let s = solve_subordination_with(spec, t, Complex64::new(x, 1e-10), m, opts)?;
    let fpe = Fpe {
        spec,
        c,
        t,
        z: Complex64::new(x, 0.0),
    };
    let m = solve_from(&fpe, s.m_t, opts)?;
    Ok(fpe.state(m))
}

/// `Phi_t` and its first two derivatives at real `zeta`.
pub fn phi_derivs(spec: &Spectrum, t: f64, zeta: f64) -> Result<[f64; 3]> {
    if let Some(&lam) = spec.values.iter().find(|&&l| (l - zeta).abs() < 1e-12) {
        return Err(Error::Pole {
            z: format!("{zeta}"),
            eigenvalue: lam,
        });
    }
    let c = spec.c_n();
    let m = stieltjes_real(spec, zeta, 2)?;
    let ct = c * t;
    let u = 1.0 - ct * m[0];
    let u1 = -ct * m[1];
    let u2 = -ct * m[2];
    let k = (1.0 - c) * t;
    let phi = u * u * zeta + k * u;
    let phi1 = 2.0 * u * u1 * zeta + u * u + k * u1;
    let phi2 = 2.0 * u1 * u1 * zeta + 2.0 * u * u2 * zeta + 4.0 * u * u1 + k * u2;
    Ok([phi, phi1, phi2])
}

pub fn phi_map(spec: &Spectrum, t: f64, zeta: f64, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::Parameter(format!("order {order} > 2")));
    }
    Ok(phi_derivs(spec, t, zeta)?[order])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSolution {
    pub zeta_minus: f64,
    pub lambda_minus_t: f64,
    pub phi_second: f64,
    pub gamma_n: f64,
    pub gap: f64,
    pub warnings: Vec<String>,
}

/// `gamma_N` from the edge data.
pub fn edge_scaling(lambda: f64, zeta: f64, c: f64, t: f64, phi_second: f64) -> f64 {
    let inner = 0.5 * (4.0 * lambda * zeta + (1.0 - c).powi(2) * t * t) * c * c * t * t * phi_second;
    -1.0 / real_cbrt(inner)
}

/// Root of `c t m_X(x) = 1` below the smallest eigenvalue.
fn unit_point(spec: &Spectrum, t: f64) -> Result<f64> {
    let ct = spec.c_n() * t;
    let lam = spec.smallest();
    let g = |x: f64| -> Result<(f64, f64)> {
        let m = stieltjes_real(spec, x, 1)?;
        Ok((ct * m[0] - 1.0, ct * m[1]))
    };
    let mut lo = lam - 2.0 * ct;
    let mut hi = lam - ct / (2.0 * spec.m as f64);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = g(x)?;
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - v / dv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 1e-15 * lam.abs().max(ct) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Locate the left edge `lambda_{-,t} = Phi_t(zeta_{1,-})`.
///
/// The critical point lies where `1 - c t m_X > 0`. Between that region's
/// right end and `lambda_M`, `Phi_t'` has a second, spurious sign change, so
/// the bracket is built leftward from the point where `c t m_X = 1`, at which
/// `Phi_t' = -(1-c) c t^2 m_X' < 0`.
pub fn find_left_edge(spec: &Spectrum, t: f64) -> Result<EdgeSolution> {
    check_t(t)?;
    let c = spec.c_n();
    if c >= 1.0 {
        return Err(Error::Regime(format!("left edge solver needs c < 1, got {c}")));
    }
    let d1 = |x: f64| -> Result<f64> { Ok(phi_derivs(spec, t, x)?[1]) };
    let mut hi = unit_point(spec, t)?;
    let f_hi = d1(hi)?;
    let mut trace = vec![(hi, f_hi)];
    if !(f_hi < 0.0) {
        return Err(Error::EdgeLocation {
            reason: "Phi' is not negative where c t m_X = 1".into(),
            trace,
        });
    }
    let step = (t * t * 1e-3).max(1e-15);
    let mut lo = hi;
    let mut found = false;
    for k in 0..60 {
        lo = hi - step * 2f64.powi(k);
        let f = d1(lo)?;
        trace.push((lo, f));
        if f > 0.0 {
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::EdgeLocation {
            reason: "no sign change of Phi' after 60 expansions".into(),
            trace,
        });
    }

    let mut warnings = Vec::new();
    let scan = 64;
    let mut changes = 0;
    let mut prev = d1(lo)?.signum();
    for i in 1..=scan {
        let x = lo + (hi - lo) * i as f64 / scan as f64;
        let s = d1(x)?.signum();
        if s != prev {
            changes += 1;
        }
        prev = s;
    }
    if changes > 1 {
        warnings.push(format!(
            "Phi' changes sign {changes} times on [{lo:.6e}, {hi:.6e}]; using the rightmost root"
        ));
        // narrow the bracket to the rightmost grid cell where Phi' turns negative
        for i in (0..scan).rev() {
            let x = lo + (hi - lo) * i as f64 / scan as f64;
            if d1(x)? > 0.0 {
                let right = lo + (hi - lo) * (i + 1) as f64 / scan as f64;
                lo = x;
                hi = right;
                break;
            }
        }
    }

    // safeguarded Newton on Phi' inside [lo, hi] with Phi'(lo) > 0 > Phi'(hi)
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    let mut converged = false;
    for _ in 0..300 {
        let [_, f1, f2] = phi_derivs(spec, t, x)?;
        if f1.abs() <= 1e-12 * (f2.abs() * t * t).max(1.0) {
            converged = true;
            break;
        }
        if f1 > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let mut next = x - f1 / f2;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            x = next;
            converged = true;
            break;
        }
        x = next;
    }
    if !converged {
        return Err(Error::EdgeLocation {
            reason: "bisection/Newton on Phi' did not converge".into(),
            trace,
        });
    }
    let [lambda, _, phi2] = phi_derivs(spec, t, x)?;
    if !(phi2 < 0.0) {
        return Err(Error::EdgeLocation {
            reason: format!("Phi'' = {phi2:e} at the critical point is not negative"),
            trace,
        });
    }
    let gamma_n = edge_scaling(lambda, x, c, t, phi2);
    if !(gamma_n > 0.0 && gamma_n.is_finite()) {
        return Err(Error::EdgeLocation {
            reason: format!("edge scaling gamma_N = {gamma_n:e} is not positive"),
            trace,
        });
    }
    Ok(EdgeSolution {
        zeta_minus: x,
        lambda_minus_t: lambda,
        phi_second: phi2,
        gamma_n,
        gap: spec.smallest() - x,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterministicEdge {
    pub zeta_bar: f64,
    pub gamma_limit: f64,
}

/// Subordination point of the pure Marchenko-Pastur case and the limiting edge scaling.
pub fn deterministic_edge(p: MPParams, t: f64) -> DeterministicEdge {
    let r = p.c.sqrt();
    let (lo, _) = mp_edges(p);
    DeterministicEdge {
        zeta_bar: (1.0 - t) * lo - r * t * t,
        gamma_limit: 1.0 / (r * (1.0 - r).powf(4.0 / 3.0)),
    }
}

/// `F_t(z, zeta)` and `dF_t/dzeta` at `(lambda_{-,t}, zeta_{1,-})`; both vanish at the edge.
pub fn subordination_residuals(spec: &Spectrum, t: f64, edge: &EdgeSolution) -> Result<(f64, f64)> {
    subordination_residuals_at(spec, t, edge.lambda_minus_t, edge.zeta_minus)
}

pub fn subordination_residuals_at(spec: &Spectrum, t: f64, z: f64, zeta: f64) -> Result<(f64, f64)> {
    let c = spec.c_n();
    let k = t * (1.0 - c);
    let arg = k * k + 4.0 * zeta * z;
    if arg <= 1e-14 * k * k {
        return Err(Error::Branch(format!(
            "square-root argument {arg:e} is not safely positive"
        )));
    }
    let s = arg.sqrt();
    let ds = 2.0 * z / s;
    let m = stieltjes_real(spec, zeta, 1)?;
    let f = 1.0 + (k - s) / (2.0 * zeta) - c * t * m[0];
    let df = -ds / (2.0 * zeta) - (k - s) / (2.0 * zeta * zeta) - c * t * m[1];
    Ok((f, df))
}
