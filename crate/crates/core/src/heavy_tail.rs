//! The heavy-tailed entry law and the small/intermediate/heavy split of a data matrix.
//!
//! `Theta` is a symmetric two-piece law: a uniform core of height `h` on
//! `[-s0, s0]` and an exact Pareto tail `A |x|^{-alpha-1}` beyond. The pair
//! `(h, A)` is fixed by normalization and unit variance, so
//! `P(Theta > s) = (A / alpha) s^{-alpha}` holds exactly for `s >= s0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_complex, integrate_complex_to_inf};
use crate::rng::{rng_from_seed, Rng};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSpec {
    pub alpha: f64,
    pub s0: f64,
    pub core_height: f64,
    pub tail_amplitude: f64,
    pub c_const: f64,
}

/// Open interval of changeover points `s0` for which both pieces have positive mass.
pub fn feasible_s0(alpha: f64) -> (f64, f64) {
    (((alpha - 2.0) / alpha).sqrt(), 3f64.sqrt())
}

pub fn build_theta(alpha: f64, s0: f64) -> Result<ThetaSpec> {
    if !(alpha > 2.0 && alpha < 4.0) {
        return Err(Error::Parameter(format!("tail index alpha = {alpha} outside (2, 4)")));
    }
    let (lo, hi) = feasible_s0(alpha);
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::Parameter(format!("s0 = {s0} must be positive")));
    }
    // normalization:  h s0 + (A/alpha) s0^-alpha            = 1/2
    // unit variance:  h s0^3/3 + A s0^(2-alpha)/(alpha-2)   = 1/2
    let det = s0.powf(3.0 - alpha) * (1.0 / (alpha - 2.0) - 1.0 / (3.0 * alpha));
    let h = 0.5 * s0.powf(-alpha) * (s0 * s0 / (alpha - 2.0) - 1.0 / alpha) / det;
    let a = 0.5 * s0 * (1.0 - s0 * s0 / 3.0) / det;
    if h <= 0.0 {
        return Err(Error::Parameter(format!(
            "s0 = {s0} gives core height {h:e} <= 0; need s0 > {lo:.12} for alpha = {alpha}"
        )));
    }
    if a <= 0.0 {
        return Err(Error::Parameter(format!(
            "s0 = {s0} gives tail amplitude {a:e} <= 0; need s0 < {hi:.12}"
        )));
    }
    let c_const = -(a / alpha) * gamma(1.0 - alpha / 2.0);
    Ok(ThetaSpec {
        alpha,
        s0,
        core_height: h,
        tail_amplitude: a,
        c_const,
    })
}

impl ThetaSpec {
    /// `P(Theta > s)` for `s >= 0`.
    pub fn tail(&self, s: f64) -> f64 {
        theta_tail(self, s)
    }

    pub fn density(&self, x: f64) -> f64 {
        let s = x.abs();
        if s <= self.s0 {
            self.core_height
        } else {
            self.tail_amplitude * s.powf(-self.alpha - 1.0)
        }
    }

    /// `E[Theta^2 1{|Theta| < s}]`.
    pub fn truncated_second_moment(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if !s.is_finite() {
            return 1.0;
        }
        let (h, a, al, s0) = (self.core_height, self.tail_amplitude, self.alpha, self.s0);
        if s <= s0 {
            2.0 * h * s.powi(3) / 3.0
        } else {
            2.0 * h * s0.powi(3) / 3.0 + 2.0 * a * (s0.powf(2.0 - al) - s.powf(2.0 - al)) / (al - 2.0)
        }
    }

    /// Inverse of [`Self::truncated_second_moment`] on `(0, 1)`.
    pub fn cutoff_for_second_moment(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Parameter(format!("target t = {t} outside (0, 1)")));
        }
        let (h, a, al, s0) = (self.core_height, self.tail_amplitude, self.alpha, self.s0);
        let core = 2.0 * h * s0.powi(3) / 3.0;
        if t <= core {
            Ok((1.5 * t / h).cbrt())
        } else {
            let rest = s0.powf(2.0 - al) - (t - core) * (al - 2.0) / (2.0 * a);
            Ok(rest.powf(1.0 / (2.0 - al)))
        }
    }

    /// `P(|Theta| < s)`.
    pub fn prob_abs_below(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            1.0 - 2.0 * self.tail(s)
        }
    }

    /// Draw one `Theta` by inverting the magnitude law and attaching a random sign.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let q = 1.0 - rng.random::<f64>(); // (0, 1]
        let p_tail = 2.0 * self.tail_amplitude / self.alpha * self.s0.powf(-self.alpha);
        let mag = if q >= p_tail {
            (1.0 - q) / (2.0 * self.core_height)
        } else {
            (q * self.alpha / (2.0 * self.tail_amplitude)).powf(-1.0 / self.alpha)
        };
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }
}

pub fn theta_tail(spec: &ThetaSpec, s: f64) -> f64 {
    let s = s.max(0.0);
    if s <= spec.s0 {
        0.5 - spec.core_height * s
    } else {
        spec.tail_amplitude / spec.alpha * s.powf(-spec.alpha)
    }
}

/// `M x N` matrix with entries `Theta_ij / sqrt(N)`, filled column by column.
pub fn sample_matrix_with(spec: &ThetaSpec, m: usize, n: usize, rng: &mut Rng) -> Result<DMatrix<f64>> {
    if m == 0 || m >= n {
        return Err(Error::Dimension(format!(
            "need 1 <= M < N, got M = {m}, N = {n}; transpose the data for M >= N"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DMatrix::from_fn(m, n, |_, _| spec.sample(rng) * scale))
}

pub fn sample_matrix(spec: &ThetaSpec, m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = rng_from_seed(seed);
    sample_matrix_with(spec, m, n, &mut rng)
}

/// Threshold exponents of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    pub alpha: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_alpha: f64,
    /// False when `eps_a`/`eps_b` fall outside the admissible asymptotic ranges.
    pub admissible_range: bool,
}

impl DecompositionParams {
    pub fn eps_alpha_for(alpha: f64) -> f64 {
        (alpha - 2.0) / (5.0 * alpha)
    }

    pub fn eps_b_limit(alpha: f64) -> f64 {
        (alpha - 2.0) / (10.0 * alpha)
    }

    pub fn eps_a_limit(alpha: f64, eps_b: f64) -> f64 {
        eps_b.min(4.0 - alpha) / 10_000.0
    }

    /// `eps_b = 0.9 (alpha-2)/(10 alpha)`, `eps_a = 0.9 min(eps_b, 4-alpha)/10^4`.
    pub fn default_for(alpha: f64) -> Self {
        let eps_b = 0.9 * Self::eps_b_limit(alpha);
        let eps_a = 0.9 * Self::eps_a_limit(alpha, eps_b);
        Self::new(alpha, eps_a, eps_b)
    }

    /// Explicit exponents; out-of-range choices are accepted and flagged.
    pub fn new(alpha: f64, eps_a: f64, eps_b: f64) -> Self {
        let admissible_range =
            eps_b > 0.0 && eps_b < Self::eps_b_limit(alpha) && eps_a > 0.0 && eps_a < Self::eps_a_limit(alpha, eps_b);
        DecompositionParams {
            alpha,
            eps_a,
            eps_b,
            eps_alpha: Self::eps_alpha_for(alpha),
            admissible_range,
        }
    }

    /// Choose `eps_a` so that `N E[A_ij^2]` equals `t_target` exactly.
    pub fn for_target_t(spec: &ThetaSpec, n: usize, t_target: f64, eps_b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("N = {n} too small")));
        }
        let cutoff = spec.cutoff_for_second_moment(t_target)?;
        let eps_a = -cutoff.ln() / (n as f64).ln();
        Ok(Self::new(spec.alpha, eps_a, eps_b))
    }

    /// `|y| < small_threshold` puts an entry in the A part.
    pub fn small_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(-0.5 - self.eps_a)
    }

    /// `|y| >= heavy_threshold` puts an entry in the C part.
    pub fn heavy_threshold(&self, n: usize) -> f64 {
        (n as f64).powf(-self.eps_b)
    }
}

/// `t = N E|A_ij|^2 = E[Theta^2 1{|Theta| < N^{-eps_a}}]`.
pub fn gaussian_time(spec: &ThetaSpec, n: usize, eps_a: f64) -> f64 {
    spec.truncated_second_moment((n as f64).powf(-eps_a))
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub y: DMatrix<f64>,
    pub a_part: DMatrix<f64>,
    pub b_part: DMatrix<f64>,
    pub c_part: DMatrix<f64>,
    pub psi_mask: DMatrix<bool>,
    pub chi_mask: DMatrix<bool>,
    pub params: DecompositionParams,
    pub t: f64,
    pub m: usize,
    pub n: usize,
}

impl Decomposition {
    pub fn c_n(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// The heavy-tailed part `X = B + C`.
    pub fn x(&self) -> DMatrix<f64> {
        &self.b_part + &self.c_part
    }

    pub fn goodness(&self) -> Goodness {
        is_good(&self.psi_mask, self.params.alpha)
    }
}

/// Deterministic thresholding of `y` into small, intermediate and heavy parts.
///
/// `t` is computed from `spec` when given, otherwise left as NaN (the law of
/// the entries is unknown).
pub fn decompose(y: &DMatrix<f64>, params: &DecompositionParams, spec: Option<&ThetaSpec>) -> Decomposition {
    let (m, n) = y.shape();
    let small = params.small_threshold(n);
    let heavy = params.heavy_threshold(n);
    let psi_mask = y.map(|v| v.abs() >= heavy);
    let chi_mask = y.map(|v| v.abs() >= small && v.abs() < heavy);
    let c_part = y.zip_map(&psi_mask, |v, p| if p { v } else { 0.0 });
    let b_part = y.zip_map(&chi_mask, |v, c| if c { v } else { 0.0 });
    let a_part = DMatrix::from_fn(m, n, |i, j| {
        if psi_mask[(i, j)] || chi_mask[(i, j)] {
            0.0
        } else {
            y[(i, j)]
        }
    });
    let t = spec.map_or(f64::NAN, |s| gaussian_time(s, n, params.eps_a));
    Decomposition {
        y: y.clone(),
        a_part,
        b_part,
        c_part,
        psi_mask,
        chi_mask,
        params: *params,
        t,
        m,
        n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Goodness {
    pub good: bool,
    pub count: usize,
    pub threshold: f64,
}

/// A heavy-entry mask is good when it has at most `N^{1 - (alpha-2)/(5 alpha)}` ones.
pub fn is_good(psi_mask: &DMatrix<bool>, alpha: f64) -> Goodness {
    let n = psi_mask.ncols() as f64;
    let count = psi_mask.iter().filter(|&&b| b).count();
    let threshold = n.powf(1.0 - DecompositionParams::eps_alpha_for(alpha));
    Goodness {
        good: count as f64 <= threshold,
        count,
        threshold,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PhiComparison {
    pub quadrature: Complex64,
    pub expansion: Complex64,
    pub difference: f64,
}

/// Characteristic function `E exp(-i lambda x^2)` of an entry `x` of `X = B + C`,
/// by quadrature against the exact law, next to its heavy-tail expansion
/// `1 - i(1-t) lambda/N + c (i lambda)^{alpha/2} / N^{alpha/2}`.
pub fn phi_char(spec: &ThetaSpec, lambda: Complex64, n: usize, eps_a: f64) -> Result<PhiComparison> {
    if lambda.im > 0.0 {
        return Err(Error::Domain(format!("need Im lambda <= 0, got {lambda}")));
    }
    let nf = n as f64;
    let t = gaussian_time(spec, n, eps_a);
    let expansion = Complex64::new(1.0, 0.0) - Complex64::i() * (1.0 - t) * lambda / nf
        + spec.c_const * (Complex64::i() * lambda).powf(spec.alpha / 2.0) / nf.powf(spec.alpha / 2.0);
    if lambda == Complex64::new(0.0, 0.0) {
        return Ok(PhiComparison {
            quadrature: Complex64::new(1.0, 0.0),
            expansion,
            difference: (expansion - 1.0).norm(),
        });
    }
    let omega = lambda / nf;
    let s_a = nf.powf(-eps_a);
    let mut value = Complex64::new(spec.prob_abs_below(s_a), 0.0);
    let phase = |u: Complex64| (-Complex64::i() * omega * u).exp();
    let tol = 1e-15;

    if s_a < spec.s0 {
        let h = spec.core_height;
        let core = integrate_complex(
            |s| phase(Complex64::new(s * s, 0.0)) * (2.0 * h),
            s_a,
            spec.s0,
            tol,
            1e-14,
        )?;
        value += core.value;
    }

    // tail in u = s^2:  A int_{u0}^inf u^{-alpha/2-1} e^{-i omega u} du, along a
    // ray from u0 on which the oscillating factor decays like e^{-|omega| y}
    let u0 = s_a.max(spec.s0).powi(2);
    let dir = -Complex64::i() * omega.norm() / omega;
    let p = -spec.alpha / 2.0 - 1.0;
    let amp = spec.tail_amplitude;
    let tail = integrate_complex_to_inf(
        |y| {
            let u = Complex64::new(u0, 0.0) + dir * y;
            u.powf(p) * phase(u) * dir * amp
        },
        0.0,
        tol,
        1e-14,
    )?;
    value += tail.value;
    Ok(PhiComparison {
        quadrature: value,
        expansion,
        difference: (value - expansion).norm(),
    })
}
