//! Asymptotic constants for the left edge and the linear-statistics CLT.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_conv::deterministic_edge;
use crate::mp::{mp_edges, mp_stieltjes_scaled, MPParams};
use crate::quadrature::{integrate_complex, GaussLaguerre};
use crate::special::{cpow_right_half, gamma, sqrt_pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub alpha: f64,
    pub c: f64,
    pub c_const: f64,
    pub n: f64,
    pub t: f64,
}

impl TheoryInputs {
    pub fn new(alpha: f64, c: f64, c_const: f64, n: f64, t: f64) -> Result<Self> {
        if !(alpha > 2.0 && alpha < 4.0) {
            return Err(Error::Parameter(format!("alpha = {alpha} outside (2, 4)")));
        }
        MPParams::new(c)?;
        if !(c_const > 0.0) {
            return Err(Error::Parameter(format!("tail constant {c_const} must be positive")));
        }
        if !(n >= 1.0) {
            return Err(Error::Parameter(format!("N = {n} must be at least 1")));
        }
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Parameter(format!("t = {t} outside [0, 1)")));
        }
        Ok(TheoryInputs {
            alpha,
            c,
            c_const,
            n,
            t,
        })
    }

    fn mp(&self) -> MPParams {
        MPParams { c: self.c }
    }

    /// `c N^{1 - alpha/2}`, the common prefactor of the heavy-tail corrections.
    fn tail_scale(&self) -> f64 {
        self.c_const * self.n.powf(1.0 - self.alpha / 2.0)
    }
}

/// Standard deviation of the Gaussian edge fluctuation on scale `N^{-alpha/4}`.
pub fn sigma_alpha(inp: &TheoryInputs) -> f64 {
    let (a, c) = (inp.alpha, inp.c);
    (inp.c_const * c.powf((4.0 - a) / 4.0) * (1.0 - c.sqrt()).powi(4) * (a - 2.0) / 2.0 * gamma(a / 2.0 + 1.0)).sqrt()
}

/// `c N^{1-alpha/2} (1 - sqrt c)^2 c^{-(alpha-2)/4} Gamma(alpha/2 + 1)`.
pub fn shift_term(inp: &TheoryInputs) -> f64 {
    let (a, c) = (inp.alpha, inp.c);
    inp.tail_scale() * (1.0 - c.sqrt()).powi(2) * c.powf(-(a - 2.0) / 4.0) * gamma(a / 2.0 + 1.0)
}

/// Deterministic centering of the random edge.
pub fn lambda_shift(inp: &TheoryInputs) -> f64 {
    mp_edges(inp.mp()).0 - shift_term(inp)
}

/// Standard deviation of the Gaussian component at the critical index `alpha = 8/3`.
pub fn tilde_sigma_critical(c: f64, c_const: f64) -> f64 {
    (c_const * c.powf(2.0 / 3.0) * (1.0 - c.sqrt()).powf(4.0 / 3.0) * gamma(7.0 / 3.0) / 3.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct PTransform {
    pub quadrature: Complex64,
    pub closed_form: Complex64,
    pub nodes: usize,
}

/// `c N^{1-alpha/2} c_N int_0^inf exp(-s - s c_N m) (s m)^{alpha/2} ds`.
///
/// The quadrature substitutes `s = x / Re(1 + c m)` and integrates against the
/// generalized Laguerre weight `x^{alpha/2} e^{-x}`, doubling the node count
/// until successive values agree to 1e-11.
pub fn p_transform(inp: &TheoryInputs, m: Complex64) -> Result<PTransform> {
    let a = inp.alpha / 2.0;
    let w = 1.0 + inp.c * m;
    if w.re <= 0.0 {
        return Err(Error::Domain(format!("Re(1 + c m) = {} <= 0", w.re)));
    }
    let pref = inp.tail_scale() * inp.c;
    let closed_form = pref * gamma(a + 1.0) * m.powf(a) * cpow_right_half(w, -a - 1.0)?;
    let omega = w.im / w.re;
    let mut prev: Option<Complex64> = None;
    let mut n = 32;
    loop {
        let rule = GaussLaguerre::new(n, a);
        let v = rule.integrate(|x| Complex64::new(0.0, -omega * x).exp());
        let value = pref * m.powf(a) * w.re.powf(-a - 1.0) * v;
        if let Some(p) = prev {
            let delta = (value - p).norm() / value.norm();
            if delta <= 1e-11 {
                return Ok(PTransform {
                    quadrature: value,
                    closed_form,
                    nodes: n,
                });
            }
            if n >= 512 {
                return Err(Error::Quadrature { nodes: n, delta });
            }
        }
        prev = Some(value);
        n *= 2;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MShift {
    pub m_shift: Complex64,
    pub p: Complex64,
    pub m_scaled: Complex64,
    /// Three-term expansion of the expected empirical transform.
    pub expected_m_x: Complex64,
}

/// Heavy-tail correction to the expected transform of `S(X)` at `z`.
pub fn m_shift_eval(inp: &TheoryInputs, z: Complex64) -> Result<MShift> {
    let p = inp.mp();
    let (lo, hi) = mp_edges(p);
    let w = z / (1.0 - inp.t);
    if w.im.abs() < 1e-12 && w.re >= lo && w.re <= hi {
        return Err(Error::Branch(format!(
            "z/(1-t) = {w} is on the support [{lo}, {hi}]; the square root has no definite branch"
        )));
    }
    let m_scaled = mp_stieltjes_scaled(p, inp.t, z, 0)?;
    let pt = p_transform(inp, m_scaled)?.closed_form;
    // i sqrt((w - l-)(l+ - w)) on the physical sheet is sqrt(w - l-) sqrt(w - l+)
    let root = sqrt_pair(w, lo, hi);
    let m_shift = -(w - inp.c + 1.0) * pt / (2.0 * inp.c * z * root);
    let expected_m_x = m_scaled + m_shift - pt / (2.0 * inp.c * z);
    Ok(MShift {
        m_shift,
        p: pt,
        m_scaled,
        expected_m_x,
    })
}

/// Shift of the edge implied by the expectation expansion:
/// `2 c l- * t m_shift(zeta_bar)`, to compare with [`shift_term`].
pub fn shift_via_m_shift(inp: &TheoryInputs) -> Result<f64> {
    let p = inp.mp();
    let (lo, _) = mp_edges(p);
    let zb = deterministic_edge(p, inp.t).zeta_bar;
    let ms = m_shift_eval(inp, Complex64::new(zb, 0.0))?;
    Ok(2.0 * inp.c * lo * inp.t * ms.m_shift.re)
}

fn pow(w: Complex64, p: f64) -> Result<Complex64> {
    cpow_right_half(w, p)
}

/// `d_u d_u'` of the double integral in the kernel, reduced to one dimension.
///
/// With `s = r x`, `s' = r (1 - x)` the radial integral is a Gamma function,
/// which leaves a smooth integral over `x` in `[0, 1]`.
pub fn kernel_core(alpha: f64, c: f64, u: Complex64, up: Complex64) -> Result<Complex64> {
    let a = alpha / 2.0;
    let (g0, g1, g2) = (gamma(a), gamma(a + 1.0), gamma(a + 2.0));
    let err = std::cell::Cell::new(None);
    let f = |x: f64| -> Complex64 {
        let eval = || -> Result<Complex64> {
            let xu = u * x;
            let yu = up * (1.0 - x);
            let sum = xu + yu;
            let b = 1.0 + c * sum;
            let h0 = pow(sum, a)? - pow(xu, a)? - pow(yu, a)?;
            let h1 = 2.0 * pow(sum, a - 1.0)? - pow(yu, a - 1.0)? - pow(xu, a - 1.0)?;
            let h2 = pow(sum, a - 2.0)?;
            Ok(
                c * c * g2 * h0 * pow(b, -a - 2.0)? - c * a * g1 * h1 * pow(b, -a - 1.0)?
                    + a * (a - 1.0) * g0 * h2 * pow(b, -a)?,
            )
        };
        match eval() {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e.to_string()));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let r = integrate_complex(f, 0.0, 1.0, 1e-300, 1e-12)?;
    if let Some(msg) = err.take() {
        return Err(Error::Domain(msg));
    }
    Ok(r.value)
}

/// The double integral itself (no derivatives), reduced the same way.
pub fn kernel_underived(alpha: f64, c: f64, u: Complex64, up: Complex64) -> Result<Complex64> {
    let a = alpha / 2.0;
    let g0 = gamma(a);
    let f = |x: f64| -> Complex64 {
        let xu = u * x;
        let yu = up * (1.0 - x);
        let b = 1.0 + c * (xu + yu);
        let h0 = (xu + yu).powf(a) - xu.powf(a) - yu.powf(a);
        g0 * h0 / (x * (1.0 - x) * b.powf(a))
    };
    Ok(integrate_complex(f, 0.0, 1.0, 1e-300, 1e-12)?.value)
}

/// `d_u d_u'` integrand on the original `(s, s')` quarter plane, with the
/// factor `exp(-s - s')` split off for Gauss-Laguerre.
fn kernel_integrand_2d(a: f64, c: f64, u: Complex64, up: Complex64, s: f64, sp: f64) -> Complex64 {
    let su = u * s;
    let spu = up * sp;
    let sum = su + spu;
    let k = sum.powf(a) - su.powf(a) - spu.powf(a);
    let d1 = a * sum.powf(a - 1.0);
    let val = c * c * k - c * (d1 - a * su.powf(a - 1.0)) - c * (d1 - a * spu.powf(a - 1.0))
        + a * (a - 1.0) * sum.powf(a - 2.0);
    (-(s * c * u) - sp * c * up).exp() * val
}

/// Tensor Gauss-Laguerre evaluation of [`kernel_core`], doubling from 64 nodes
/// per axis until the relative change is at most `rel_tol`.
///
/// The integrand has an integrable singularity at the origin, so convergence
/// is algebraic; this serves as an independent cross-check only.
pub fn kernel_core_laguerre(
    alpha: f64,
    c: f64,
    u: Complex64,
    up: Complex64,
    rel_tol: f64,
    n_max: usize,
) -> Result<(Complex64, usize)> {
    let a = alpha / 2.0;
    let mut n = 64;
    let mut prev: Option<Complex64> = None;
    loop {
        let rule = GaussLaguerre::new(n, 0.0);
        let mut total = Complex64::new(0.0, 0.0);
        for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
            for (&sp, &wsp) in rule.nodes.iter().zip(&rule.weights) {
                total += ws * wsp * kernel_integrand_2d(a, c, u, up, s, sp);
            }
        }
        if let Some(p) = prev {
            let delta = (total - p).norm() / total.norm();
            if delta <= rel_tol {
                return Ok((total, n));
            }
            if 2 * n > n_max {
                return Err(Error::Quadrature { nodes: n * n, delta });
            }
        }
        prev = Some(total);
        n *= 2;
    }
}

/// CLT kernel `K(z, z')`.
pub fn clt_kernel(inp: &TheoryInputs, z: Complex64, zp: Complex64) -> Result<Complex64> {
    let p = inp.mp();
    let u = mp_stieltjes_scaled(p, inp.t, z, 0)?;
    let du = mp_stieltjes_scaled(p, inp.t, z, 1)?;
    let up = mp_stieltjes_scaled(p, inp.t, zp, 0)?;
    let dup = mp_stieltjes_scaled(p, inp.t, zp, 1)?;
    let core = kernel_core(inp.alpha, inp.c, u, up)?;
    Ok(inp.tail_scale() * inp.t * inp.t * inp.c * du * dup * core)
}

/// Evaluation point for the variance: just above the deterministic subordination point.
pub fn variance_point(inp: &TheoryInputs) -> Complex64 {
    Complex64::new(deterministic_edge(inp.mp(), inp.t).zeta_bar, 1e-12)
}

/// `sigma_m`, the kernel on the diagonal with the `N^{1-alpha/2}` factor removed.
pub fn sigma_m(inp: &TheoryInputs) -> Result<f64> {
    let z = variance_point(inp);
    let k = clt_kernel(inp, z, z)?;
    let var = k.re * inp.n.powf(inp.alpha / 2.0 - 1.0);
    if !(var > 0.0) {
        return Err(Error::Domain(format!("kernel variance {var:e} is not positive")));
    }
    Ok(var.sqrt())
}

/// Prediction of the edge standard deviation from the kernel, `2 c l- sigma_m`.
pub fn edge_sigma_from_kernel(inp: &TheoryInputs) -> Result<f64> {
    let (lo, _) = mp_edges(inp.mp());
    Ok(2.0 * inp.c * lo * sigma_m(inp)?)
}

/// Constants reported with every ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub sigma_alpha: f64,
    pub lambda_shift: f64,
    pub shift_term: f64,
    pub tilde_sigma: f64,
    pub gamma_limit: f64,
    pub lambda_minus_mp: f64,
}

pub fn theory_constants(inp: &TheoryInputs) -> TheoryConstants {
    let p = inp.mp();
    TheoryConstants {
        sigma_alpha: sigma_alpha(inp),
        lambda_shift: lambda_shift(inp),
        shift_term: shift_term(inp),
        tilde_sigma: tilde_sigma_critical(inp.c, inp.c_const),
        gamma_limit: deterministic_edge(p, inp.t).gamma_limit,
        lambda_minus_mp: mp_edges(p).0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn inp(alpha: f64, c: f64, k: f64, n: f64, t: f64) -> TheoryInputs {
        TheoryInputs::new(alpha, c, k, n, t).unwrap()
    }

    #[test]
    fn sigma_alpha_values() {
        let s = sigma_alpha(&inp(3.0, 0.25, 1.0, 1000.0, 0.1));
        let want = 0.25f64.powf(0.25) * 0.5f64.powi(4) * 0.5 * 0.75 * PI.sqrt();
        assert!((s * s - want).abs() < 1e-14);
        assert!(sigma_alpha(&inp(2.000001, 0.25, 1.0, 1e3, 0.1)) < 1e-2);
        let r = sigma_alpha(&inp(3.0, 0.25, 2.0, 1e3, 0.1)) / s;
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lambda_shift_values() {
        let i = inp(3.0, 0.25, 1.0, 1000.0, 0.1);
        let term = 1000f64.powf(-0.5) * 0.25 / 0.25f64.powf(0.25) * 0.75 * PI.sqrt();
        assert!((lambda_shift(&i) - (0.25 - term)).abs() < 1e-15);
        assert!((lambda_shift(&inp(3.0, 0.25, 1.0, 1e24, 0.1)) - 0.25).abs() < 1e-11);
        let a = 10.0 / 3.0;
        let r1 = shift_term(&inp(a, 0.25, 1.0, 1e4, 0.1)) * 1e4f64.powf(2.0 / 3.0);
        let r2 = shift_term(&inp(a, 0.25, 1.0, 1e8, 0.1)) * 1e8f64.powf(2.0 / 3.0);
        assert!((r1 / r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilde_sigma_values() {
        let s = tilde_sigma_critical(0.25, 1.0);
        let want = 0.25f64.powf(2.0 / 3.0) * 0.5f64.powf(4.0 / 3.0) * gamma(7.0 / 3.0) / 3.0;
        assert!((s * s - want).abs() < 1e-15);
        assert!((tilde_sigma_critical(0.25, 3.0) / s - 3f64.sqrt()).abs() < 1e-14);
        assert!(((8.0 / 3.0) / 4.0 - 2.0 / 3.0f64).abs() < 1e-15);
    }

    #[test]
    fn p_transform_at_lower_edge() {
        let c = 0.25;
        let i = inp(3.0, c, 1.0, 1e4, 0.1);
        let m = 1.0 / (c.sqrt() - c);
        let r = p_transform(&i, Complex64::new(m, 0.0)).unwrap();
        let want = 1e4f64.powf(-0.5) * c * gamma(2.5) * c.powf(-0.75) * (1.0 - c.sqrt());
        assert!((r.closed_form.re - want).abs() < 1e-14 * want);
        assert!(((r.quadrature - r.closed_form).norm() / want) < 1e-9);
        assert!(r.closed_form.im.abs() < 1e-16 && r.closed_form.re > 0.0);
    }

    #[test]
    fn p_transform_rejects_bad_domain() {
        let i = inp(3.0, 0.5, 1.0, 1e4, 0.1);
        assert!(matches!(
            p_transform(&i, Complex64::new(-3.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shift_expansion_consistency() {
        let i = inp(3.0, 0.25, 1.0, 1e6, 0.01);
        let via = shift_via_m_shift(&i).unwrap();
        let closed = shift_term(&i);
        assert!(((via - closed) / closed).abs() <= 0.1, "{via} vs {closed}");
    }

    #[test]
    fn t_m_shift_matches_limit_formula() {
        let c = 0.25f64;
        let m = 1.0 / (c.sqrt() - c);
        for &t in &[0.01, 0.05] {
            let i = inp(3.0, c, 1.0, 1e4, t);
            let zb = deterministic_edge(MPParams { c }, t).zeta_bar;
            let ms = m_shift_eval(&i, Complex64::new(zb, 0.0)).unwrap();
            let pm = p_transform(&inp(3.0, c, 1.0, 1e4, 0.0), Complex64::new(m, 0.0))
                .unwrap()
                .closed_form
                .re
                / c;
            let want = pm / (2.0 * c.sqrt() * (1.0 - c.sqrt()));
            let scale = 1e4f64.powf(-0.5);
            assert!((t * ms.m_shift.re - want).abs() <= 20.0 * t.sqrt() * scale, "t {t}");
            assert!(ms.m_shift.norm() <= 10.0 * scale / t);
            let gap = (ms.expected_m_x - ms.m_scaled).norm();
            assert!(gap * t / scale <= 100.0);
        }
    }

    #[test]
    fn m_shift_branch_error_on_support() {
        let i = inp(3.0, 0.25, 1.0, 1e4, 0.1);
        assert!(matches!(
            m_shift_eval(&i, Complex64::new(0.9, 0.0)),
            Err(Error::Branch(_))
        ));
    }

    #[test]
    fn kernel_core_matches_mixed_differences() {
        let (alpha, c) = (3.0, 0.25);
        for &(u, up) in &[
            (Complex64::new(4.0, 0.0), Complex64::new(4.0, 0.0)),
            (Complex64::new(2.0, 0.5), Complex64::new(3.0, 0.1)),
        ] {
            let h = 1e-3;
            let f = |a: Complex64, b: Complex64| kernel_underived(alpha, c, a, b).unwrap();
            let fd = (f(u + h, up + h) - f(u + h, up - h) - f(u - h, up + h) + f(u - h, up - h)) / (4.0 * h * h);
            let exact = kernel_core(alpha, c, u, up).unwrap();
            assert!((fd - exact).norm() <= 1e-3 * exact.norm(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn kernel_core_matches_tensor_laguerre() {
        let (alpha, c) = (3.0, 0.25);
        let u = Complex64::new(3.5, 0.2);
        let up = Complex64::new(4.0, 0.0);
        let exact = kernel_core(alpha, c, u, up).unwrap();
        let (lag, _) = kernel_core_laguerre(alpha, c, u, up, 1e-3, 256).unwrap();
        assert!((lag - exact).norm() <= 2e-3 * exact.norm(), "{lag} vs {exact}");
    }

    #[test]
    fn kernel_symmetry_and_conjugation() {
        let i = inp(3.0, 0.25, 1.0, 1e4, 0.05);
        let z = Complex64::new(0.2, 0.01);
        let zp = Complex64::new(0.21, 0.002);
        let k1 = clt_kernel(&i, z, zp).unwrap();
        let k2 = clt_kernel(&i, zp, z).unwrap();
        assert!((k1 - k2).norm() <= 1e-9 * k1.norm());
        let k3 = clt_kernel(&i, z.conj(), zp.conj()).unwrap();
        assert!((k3 - k1.conj()).norm() <= 1e-9 * k1.norm());
    }

    #[test]
    fn constants_continuous_in_alpha_and_c() {
        let mut prev: Option<TheoryConstants> = None;
        for k in 1..200 {
            let a = 2.0 + 2.0 * k as f64 / 200.0;
            let tc = theory_constants(&inp(a, 0.25, 1.0, 1e3, 0.1));
            assert!(tc.sigma_alpha > 0.0 && tc.shift_term > 0.0 && tc.lambda_shift < tc.lambda_minus_mp);
            if let Some(p) = prev {
                assert!((tc.sigma_alpha - p.sigma_alpha).abs() < 0.05);
            }
            prev = Some(tc);
        }
        for k in 1..100 {
            let c = k as f64 / 100.0;
            let tc = theory_constants(&inp(3.0, c, 1.0, 1e3, 0.1));
            assert!(tc.sigma_alpha > 0.0 && tc.gamma_limit > 0.0 && tc.tilde_sigma > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn p_transform_identity(alpha in 2.05f64..3.95, r in 0.05f64..8.0, phi in 0.0f64..1.2, c in 0.05f64..0.95) {
            let i = inp(alpha, c, 1.0, 1e4, 0.1);
            let m = Complex64::from_polar(r, phi);
            let res = p_transform(&i, m).unwrap();
            prop_assert!((res.quadrature - res.closed_form).norm() <= 1e-9 * res.closed_form.norm());
        }
    }
}
