//! Dense spectral computations on sample covariance matrices `S(H) = H H^T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tail::Decomposition;
use crate::rng::{rng_from_seed, Rng};

/// Ascending eigenvalues of an `M x M` covariance matrix built from an `M x N` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub m: usize,
    pub n: usize,
}

impl Spectrum {
    /// Sorts, validates and clamps numerically negative values to zero.
    pub fn new(mut values: Vec<f64>, m: usize, n: usize) -> Result<Self> {
        if values.len() != m {
            return Err(Error::Dimension(format!(
                "{} eigenvalues supplied for M = {m}",
                values.len()
            )));
        }
        let bad = values.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFinite { count: bad });
        }
        values.sort_by(f64::total_cmp);
        let top = values.last().copied().unwrap_or(0.0);
        let tol = 1e-10 * top.max(1.0);
        if let Some(&v) = values.first() {
            if v < -tol {
                return Err(Error::Parameter(format!(
                    "covariance eigenvalue {v:e} is negative beyond tolerance {tol:e}"
                )));
            }
        }
        for v in values.iter_mut() {
            if *v < tol {
                *v = v.max(0.0);
            }
        }
        Ok(Spectrum { values, m, n })
    }

    pub fn c_n(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn smallest(&self) -> f64 {
        self.values[0]
    }

    pub fn largest(&self) -> f64 {
        *self.values.last().expect("spectrum is non-empty")
    }
}

fn check_finite(h: &DMatrix<f64>) -> Result<()> {
    let bad = h.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        Err(Error::NonFinite { count: bad })
    } else {
        Ok(())
    }
}

/// Eigenvalues of `H H^T`, padded with zeros when `M > N`.
///
/// Forms the smaller Gram matrix and runs a symmetric eigensolver. For the
/// aspect ratios used here the smallest eigenvalue stays well away from zero,
/// so this keeps about 1e-14 relative accuracy while being several times faster
/// than an SVD of `H`; [`covariance_spectrum_svd`] is the reference route.
pub fn covariance_spectrum(h: &DMatrix<f64>) -> Result<Spectrum> {
    check_finite(h)?;
    let (m, n) = h.shape();
    let mut values: Vec<f64> = if m <= n {
        (h * h.transpose()).symmetric_eigenvalues().iter().copied().collect()
    } else {
        (h.transpose() * h).symmetric_eigenvalues().iter().copied().collect()
    };
    values.resize(m, 0.0);
    Spectrum::new(values, m, n)
}

/// Squared singular values of `H`, padded with zeros when `M > N`.
pub fn covariance_spectrum_svd(h: &DMatrix<f64>) -> Result<Spectrum> {
    check_finite(h)?;
    let (m, n) = h.shape();
    let mut values: Vec<f64> = h.singular_values().iter().map(|s| s * s).collect();
    values.resize(m, 0.0);
    Spectrum::new(values, m, n)
}

fn pole_check(spec: &Spectrum, z: Complex64) -> Result<()> {
    if z.im == 0.0 {
        if let Some(&lam) = spec.values.iter().find(|&&lam| (lam - z.re).abs() < 1e-14) {
            return Err(Error::Pole {
                z: format!("{z}"),
                eigenvalue: lam,
            });
        }
    }
    Ok(())
}

/// `k`-th derivative of `(1/M) sum 1/(lambda_i - z)`.
pub fn stieltjes(spec: &Spectrum, z: Complex64, k: usize) -> Result<Complex64> {
    Ok(stieltjes_derivs(spec, z, k)?[k])
}

/// Value and derivatives up to order `kmax` in one pass.
pub fn stieltjes_derivs(spec: &Spectrum, z: Complex64, kmax: usize) -> Result<Vec<Complex64>> {
    pole_check(spec, z)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for &lam in &spec.values {
        let g = 1.0 / (lam - z);
        let mut p = g;
        for a in acc.iter_mut() {
            *a += p;
            p *= g;
        }
    }
    let mut fact = 1.0;
    let scale = 1.0 / spec.m as f64;
    for (k, a) in acc.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *a *= fact * scale;
    }
    Ok(acc)
}

/// Real-valued derivatives for real `x` off the spectrum.
pub fn stieltjes_real(spec: &Spectrum, x: f64, kmax: usize) -> Result<Vec<f64>> {
    pole_check(spec, Complex64::new(x, 0.0))?;
    let mut acc = vec![0.0; kmax + 1];
    for &lam in &spec.values {
        let g = 1.0 / (lam - x);
        let mut p = g;
        for a in acc.iter_mut() {
            *a += p;
            p *= g;
        }
    }
    let mut fact = 1.0;
    let scale = 1.0 / spec.m as f64;
    for (k, a) in acc.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *a *= fact * scale;
    }
    Ok(acc)
}

fn shifted_gram(h: &DMatrix<f64>, z: Complex64) -> DMatrix<Complex64> {
    let g = h * h.transpose();
    DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
        let v = Complex64::new(g[(i, j)], 0.0);
        if i == j {
            v - z
        } else {
            v
        }
    })
}

fn distance_to_spectrum(h: &DMatrix<f64>, z: Complex64) -> f64 {
    covariance_spectrum(h)
        .map(|s| {
            s.values
                .iter()
                .map(|&l| (Complex64::new(l, 0.0) - z).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .unwrap_or(f64::NAN)
}

/// Entry `(i, j)` of `(H H^T - z)^{-1}` via an LU solve.
pub fn resolvent_entry(h: &DMatrix<f64>, z: Complex64, i: usize, j: usize) -> Result<Complex64> {
    check_finite(h)?;
    let m = h.nrows();
    if i >= m || j >= m {
        return Err(Error::Dimension(format!("index ({i}, {j}) outside {m} x {m}")));
    }
    let a = shifted_gram(h, z);
    let mut rhs = DVector::from_element(m, Complex64::new(0.0, 0.0));
    rhs[j] = Complex64::new(1.0, 0.0);
    let x = a.clone().lu().solve(&rhs).ok_or_else(|| Error::Conditioning {
        distance: distance_to_spectrum(h, z),
    })?;
    let residual = (&a * &x - &rhs).norm();
    if !(residual <= 1e-10) {
        return Err(Error::Conditioning {
            distance: distance_to_spectrum(h, z),
        });
    }
    Ok(x[i])
}

/// Full resolvent `(H H^T - z)^{-1}`.
pub fn resolvent(h: &DMatrix<f64>, z: Complex64) -> Result<DMatrix<Complex64>> {
    check_finite(h)?;
    let a = shifted_gram(h, z);
    let g = a.clone().try_inverse().ok_or_else(|| Error::Conditioning {
        distance: distance_to_spectrum(h, z),
    })?;
    let m = a.nrows();
    let residual = (&a * &g - DMatrix::<Complex64>::identity(m, m)).norm();
    if !(residual <= 1e-10 * (m as f64).sqrt()) {
        return Err(Error::Conditioning {
            distance: distance_to_spectrum(h, z),
        });
    }
    Ok(g)
}

/// Largest resolvent entry magnitudes split by whether the row and column
/// indices belong to the heavy rows `d` (D) or not (T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventProfile {
    pub max_tt: f64,
    pub max_td: f64,
    pub max_dd: f64,
}

pub fn resolvent_profile(h: &DMatrix<f64>, z: Complex64, d: &[usize]) -> Result<ResolventProfile> {
    let g = resolvent(h, z)?;
    let m = g.nrows();
    let mut heavy = vec![false; m];
    for &i in d {
        heavy[i] = true;
    }
    let mut p = ResolventProfile {
        max_tt: 0.0,
        max_td: 0.0,
        max_dd: 0.0,
    };
    for i in 0..m {
        for j in 0..m {
            let v = g[(i, j)].norm();
            let slot = match (heavy[i], heavy[j]) {
                (false, false) => &mut p.max_tt,
                (true, true) => &mut p.max_dd,
                _ => &mut p.max_td,
            };
            *slot = slot.max(v);
        }
    }
    Ok(p)
}

/// Spectra of the intermediate part with heavy columns, or heavy rows, removed.
#[derive(Debug, Clone)]
pub struct MinorSpectra {
    pub col_removed: Spectrum,
    pub row_removed: Spectrum,
    pub d_r: Vec<usize>,
    pub d_c: Vec<usize>,
}

pub fn heavy_rows_and_cols(decomp: &Decomposition) -> (Vec<usize>, Vec<usize>) {
    let mask = &decomp.psi_mask;
    let d_r = (0..mask.nrows()).filter(|&i| mask.row(i).iter().any(|&b| b)).collect();
    let d_c = (0..mask.ncols())
        .filter(|&j| mask.column(j).iter().any(|&b| b))
        .collect();
    (d_r, d_c)
}

pub fn minor_spectra(decomp: &Decomposition) -> Result<MinorSpectra> {
    let (d_r, d_c) = heavy_rows_and_cols(decomp);
    let (m, n) = decomp.b_part.shape();
    if d_r.len() >= m {
        return Err(Error::Degenerate(format!("all {m} rows contain a heavy entry")));
    }
    if d_c.len() >= n {
        return Err(Error::Degenerate(format!("all {n} columns contain a heavy entry")));
    }
    let col_removed = covariance_spectrum(&decomp.b_part.clone().remove_columns_at(&d_c))?;
    let row_removed = covariance_spectrum(&decomp.b_part.clone().remove_rows_at(&d_r))?;
    Ok(MinorSpectra {
        col_removed,
        row_removed,
        d_r,
        d_c,
    })
}

/// `M x M` GOE matrix: off-diagonal variance `1/M`, diagonal variance `2/M`.
pub fn goe_matrix(m: usize, rng: &mut Rng) -> DMatrix<f64> {
    let sd = (1.0 / m as f64).sqrt();
    let mut a = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..=j {
            let x: f64 = StandardNormal.sample(rng);
            if i == j {
                a[(i, i)] = x * sd * std::f64::consts::SQRT_2;
            } else {
                a[(i, j)] = x * sd;
                a[(j, i)] = x * sd;
            }
        }
    }
    a
}

/// Smallest eigenvalue of one GOE draw.
pub fn goe_smallest_with(m: usize, rng: &mut Rng) -> Result<f64> {
    if m < 2 {
        return Err(Error::Dimension(format!("GOE size {m} < 2")));
    }
    let ev = goe_matrix(m, rng).symmetric_eigenvalues();
    Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn goe_smallest(m: usize, seed: u64) -> Result<f64> {
    goe_smallest_with(m, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heavy_tail::{build_theta, decompose, sample_matrix, DecompositionParams};
    use crate::rng::child_seed;
    use proptest::prelude::*;

    fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(m, n, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x / (n as f64).sqrt()
        })
    }

    #[test]
    fn trivial_spectra() {
        let s = covariance_spectrum(&DMatrix::zeros(3, 5)).unwrap();
        assert_eq!(s.values, vec![0.0; 3]);
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let s = covariance_spectrum(&h).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14 && (s.values[1] - 4.0).abs() < 1e-14);
        // orthonormal rows from a QR factor
        let q = random_matrix(6, 6, 3).qr().q();
        let h = q.rows(0, 4).into_owned();
        let s = covariance_spectrum(&h).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let mut bad = DMatrix::zeros(2, 3);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(covariance_spectrum(&bad), Err(Error::NonFinite { count: 1 })));
    }

    #[test]
    fn gram_and_svd_routes_agree() {
        let h = random_matrix(60, 240, 11);
        let a = covariance_spectrum(&h).unwrap();
        let b = covariance_spectrum_svd(&h).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(((x - y) / y).abs() < 1e-10);
        }
    }

    #[test]
    fn transpose_pads_zeros() {
        let h = random_matrix(7, 12, 5);
        let a = covariance_spectrum(&h).unwrap();
        let b = covariance_spectrum(&h.transpose()).unwrap();
        assert_eq!(b.values.len(), 12);
        assert!(b.values[..5].iter().all(|&v| v == 0.0));
        for (x, y) in a.values.iter().zip(&b.values[5..]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn stieltjes_values() {
        let s = Spectrum::new(vec![1.0, 4.0], 2, 4).unwrap();
        let z = Complex64::i();
        let want = 0.5 * (1.0 / (1.0 - z) + 1.0 / (4.0 - z));
        assert!((stieltjes(&s, z, 0).unwrap() - want).norm() < 1e-15);
        assert!(matches!(
            stieltjes(&s, Complex64::new(4.0, 0.0), 0),
            Err(Error::Pole { eigenvalue, .. }) if eigenvalue == 4.0
        ));
        let z = Complex64::new(0.3, 0.01);
        let h = 1e-6;
        for k in 1..4 {
            let fd = (stieltjes(&s, z + h, k - 1).unwrap() - stieltjes(&s, z - h, k - 1).unwrap()) / (2.0 * h);
            let d = stieltjes(&s, z, k).unwrap();
            assert!((fd - d).norm() <= 1e-6 * d.norm(), "k {k}");
        }
        let r = stieltjes_real(&s, 0.3, 2).unwrap();
        let c = stieltjes_derivs(&s, Complex64::new(0.3, 0.0), 2).unwrap();
        for k in 0..3 {
            assert!((r[k] - c[k].re).abs() < 1e-14 * r[k].abs());
        }
    }

    #[test]
    fn resolvent_identities() {
        let z = Complex64::new(0.4, 0.2);
        let g = resolvent_entry(&DMatrix::zeros(3, 5), z, 1, 1).unwrap();
        assert!((g + 1.0 / z).norm() < 1e-15);
        assert_eq!(resolvent_entry(&DMatrix::zeros(3, 5), z, 0, 1).unwrap().norm(), 0.0);

        let h = random_matrix(20, 50, 8);
        let spec = covariance_spectrum(&h).unwrap();
        let full = resolvent(&h, z).unwrap();
        let tr: Complex64 = (0..20).map(|i| full[(i, i)]).sum::<Complex64>() / 20.0;
        assert!((tr - stieltjes(&spec, z, 0).unwrap()).norm() < 1e-10);
        for i in 0..20 {
            let e = resolvent_entry(&h, z, i, (i * 7) % 20).unwrap();
            assert!((e - full[(i, (i * 7) % 20)]).norm() < 1e-12);
            let wald: f64 = (0..20).map(|a| full[(a, i)].norm_sqr()).sum();
            assert!((wald - full[(i, i)].im / z.im).abs() < 1e-8);
        }
        let exact = Complex64::new(spec.values[3], 0.0);
        assert!(matches!(
            resolvent_entry(&h, exact, 0, 0),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn minors_without_heavy_entries() {
        let th = build_theta(3.0, 1.0).unwrap();
        let y = sample_matrix(&th, 10, 40, 1).unwrap();
        // heavy threshold N^1 sits far above every entry
        let d = decompose(&y, &DecompositionParams::new(3.0, 0.01, -1.0), Some(&th));
        assert!(!d.psi_mask.iter().any(|&b| b));
        let ms = minor_spectra(&d).unwrap();
        let sx = covariance_spectrum(&d.x()).unwrap();
        assert_eq!(ms.col_removed.values, sx.values);
        assert_eq!(ms.row_removed.values, sx.values);
    }

    #[test]
    fn minor_bookkeeping() {
        let mut y = DMatrix::from_element(3, 6, 0.01);
        y[(1, 4)] = 5.0;
        let d = decompose(&y, &DecompositionParams::new(3.0, 0.0, 0.0), None);
        let ms = minor_spectra(&d).unwrap();
        assert_eq!(ms.d_r, vec![1]);
        assert_eq!(ms.d_c, vec![4]);
        assert_eq!((ms.col_removed.m, ms.col_removed.n), (3, 5));
        assert!((ms.col_removed.c_n() - 3.0 / 5.0).abs() < 1e-15);
        assert_eq!(ms.row_removed.values.len(), 2);
        let all = decompose(
            &DMatrix::from_element(2, 4, 9.0),
            &DecompositionParams::new(3.0, 0.0, 0.0),
            None,
        );
        assert!(matches!(minor_spectra(&all), Err(Error::Degenerate(_))));
    }

    #[test]
    fn goe_reference_statistics() {
        let m = 400;
        let scale = (m as f64).powf(2.0 / 3.0);
        let (mut bottoms, mut tops) = (Vec::new(), Vec::new());
        for i in 0..500 {
            let mut rng = rng_from_seed(child_seed(77, i));
            let ev = goe_matrix(m, &mut rng).symmetric_eigenvalues();
            bottoms.push(ev.min());
            tops.push(ev.max());
        }
        assert_eq!(bottoms[3], goe_smallest(m, child_seed(77, 3)).unwrap());
        let stats: Vec<f64> = bottoms.iter().map(|mu| scale * (mu + 2.0)).collect();
        let mean = stats.iter().sum::<f64>() / stats.len() as f64;
        assert!((mean - 1.21).abs() <= 0.15, "mean {mean}");
        let bound = -2.0 - 5.0 * scale.recip() * 4.0;
        assert!(bottoms.iter().filter(|&&mu| mu < bound).count() <= 5);
        // sign symmetry: the mirrored largest eigenvalue has the same law
        let top_mean = tops.iter().map(|mu| scale * (2.0 - mu)).sum::<f64>() / tops.len() as f64;
        assert!((top_mean - mean).abs() < 0.2, "{top_mean} vs {mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn interlacing_on_samples(seed in 0u64..10_000) {
            let th = build_theta(2.6, 1.0).unwrap();
            let y = sample_matrix(&th, 15, 45, seed).unwrap();
            let d = decompose(&y, &DecompositionParams::new(2.6, 0.05, 0.05), Some(&th));
            let sx = covariance_spectrum(&d.x()).unwrap();
            if let Ok(ms) = minor_spectra(&d) {
                prop_assert!(ms.col_removed.smallest() <= sx.smallest() + 1e-9);
                prop_assert!(sx.smallest() <= ms.row_removed.smallest() + 1e-9);
            }
        }

        #[test]
        fn herglotz_empirical(seed in 0u64..1000, x in -1.0f64..4.0, y in 1e-6f64..2.0) {
            let h = random_matrix(8, 20, seed);
            let s = covariance_spectrum(&h).unwrap();
            prop_assert!(stieltjes(&s, Complex64::new(x, y), 0).unwrap().im > 0.0);
        }
    }
}
