use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{Arm, ExperimentConfig};
use crate::harness::diagnostics::{interlacing_bounds, regularity_check, rigidity_check, RigidityReport};
use crate::harness::ensemble::RunContext;
use crate::harness::export::{records_from_csv, CsvRecord};
use crate::heavy_tail::{decompose, sample_matrix_with, Decomposition};
use crate::rng::rng_from_seed;
use crate::spectral::{covariance_spectrum, Spectrum};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Defaults to `N^{-eps_b}`.
    pub eta_star: Option<f64>,
    pub window: f64,
    /// Directory of `<seed>.txt` spectra of `S(X)`; missing files are regenerated from the seed.
    pub spectra_dir: Option<PathBuf>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eta_star: None,
            window: 0.1,
            spectra_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub records: usize,
    pub rigidity: RigidityReport,
    pub eta_star: f64,
    pub window: f64,
    pub regularity_checked: usize,
    pub regularity_true: usize,
    pub interlacing_checked: usize,
    pub interlacing_true: usize,
    pub interlacing_skipped: usize,
    /// Replicates whose regenerated `lambda_M(S(X))` equals the recorded value bit for bit.
    pub reproduced: usize,
}

/// Redraws the heavy-tailed matrix of a replicate from its seed and splits it.
pub fn regenerate(ctx: &RunContext, seed: u64) -> Result<Decomposition> {
    let mut rng = rng_from_seed(seed);
    let y = sample_matrix_with(&ctx.theta, ctx.cfg.m, ctx.cfg.n, &mut rng)?;
    Ok(decompose(&y, &ctx.params, Some(&ctx.theta)))
}

/// Whitespace-separated eigenvalues.
pub fn read_spectrum(path: &Path, m: usize, n: usize) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != m {
        return Err(Error::Dimension(format!(
            "{} holds {} values, expected M = {m}",
            path.display(),
            values.len()
        )));
    }
    Spectrum::new(values, m, n)
}

/// Regularity, rigidity and interlacing for the rows of an existing `records.csv`.
pub fn check_records(cfg: &ExperimentConfig, rows: &[CsvRecord], opts: &CheckOptions) -> Result<CheckReport> {
    let ctx = RunContext::new(cfg)?;
    let records = records_from_csv(rows, ctx.lambda_shift, cfg.m);
    let eta_star = opts.eta_star.unwrap_or((cfg.n as f64).powf(-ctx.params.eps_b));
    let mut rep = CheckReport {
        records: rows.len(),
        rigidity: rigidity_check(&records, cfg.n),
        eta_star,
        window: opts.window,
        regularity_checked: 0,
        regularity_true: 0,
        interlacing_checked: 0,
        interlacing_true: 0,
        interlacing_skipped: 0,
        reproduced: 0,
    };
    if cfg.arm == Arm::PureNoise {
        return Ok(rep);
    }
    for row in rows {
        let d = regenerate(&ctx, row.seed)?;
        let stored = opts
            .spectra_dir
            .as_ref()
            .map(|dir| dir.join(format!("{}.txt", row.seed)))
            .filter(|p| p.exists());
        let spec = match stored {
            Some(p) => read_spectrum(&p, cfg.m, cfg.n)?,
            None => covariance_spectrum(&d.x())?,
        };
        if spec.smallest().to_bits() == row.lambda_m_x.to_bits() {
            rep.reproduced += 1;
        }
        if row.good_psi {
            rep.regularity_checked += 1;
            if regularity_check(&spec, eta_star, opts.window)?.verdict {
                rep.regularity_true += 1;
            }
        }
        match interlacing_bounds(&d, spec.smallest()) {
            Ok(b) => {
                rep.interlacing_checked += 1;
                if b.holds {
                    rep.interlacing_true += 1;
                }
            }
            Err(Error::Degenerate(_)) => rep.interlacing_skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}
