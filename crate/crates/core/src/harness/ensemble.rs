use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_conv::{find_left_edge, solve_subordination, subordination_residuals};
use crate::harness::config::{Arm, ExperimentConfig};
use crate::harness::diagnostics::interlacing_bounds;
use crate::heavy_tail::{decompose, gaussian_time, sample_matrix_with, DecompositionParams, ThetaSpec};
use crate::rng::{child_seed, rng_from_seed, Rng};
use crate::spectral::{covariance_spectrum, goe_smallest, Spectrum};
use crate::theory::{lambda_shift, TheoryInputs};

/// Largest tolerated share of replicates whose edge solve failed.
pub const MAX_FAILURE_RATE: f64 = 0.10;
/// Below this share of good heavy-entry patterns the sampler is presumed broken.
pub const MIN_GOOD_PSI_RATE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateChecks {
    /// `A + B + C == Y` entry by entry, bit for bit.
    pub reconstruction_exact: bool,
    pub interlacing: Option<bool>,
    pub interlacing_skip: Option<String>,
    /// `Im m_t >= 0` and `Im zeta_t >= 0` at a point above the edge.
    pub herglotz: bool,
    pub solver_residual: f64,
    pub edge_residual: f64,
}

impl ReplicateChecks {
    pub fn all_hold(&self) -> bool {
        self.reconstruction_exact
            && self.interlacing != Some(false)
            && self.herglotz
            && self.solver_residual <= 1e-6
            && self.edge_residual <= 1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub good_psi: bool,
    pub t: f64,
    /// Smallest eigenvalue of `S(Y)`, or of `S(V_t)` on the Gaussian arms.
    pub lambda_m_y: f64,
    pub lambda_m_x: f64,
    pub zeta_minus: f64,
    pub lambda_minus_t: f64,
    pub gamma_n: f64,
    /// `gamma_N M^{2/3} (lambda_M - lambda_{-,t})`.
    pub tw_stat: f64,
    /// The random edge `lambda_{-,t}` itself.
    pub edge_fluct: f64,
    /// `gamma_N M^{2/3} (lambda_M - lambda_shift)`, the deterministic centering.
    pub tw_stat_shift: f64,
    pub failure: Option<String>,
    pub checks: Option<ReplicateChecks>,
}

impl ReplicateRecord {
    pub fn failed(index: usize, seed: u64, reason: String) -> Self {
        ReplicateRecord {
            index,
            seed,
            good_psi: false,
            t: f64::NAN,
            lambda_m_y: f64::NAN,
            lambda_m_x: f64::NAN,
            zeta_minus: f64::NAN,
            lambda_minus_t: f64::NAN,
            gamma_n: f64::NAN,
            tw_stat: f64::NAN,
            edge_fluct: f64::NAN,
            tw_stat_shift: f64::NAN,
            failure: Some(reason),
            checks: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Quantities shared by every replicate of a run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub theta: ThetaSpec,
    pub params: DecompositionParams,
    /// `t` implied by the thresholds (identical for every replicate).
    pub t: f64,
    pub lambda_shift: f64,
}

impl RunContext {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let theta = cfg.theta()?;
        let params = cfg.decomposition_params(&theta)?;
        let t = gaussian_time(&theta, cfg.n, params.eps_a);
        let inputs = TheoryInputs::new(cfg.alpha, cfg.c_n, theta.c_const, cfg.n as f64, t)?;
        Ok(RunContext {
            cfg: cfg.clone(),
            theta,
            params,
            t,
            lambda_shift: lambda_shift(&inputs),
        })
    }

    pub fn theory_inputs(&self) -> Result<TheoryInputs> {
        TheoryInputs::new(
            self.cfg.alpha,
            self.cfg.c_n,
            self.theta.c_const,
            self.cfg.n as f64,
            self.t,
        )
    }
}

/// `M x N` matrix of i.i.d. `N(0, 1/N)` entries, filled column by column.
pub fn gaussian_matrix(m: usize, n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let sd = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(m, n, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        g * sd
    })
}

fn replicate(ctx: &RunContext, arm: Arm, index: usize, seed: u64) -> Result<ReplicateRecord> {
    let cfg = &ctx.cfg;
    let (m, n) = (cfg.m, cfg.n);
    let mut rng = rng_from_seed(seed);
    let mut checks = None;
    let (spec_x, lambda_m_y, good_psi, t) = match arm {
        Arm::PureNoise => {
            let v = gaussian_matrix(m, n, &mut rng) * ctx.t.sqrt();
            let zero = Spectrum::new(vec![0.0; m], m, n)?;
            (zero, covariance_spectrum(&v)?.smallest(), true, ctx.t)
        }
        Arm::Heavy | Arm::Gdm => {
            let y = sample_matrix_with(&ctx.theta, m, n, &mut rng)?;
            let d = decompose(&y, &ctx.params, Some(&ctx.theta));
            let x = d.x();
            let spec_x = covariance_spectrum(&x)?;
            let lm_y = if arm == Arm::Heavy {
                covariance_spectrum(&y)?.smallest()
            } else {
                let v = x + gaussian_matrix(m, n, &mut rng) * d.t.sqrt();
                covariance_spectrum(&v)?.smallest()
            };
            if cfg.diagnostics {
                let reconstruction_exact = (&d.a_part + &d.b_part + &d.c_part) == d.y;
                let (interlacing, interlacing_skip) = match interlacing_bounds(&d, spec_x.smallest()) {
                    Ok(b) => (Some(b.holds), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                checks = Some(ReplicateChecks {
                    reconstruction_exact,
                    interlacing,
                    interlacing_skip,
                    herglotz: true,
                    solver_residual: 0.0,
                    edge_residual: 0.0,
                });
            }
            (spec_x, lm_y, d.goodness().good, d.t)
        }
    };
    let edge = find_left_edge(&spec_x, t)?;
    if cfg.diagnostics {
        let z = Complex64::new(edge.lambda_minus_t, 1e-2);
        let state = solve_subordination(&spec_x, t, z)?;
        let (r1, r2) = subordination_residuals(&spec_x, t, &edge)?;
        let c = checks.get_or_insert(ReplicateChecks {
            reconstruction_exact: true,
            interlacing: None,
            interlacing_skip: Some("no decomposition on this arm".into()),
            herglotz: true,
            solver_residual: 0.0,
            edge_residual: 0.0,
        });
        c.herglotz = state.m_t.im >= 0.0 && state.zeta_t.im >= 0.0;
        c.solver_residual = state.residual;
        c.edge_residual = r1.abs().max(r2.abs());
    }
    let scale = edge.gamma_n * (m as f64).powf(2.0 / 3.0);
    Ok(ReplicateRecord {
        index,
        seed,
        good_psi,
        t,
        lambda_m_y,
        lambda_m_x: spec_x.smallest(),
        zeta_minus: edge.zeta_minus,
        lambda_minus_t: edge.lambda_minus_t,
        gamma_n: edge.gamma_n,
        tw_stat: scale * (lambda_m_y - edge.lambda_minus_t),
        edge_fluct: edge.lambda_minus_t,
        tw_stat_shift: scale * (lambda_m_y - ctx.lambda_shift),
        failure: None,
        checks,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Run(format!("cannot start {workers} workers: {e}")))
}

/// Runs every replicate of `cfg` on the given arm.
///
/// Replicate `i` draws from `child_seed(master_seed, i)` and lands in slot `i`
/// of the output, so the result does not depend on the worker count.
pub fn run_arm(cfg: &ExperimentConfig, arm: Arm) -> Result<Vec<ReplicateRecord>> {
    let ctx = RunContext::new(cfg)?;
    let records: Vec<ReplicateRecord> = pool(cfg.workers)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| {
                let seed = child_seed(cfg.master_seed, i as u64);
                replicate(&ctx, arm, i, seed).unwrap_or_else(|e| ReplicateRecord::failed(i, seed, e.to_string()))
            })
            .collect()
    });
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed as f64 > MAX_FAILURE_RATE * records.len() as f64 {
        let first = records.iter().find_map(|r| r.failure.clone()).unwrap_or_default();
        return Err(Error::Run(format!(
            "{failed} of {} replicates failed (first: {first})",
            records.len()
        )));
    }
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let good = ok.iter().filter(|r| r.good_psi).count();
    if !ok.is_empty() && (good as f64) < MIN_GOOD_PSI_RATE * ok.len() as f64 {
        return Err(Error::Run(format!(
            "only {good} of {} replicates have a good heavy-entry pattern; the sampler is likely wrong",
            ok.len()
        )));
    }
    Ok(records)
}

/// The arm named in the config.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<Vec<ReplicateRecord>> {
    run_arm(cfg, cfg.arm)
}

/// Smallest eigenvalue of `S(Y)` for heavy-tailed `Y`.
pub fn run_edge_ensemble(cfg: &ExperimentConfig) -> Result<Vec<ReplicateRecord>> {
    run_arm(cfg, Arm::Heavy)
}

/// Smallest eigenvalue of `S(X + sqrt(t) W)`.
pub fn run_gdm_ensemble(cfg: &ExperimentConfig) -> Result<Vec<ReplicateRecord>> {
    run_arm(cfg, Arm::Gdm)
}

/// Reference sample `M^{2/3} (mu_M + 2)` from GOE smallest eigenvalues.
pub fn goe_reference(m: usize, draws: usize, seed: u64, workers: usize) -> Result<Vec<f64>> {
    let scale = (m as f64).powf(2.0 / 3.0);
    pool(workers.max(1))?.install(|| {
        (0..draws)
            .into_par_iter()
            .map(|i| goe_smallest(m, child_seed(seed, i as u64)).map(|mu| scale * (mu + 2.0)))
            .collect()
    })
}
