use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::{Arm, ExperimentConfig};
use crate::harness::diagnostics::{rigidity_check, RigidityReport};
use crate::harness::ensemble::{ReplicateRecord, RunContext, MIN_GOOD_PSI_RATE};
use crate::harness::stats::{ks_two_sample, standardized_normal_report, ComparisonReport};
use crate::theory::{sigma_alpha, theory_constants, TheoryConstants};

/// KS thresholds against the GOE reference.
pub const KS_GDM: f64 = 0.10;
pub const KS_HEAVY: f64 = 0.12;
/// KS threshold of the standardized edge against the standard normal.
pub const KS_NORMAL: f64 = 0.15;
pub const STD_RATIO_RANGE: (f64, f64) = (0.7, 1.3);
pub const RIGIDITY_GDM: f64 = 0.95;
pub const RIGIDITY_HEAVY: f64 = 0.90;
/// Below this index the Gaussian edge fluctuation dominates.
pub const CRITICAL_ALPHA: f64 = 8.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecksSummary {
    pub checked: usize,
    pub reconstruction_exact: usize,
    pub interlacing_true: usize,
    pub interlacing_skipped: usize,
    pub herglotz: usize,
    pub max_solver_residual: f64,
    pub max_edge_residual: f64,
    pub all_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub arm: Arm,
    pub t: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub admissible_range: bool,
    pub replicates: usize,
    pub succeeded: usize,
    pub failures: Vec<FailureNote>,
    pub good_psi_rate: f64,
    pub theory: TheoryConstants,
    pub reports: BTreeMap<String, ComparisonReport>,
    pub rigidity: RigidityReport,
    pub checks: Option<ChecksSummary>,
    pub verdicts: BTreeMap<String, bool>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

fn summarize_checks(ok: &[&ReplicateRecord]) -> Option<ChecksSummary> {
    let checks: Vec<_> = ok.iter().filter_map(|r| r.checks.as_ref()).collect();
    if checks.is_empty() {
        return None;
    }
    Some(ChecksSummary {
        checked: checks.len(),
        reconstruction_exact: checks.iter().filter(|c| c.reconstruction_exact).count(),
        interlacing_true: checks.iter().filter(|c| c.interlacing == Some(true)).count(),
        interlacing_skipped: checks.iter().filter(|c| c.interlacing.is_none()).count(),
        herglotz: checks.iter().filter(|c| c.herglotz).count(),
        max_solver_residual: checks.iter().fold(0.0f64, |m, c| m.max(c.solver_residual)),
        max_edge_residual: checks.iter().fold(0.0f64, |m, c| m.max(c.edge_residual)),
        all_hold: checks.iter().all(|c| c.all_hold()),
    })
}

/// Comparison reports, rigidity and verdicts for one arm.
///
/// `reference` is the GOE sample `M^{2/3} (mu_M + 2)`; without it the
/// Tracy-Widom comparisons are left out.
pub fn summarize(
    cfg: &ExperimentConfig,
    arm: Arm,
    records: &[ReplicateRecord],
    reference: Option<&[f64]>,
) -> Result<Summary> {
    let ctx = RunContext::new(cfg)?;
    let inputs = ctx.theory_inputs()?;
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let good: Vec<&ReplicateRecord> = ok.iter().copied().filter(|r| r.good_psi).collect();
    let good_psi_rate = good.len() as f64 / ok.len().max(1) as f64;
    let mut reports = BTreeMap::new();
    let mut verdicts = BTreeMap::new();
    verdicts.insert("good_psi_rate".to_string(), good_psi_rate >= MIN_GOOD_PSI_RATE);

    if let (Some(goe), false) = (reference, good.is_empty()) {
        let tw: Vec<f64> = good.iter().map(|r| r.tw_stat).collect();
        let ks = if arm == Arm::Heavy { KS_HEAVY } else { KS_GDM };
        let rep = ks_two_sample(&tw, goe)?.with_threshold(ks);
        verdicts.insert("tw_vs_goe".to_string(), rep.verdict == Some(true));
        reports.insert("tw_vs_goe".to_string(), rep);
        let shifted: Vec<f64> = good.iter().map(|r| r.tw_stat_shift).collect();
        reports.insert("tw_shift_vs_goe".to_string(), ks_two_sample(&shifted, goe)?);
    }

    if good.len() >= 2 && arm != Arm::PureNoise {
        let scale = (cfg.n as f64).powf(cfg.alpha / 4.0);
        let edge: Vec<f64> = good.iter().map(|r| r.edge_fluct * scale).collect();
        let mut rep = standardized_normal_report(&edge, sigma_alpha(&inputs))?;
        if cfg.alpha < CRITICAL_ALPHA {
            rep = rep.with_threshold(KS_NORMAL);
            let (lo, hi) = STD_RATIO_RANGE;
            verdicts.insert("edge_normality".to_string(), rep.verdict == Some(true));
            verdicts.insert("edge_std_ratio".to_string(), rep.std_ratio >= lo && rep.std_ratio <= hi);
        }
        reports.insert("edge_normality".to_string(), rep);
    }

    let rigidity = rigidity_check(records, cfg.n);
    match arm {
        Arm::Gdm => verdicts.insert("rigidity".to_string(), rigidity.fraction >= RIGIDITY_GDM),
        Arm::Heavy => verdicts.insert("rigidity".to_string(), rigidity.fraction >= RIGIDITY_HEAVY),
        Arm::PureNoise => None,
    };

    let checks = summarize_checks(&ok);
    if let Some(c) = &checks {
        verdicts.insert("structural_checks".to_string(), c.all_hold);
    }

    Ok(Summary {
        config: cfg.clone(),
        arm,
        t: ctx.t,
        eps_a: ctx.params.eps_a,
        eps_b: ctx.params.eps_b,
        admissible_range: ctx.params.admissible_range,
        replicates: records.len(),
        succeeded: ok.len(),
        failures: records
            .iter()
            .filter_map(|r| {
                r.failure.as_ref().map(|reason| FailureNote {
                    index: r.index,
                    seed: r.seed,
                    reason: reason.clone(),
                })
            })
            .collect(),
        good_psi_rate,
        theory: theory_constants(&inputs),
        reports,
        rigidity,
        checks,
        verdicts,
    })
}
