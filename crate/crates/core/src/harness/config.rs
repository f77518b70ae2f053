use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_tail::{build_theta, DecompositionParams, ThetaSpec};

/// How the decomposition thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `eps_a`, `eps_b` given (or defaulted inside the admissible ranges).
    PaperEps,
    /// `eps_a` solved from a target Gaussian time; `eps_b` is the heavy threshold.
    DirectT,
}

/// Which matrix provides the smallest eigenvalue of a replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// `Y` itself.
    #[default]
    Heavy,
    /// `V_t = X + sqrt(t) W`.
    Gdm,
    /// `V_t = sqrt(t) W`, i.e. `X = 0`.
    PureNoise,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub s0: f64,
    #[serde(rename = "c_N")]
    pub c_n: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_target: Option<f64>,
    #[serde(default)]
    pub arm: Arm,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// Run the per-replicate structural checks (reconstruction, interlacing,
    /// solver invariants). Costs two extra eigen-decompositions per replicate.
    #[serde(default)]
    pub diagnostics: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 2.0 && self.alpha < 4.0) {
            return bad(format!("alpha = {} outside (2, 4)", self.alpha));
        }
        if self.m == 0 || self.m >= self.n {
            return bad(format!("need 1 <= M < N, got M = {}, N = {}", self.m, self.n));
        }
        let ratio = self.m as f64 / self.n as f64;
        if (self.c_n - ratio).abs() > 1e-12 {
            return bad(format!("c_N = {} does not equal M/N = {ratio}", self.c_n));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        match self.mode {
            Mode::PaperEps => {
                if self.t_target.is_some() {
                    return bad("t_target is not allowed in paper-eps mode".into());
                }
                for (name, v) in [("eps_a", self.eps_a), ("eps_b", self.eps_b)] {
                    if let Some(v) = v {
                        if !(v > 0.0 && v.is_finite()) {
                            return bad(format!("{name} = {v} must be positive"));
                        }
                    }
                }
            }
            Mode::DirectT => {
                if self.eps_a.is_some() {
                    return bad("eps_a is not allowed in direct-t mode (it is solved from t_target)".into());
                }
                match self.t_target {
                    Some(t) if t > 0.0 && t < 1.0 => {}
                    Some(t) => return bad(format!("t_target = {t} outside (0, 1)")),
                    None => return bad("direct-t mode needs t_target".into()),
                }
                if let Some(b) = self.eps_b {
                    if !(b > 0.0 && b.is_finite()) {
                        return bad(format!("eps_b = {b} must be positive"));
                    }
                }
            }
        }
        self.theta().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn theta(&self) -> Result<ThetaSpec> {
        build_theta(self.alpha, self.s0)
    }

    pub fn decomposition_params(&self, spec: &ThetaSpec) -> Result<DecompositionParams> {
        let default = DecompositionParams::default_for(self.alpha);
        let eps_b = self.eps_b.unwrap_or(default.eps_b);
        match self.mode {
            Mode::PaperEps => Ok(DecompositionParams::new(
                self.alpha,
                self.eps_a.unwrap_or(default.eps_a),
                eps_b,
            )),
            Mode::DirectT => {
                let t = self
                    .t_target
                    .ok_or_else(|| Error::Config("direct-t mode needs t_target".into()))?;
                DecompositionParams::for_target_t(spec, self.n, t, eps_b)
            }
        }
    }
}
