use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::generators::{EnsembleKind, EnsembleSpec, NoiseKind};
use crate::sampler::SamplerKind;
use crate::schedule::ScheduleParams;
use crate::solver::RatePolicy;
use crate::Error;

/// How `β0` is chosen for the scheduled policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beta0Mode {
    /// `β0 = n/σ²`, i.e. `||x - x0||² ≈ n` for a standard normal signal.
    #[default]
    HeuristicN,
    Explicit(f64),
}

/// A rate policy as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Scheduled,
    Constant { mu: f64 },
    Explicit { alphas: Vec<f64> },
}

impl PolicySpec {
    pub fn resolve(&self, schedule: ScheduleParams) -> RatePolicy {
        match self {
            PolicySpec::Scheduled => RatePolicy::ScheduledOptimal(schedule),
            PolicySpec::Constant { mu } => RatePolicy::Constant(*mu),
            PolicySpec::Explicit { alphas } => RatePolicy::Explicit(alphas.clone()),
        }
    }
}

fn default_policies() -> Vec<PolicySpec> {
    vec![PolicySpec::Scheduled, PolicySpec::Constant { mu: 1.0 }]
}

fn default_trials() -> usize {
    20
}

/// A multi-trial experiment. Every field except `ensemble` has a default.
///
/// `ensemble.seed` is ignored: per-trial matrix, signal, noise and sampler
/// seeds are all derived from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    /// Defaults to `1/n`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub beta0: Beta0Mode,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to `m`.
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleSpec) -> Self {
        Self {
            ensemble,
            eta: None,
            beta0: Beta0Mode::HeuristicN,
            policies: default_policies(),
            trials: default_trials(),
            k_max: None,
            master_seed: 0,
            sampler: SamplerKind::Weighted,
            noise: NoiseKind::Normal,
            output: None,
        }
    }

    /// `m = 2000, n = 100, s = 10, σ = 0.05, η = 1/n`, scheduled and unit
    /// rates, 20 trials.
    pub fn example1() -> Self {
        Self::new(EnsembleSpec::example1(0))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.ensemble.n as f64)
    }

    pub fn k_max(&self) -> usize {
        self.k_max.unwrap_or(self.ensemble.m)
    }

    pub fn sigma2(&self) -> f64 {
        self.ensemble.sigma * self.ensemble.sigma
    }

    /// Schedule parameters shared by the scheduled policy and the
    /// reference columns.
    pub fn schedule_params(&self) -> Result<ScheduleParams, Error> {
        let sigma2 = self.sigma2();
        let p = match self.beta0 {
            Beta0Mode::HeuristicN => {
                ScheduleParams::from_error(self.eta(), sigma2, self.ensemble.n as f64)
            }
            Beta0Mode::Explicit(b) => ScheduleParams::new(self.eta(), sigma2, b),
        };
        p.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn rate_policies(&self) -> Result<Vec<RatePolicy>, Error> {
        let sp = self.schedule_params()?;
        Ok(self.policies.iter().map(|p| p.resolve(sp)).collect())
    }

    pub fn validate(&self) -> Result<(), Error> {
        let cfg = |m: String| Err(Error::Config(m));
        self.ensemble
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.ensemble.kind == EnsembleKind::SparseSphere && self.ensemble.s.is_none() {
            return cfg("ensemble.s is required for sparse-sphere".into());
        }
        if self.trials < 1 {
            return cfg("trials must be at least 1".into());
        }
        if self.k_max() > self.ensemble.m {
            return cfg(format!(
                "k_max = {} exceeds m = {} (rows are drawn without replacement)",
                self.k_max(),
                self.ensemble.m
            ));
        }
        if self.policies.is_empty() {
            return cfg("at least one policy is required".into());
        }
        let mut labels = HashSet::new();
        for p in self.rate_policies()? {
            p.validate(self.k_max())
                .map_err(|e| Error::Config(format!("policy {}: {e}", p.label())))?;
            if !labels.insert(p.label()) {
                return cfg(format!("policy {} listed twice", p.label()));
            }
        }
        Ok(())
    }
}
