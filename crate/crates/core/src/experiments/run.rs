use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::generators::{self, EnsembleSpec};
use crate::linalg;
use crate::rng::{derive_seed, Purpose};
use crate::schedule::{
    asymptote_large_k, asymptote_small_sigma, bound_f, needell_horizon, ScheduleParams,
};
use crate::solver::{self, Problem, RatePolicy, SolveTrace};
use crate::Error;

/// Per-`k` statistics of one policy across trials, with reference columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCurve {
    pub label: String,
    pub k: Vec<usize>,
    /// Rate the policy applies at step `k`; `None` past an explicit list.
    pub alpha: Vec<Option<f64>>,
    /// `σ²β_k` of the reference schedule.
    pub beta_sigma2: Vec<f64>,
    /// `f(k)`; `None` when `σ = 0`.
    pub f_k: Vec<Option<f64>>,
    /// `σ²/η`, the unit-rate horizon with `δ = σ`.
    pub needell: f64,
    pub mse_mean: Vec<f64>,
    pub mse_median: Vec<f64>,
    pub mse_p10: Vec<f64>,
    pub mse_p90: Vec<f64>,
    /// Median over trials of `||x_k - x|| / ||x||`.
    pub relerr_median: Vec<f64>,
    /// `e^{-ηk} σ²β0`.
    pub asymptote_small_sigma: Vec<f64>,
    /// `σ²/(η²k)`; `None` at `k = 0`.
    pub asymptote_large_k: Vec<Option<f64>>,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub eta: f64,
    pub schedule: ScheduleParams,
    /// `||x||²` of each trial's ground truth.
    pub x_norm2: Vec<f64>,
    pub curves: Vec<AggregateCurve>,
}

impl ExperimentResult {
    pub fn curve(&self, label: &str) -> Option<&AggregateCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// Trial `trial`'s problem: matrix, signal and noise from seeds derived
/// from `master_seed`.
pub fn trial_problem(cfg: &ExperimentConfig, trial: u64) -> Result<Problem, Error> {
    let seed = cfg.master_seed;
    let spec = EnsembleSpec {
        seed: derive_seed(seed, trial, Purpose::Matrix),
        ..cfg.ensemble.clone()
    };
    let a = generators::gen_matrix(&spec)?;
    let x = generators::gen_signal(spec.n, derive_seed(seed, trial, Purpose::Signal));
    Ok(generators::make_problem_with_noise(
        a,
        x,
        spec.sigma,
        derive_seed(seed, trial, Purpose::Noise),
        cfg.noise,
    )?)
}

/// Solves trial `trial` under every policy, with the same row sequence
/// seed for all of them.
pub fn run_trial(
    cfg: &ExperimentConfig,
    policies: &[RatePolicy],
    trial: u64,
) -> Result<(Problem, Vec<SolveTrace>), Error> {
    let p = trial_problem(cfg, trial)?;
    let sampler_seed = derive_seed(cfg.master_seed, trial, Purpose::Sampler);
    let traces = policies
        .iter()
        .map(|pol| solver::solve(&p, pol, cfg.sampler, sampler_seed, cfg.k_max()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((p, traces))
}

struct TrialCurves {
    x_norm2: f64,
    sq_err: Vec<Vec<f64>>,
}

fn trial_curves(
    cfg: &ExperimentConfig,
    policies: &[RatePolicy],
    trial: u64,
) -> Result<TrialCurves, Error> {
    let (p, traces) = run_trial(cfg, policies, trial)?;
    let x = p
        .x_true
        .as_ref()
        .ok_or(solver::SolverError::MissingGroundTruth)?;
    let sq_err = traces
        .iter()
        .map(|t| {
            t.sq_error_curve()
                .ok_or(solver::SolverError::MissingGroundTruth)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialCurves {
        x_norm2: linalg::norm2(x),
        sq_err,
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn aggregate(
    label: String,
    policy: &RatePolicy,
    schedule: &ScheduleParams,
    trials: &[TrialCurves],
    index: usize,
) -> AggregateCurve {
    let len = trials[0].sq_err[index].len();
    let bp = schedule.bound_params();
    let mut alpha: Vec<Option<f64>> = policy.rates().take(len).map(Some).collect();
    alpha.resize(len, None);
    let mut c = AggregateCurve {
        label,
        k: (0..len).collect(),
        alpha,
        beta_sigma2: schedule
            .iter()
            .take(len)
            .map(|s| s.error_bound(schedule))
            .collect(),
        f_k: (0..len).map(|k| bound_f(k as f64, &bp).ok()).collect(),
        needell: needell_horizon(schedule.sigma2.sqrt(), schedule.eta),
        mse_mean: Vec::with_capacity(len),
        mse_median: Vec::with_capacity(len),
        mse_p10: Vec::with_capacity(len),
        mse_p90: Vec::with_capacity(len),
        relerr_median: Vec::with_capacity(len),
        asymptote_small_sigma: (0..len)
            .map(|k| asymptote_small_sigma(k as f64, schedule.eta, bp.x0_err2))
            .collect(),
        asymptote_large_k: (0..len)
            .map(|k| (k > 0).then(|| asymptote_large_k(k as f64, schedule.eta, schedule.sigma2)))
            .collect(),
    };
    let mut col = Vec::with_capacity(trials.len());
    let mut rel = Vec::with_capacity(trials.len());
    for k in 0..len {
        col.clear();
        rel.clear();
        for t in trials {
            let e = t.sq_err[index][k];
            col.push(e);
            rel.push((e / t.x_norm2).sqrt());
        }
        c.mse_mean.push(col.iter().sum::<f64>() / col.len() as f64);
        col.sort_by(f64::total_cmp);
        rel.sort_by(f64::total_cmp);
        c.mse_median.push(quantile(&col, 0.5));
        c.mse_p10.push(quantile(&col, 0.1));
        c.mse_p90.push(quantile(&col, 0.9));
        c.relerr_median.push(quantile(&rel, 0.5));
    }
    c
}

fn collect(cfg: &ExperimentConfig, trials: Vec<TrialCurves>) -> Result<ExperimentResult, Error> {
    let schedule = cfg.schedule_params()?;
    let policies = cfg.rate_policies()?;
    let curves = policies
        .iter()
        .enumerate()
        .map(|(i, pol)| aggregate(pol.label(), pol, &schedule, &trials, i))
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        eta: cfg.eta(),
        schedule,
        x_norm2: trials.iter().map(|t| t.x_norm2).collect(),
        curves,
    })
}

/// Runs every trial on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, Error> {
    cfg.validate()?;
    let policies = cfg.rate_policies()?;
    let trials = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| trial_curves(cfg, &policies, t))
        .collect::<Result<Vec<_>, _>>()?;
    collect(cfg, trials)
}

/// As [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentResult, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Single-seed run of trial 0 under every policy, for figure-faithful
/// per-step output.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<(Problem, Vec<(String, SolveTrace)>), Error> {
    cfg.validate()?;
    let policies = cfg.rate_policies()?;
    let (p, traces) = run_trial(cfg, &policies, 0)?;
    let labelled = policies.iter().map(|p| p.label()).zip(traces).collect();
    Ok((p, labelled))
}
