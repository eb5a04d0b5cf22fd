use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{AggregateCurve, ExperimentResult};
use crate::schedule::{bound_f, continuous_alpha, ScheduleParams};
use crate::solver::SolveTrace;
use crate::Error;

pub const CURVE_HEADER: &str =
    "k,alpha,beta_sigma2,f_k,needell,mse_mean,mse_median,mse_p10,mse_p90,relerr_median";
pub const SCHEDULE_HEADER: &str = "k,alpha_k,beta_k,sigma2_beta_k,f_k,alpha_continuous_t";
pub const TRACE_HEADER: &str = "k,row,alpha,residual,sq_error,relerr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `{:?}` formatting, which round-trips `f64` exactly.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn curve_csv(c: &AggregateCurve) -> String {
    let mut out = String::with_capacity(64 * (c.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for i in 0..c.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.k[i],
            opt(c.alpha[i]),
            num(c.beta_sigma2[i]),
            opt(c.f_k[i]),
            num(c.needell),
            num(c.mse_mean[i]),
            num(c.mse_median[i]),
            num(c.mse_p10[i]),
            num(c.mse_p90[i]),
            num(c.relerr_median[i]),
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(path.to_path_buf())
}

/// Writes `<label>.csv` per policy, or a single `experiment.json`.
pub fn write_experiment(
    r: &ExperimentResult,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, Error> {
    match format {
        OutputFormat::Csv => r
            .curves
            .iter()
            .map(|c| write_file(&dir.join(format!("{}.csv", c.label)), &curve_csv(c)))
            .collect(),
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(r)?;
            Ok(vec![write_file(&dir.join("experiment.json"), &text)?])
        }
    }
}

/// Per-step trace; `relerr` needs `x_norm2`.
pub fn trace_csv(t: &SolveTrace, x_norm2: Option<f64>) -> String {
    let rel = |e: Option<f64>| match (e, x_norm2) {
        (Some(e), Some(x)) if x > 0.0 => Some((e / x).sqrt()),
        _ => None,
    };
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "0,,,,{},{}",
        opt(t.initial_sq_error),
        opt(rel(t.initial_sq_error))
    );
    for s in &t.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.k + 1,
            s.row,
            num(s.alpha),
            num(s.residual),
            opt(s.sq_error),
            opt(rel(s.sq_error)),
        );
    }
    out
}

/// Schedule table at `k = 0, stride, 2·stride, …` up to and including
/// `k_max`, with the continuous rate `α(t)` evaluated at `t = k`.
pub fn emit_schedule_table(
    params: &ScheduleParams,
    k_max: u64,
    stride: u64,
) -> Result<String, Error> {
    params.validate()?;
    let stride = stride.max(1);
    let bp = params.bound_params();
    let mut out = String::new();
    out.push_str(SCHEDULE_HEADER);
    out.push('\n');
    for s in params.iter().take_while(|s| s.k <= k_max) {
        if s.k % stride != 0 && s.k != k_max {
            continue;
        }
        let t = s.k as f64;
        let (f, a) = if params.sigma2 > 0.0 {
            (Some(bound_f(t, &bp)?), Some(continuous_alpha(t, &bp)?))
        } else {
            (None, None)
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.k,
            num(s.alpha),
            num(s.beta),
            num(s.error_bound(params)),
            opt(f),
            opt(a),
        );
    }
    Ok(out)
}

/// Continuous-rate tables for three noise levels at `η = 0.01` and three
/// values of `η` at `σ = 0.05`, all with `||x - x0||² = 100` over
/// `0 ≤ k ≤ 2000`.
pub fn figure3_tables(dir: &Path, stride: u64) -> Result<Vec<PathBuf>, Error> {
    let mut written = Vec::new();
    for sigma in [0.01, 0.1, 1.0] {
        let p = ScheduleParams::from_error(0.01, sigma * sigma, 100.0)?;
        let table = emit_schedule_table(&p, 2000, stride)?;
        written.push(write_file(
            &dir.join(format!("alpha_sigma_{sigma}.csv")),
            &table,
        )?);
    }
    for eta in [0.005, 0.01, 0.02] {
        let p = ScheduleParams::from_error(eta, 0.0025, 100.0)?;
        let table = emit_schedule_table(&p, 2000, stride)?;
        written.push(write_file(
            &dir.join(format!("alpha_eta_{eta}.csv")),
            &table,
        )?);
    }
    Ok(written)
}
