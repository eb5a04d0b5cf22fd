//! The relaxed randomized Kaczmarz iteration
//!
//! ```text
//! x_{k+1} = x_k + α_k (b̃_i - <a_i, x_k>) / ||a_i||² · a_i
//! ```
//!
//! under constant, scheduled, or explicit learning rates, with per-step
//! error tracing against a known ground truth.

use thiserror::Error;

use crate::linalg::{self, LinalgError, RowMatrix};
use crate::rng;
use crate::sampler::{RowStream, SamplerError, SamplerKind};
use crate::schedule::{schedule_step, ScheduleError, ScheduleParams, ScheduleState};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("k_max = {k_max} exceeds the {rows} rows available without replacement")]
    TooManyIterations { k_max: usize, rows: usize },
    #[error("explicit rate list has {got} entries, {needed} needed")]
    RateListTooShort { needed: usize, got: usize },
    #[error("constant rate {0} outside (0, 2)")]
    BadConstantRate(f64),
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("clean system is inconsistent: ||Ax - b|| = {residual:e} > 1e-10 ||b||")]
    Inconsistent { residual: f64 },
    #[error("sigma = {0} must be finite and non-negative")]
    BadSigma(f64),
    #[error("operation needs the ground truth, which this problem does not carry")]
    MissingGroundTruth,
}

/// A noisy consistent linear system.
///
/// `x_true` and `b` are absent for real data, in which case only residuals
/// can be traced.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a: RowMatrix,
    pub x_true: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub b_tilde: Vec<f64>,
    pub sigma: f64,
}

impl Problem {
    /// Builds a problem from ground truth, computing `b = A x`.
    pub fn new(
        a: RowMatrix,
        x_true: Vec<f64>,
        b_tilde: Vec<f64>,
        sigma: f64,
    ) -> Result<Self, SolverError> {
        let b = a.mul_vec(&x_true)?;
        Self::from_parts(a, Some(x_true), Some(b), b_tilde, sigma)
    }

    /// Builds a problem from stored parts, checking dimensions and that
    /// `||A x - b|| <= 1e-10 ||b||` when both are present.
    pub fn from_parts(
        a: RowMatrix,
        x_true: Option<Vec<f64>>,
        b: Option<Vec<f64>>,
        b_tilde: Vec<f64>,
        sigma: f64,
    ) -> Result<Self, SolverError> {
        let dim = |what, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(SolverError::DimensionMismatch {
                    what,
                    expected,
                    got,
                })
            }
        };
        dim("b_tilde", a.rows(), b_tilde.len())?;
        if let Some(x) = &x_true {
            dim("x_true", a.cols(), x.len())?;
        }
        if let Some(b) = &b {
            dim("b", a.rows(), b.len())?;
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SolverError::BadSigma(sigma));
        }
        if let (Some(x), Some(b)) = (&x_true, &b) {
            let ax = a.mul_vec(x)?;
            let residual = linalg::dist2(&ax, b).sqrt();
            if residual > 1e-10 * linalg::norm2(b).sqrt() {
                return Err(SolverError::Inconsistent { residual });
            }
        }
        Ok(Self {
            a,
            x_true,
            b,
            b_tilde,
            sigma,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// `||x - x_true||²`, if the truth is known.
    pub fn sq_error(&self, x: &[f64]) -> Option<f64> {
        self.x_true.as_deref().map(|t| linalg::dist2(x, t))
    }
}

/// Learning-rate policy.
#[derive(Debug, Clone, PartialEq)]
pub enum RatePolicy {
    /// Fixed `α_k = μ` with `0 < μ < 2`.
    Constant(f64),
    /// The optimal schedule for the given hyperparameters.
    ScheduledOptimal(ScheduleParams),
    /// Caller-supplied `α_0, α_1, …`.
    Explicit(Vec<f64>),
}

impl RatePolicy {
    pub fn validate(&self, k_max: usize) -> Result<(), SolverError> {
        match self {
            RatePolicy::Constant(mu) => {
                if *mu > 0.0 && *mu < 2.0 {
                    Ok(())
                } else {
                    Err(SolverError::BadConstantRate(*mu))
                }
            }
            RatePolicy::ScheduledOptimal(p) => Ok(p.validate()?),
            RatePolicy::Explicit(a) => {
                if a.len() < k_max {
                    Err(SolverError::RateListTooShort {
                        needed: k_max,
                        got: a.len(),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Short name used in output file names.
    pub fn label(&self) -> String {
        match self {
            RatePolicy::Constant(mu) => format!("constant_{mu}"),
            RatePolicy::ScheduledOptimal(_) => "scheduled".to_string(),
            RatePolicy::Explicit(_) => "explicit".to_string(),
        }
    }

    /// Stream of rates this policy emits.
    pub fn rates(&self) -> Rates<'_> {
        match self {
            RatePolicy::Constant(mu) => Rates::Constant(*mu),
            RatePolicy::ScheduledOptimal(p) => Rates::Scheduled(*p, p.initial_state()),
            RatePolicy::Explicit(a) => Rates::Explicit(a.iter()),
        }
    }
}

/// Online rate source; the schedule is advanced one step per draw.
#[derive(Debug, Clone)]
pub enum Rates<'a> {
    Constant(f64),
    Scheduled(ScheduleParams, ScheduleState),
    Explicit(std::slice::Iter<'a, f64>),
}

impl Iterator for Rates<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match self {
            Rates::Constant(mu) => Some(*mu),
            Rates::Scheduled(p, s) => {
                let alpha = s.alpha;
                *s = schedule_step(*s, p);
                Some(alpha)
            }
            Rates::Explicit(it) => it.next().copied(),
        }
    }
}

/// One iteration of the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// Row `i_k` used at this step.
    pub row: usize,
    pub alpha: f64,
    /// `b̃_{i_k} - <a_{i_k}, x_k>`, before the update.
    pub residual: f64,
    /// `||x_{k+1} - x||²`, after the update.
    pub sq_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `||x_0 - x||²`.
    pub initial_sq_error: Option<f64>,
    pub steps: Vec<StepRecord>,
    pub x_final: Vec<f64>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `||x_k - x||²` for `k = 0..=K`.
    pub fn sq_error_curve(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.initial_sq_error?);
        for s in &self.steps {
            out.push(s.sq_error?);
        }
        Some(out)
    }
}

/// Applies one relaxed projection in place and returns the residual
/// `b̃_i - <a_i, x>` measured before the update.
pub fn kaczmarz_step(
    x: &mut [f64],
    a: &RowMatrix,
    i: usize,
    b_tilde_i: f64,
    alpha: f64,
) -> Result<f64, LinalgError> {
    let residual = b_tilde_i - a.row_dot(i, x)?;
    let coeff = alpha * (residual / a.row_norm2(i)?);
    a.axpy_row(x, i, coeff)?;
    Ok(residual)
}

/// Runs `k_max` iterations from `x_0 = 0`.
pub fn solve(
    p: &Problem,
    policy: &RatePolicy,
    sampler: SamplerKind,
    seed: u64,
    k_max: usize,
) -> Result<SolveTrace, SolverError> {
    solve_from(p, vec![0.0; p.cols()], policy, sampler, seed, k_max)
}

/// Runs `k_max` iterations from the given starting point.
///
/// Rows are drawn without replacement, so `k_max` may not exceed `m`.
pub fn solve_from(
    p: &Problem,
    x0: Vec<f64>,
    policy: &RatePolicy,
    sampler: SamplerKind,
    seed: u64,
    k_max: usize,
) -> Result<SolveTrace, SolverError> {
    if x0.len() != p.cols() {
        return Err(SolverError::DimensionMismatch {
            what: "x0",
            expected: p.cols(),
            got: x0.len(),
        });
    }
    if k_max > p.rows() {
        return Err(SolverError::TooManyIterations {
            k_max,
            rows: p.rows(),
        });
    }
    policy.validate(k_max)?;

    let mut x = x0;
    let initial_sq_error = p.sq_error(&x);
    let rows = RowStream::new(sampler, p.a.row_norms2(), rng::from_seed(seed))?;
    let mut steps = Vec::with_capacity(k_max);
    for (k, (i, alpha)) in rows.zip(policy.rates()).take(k_max).enumerate() {
        let residual = kaczmarz_step(&mut x, &p.a, i, p.b_tilde[i], alpha)?;
        steps.push(StepRecord {
            k,
            row: i,
            alpha,
            residual,
            sq_error: p.sq_error(&x),
        });
    }
    Ok(SolveTrace {
        initial_sq_error,
        steps,
        x_final: x,
    })
}

/// Both sides of the per-step error identities, reduced to residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    /// `||x - x_{k+1}||² = ||x - x_k||² - ||y - x_k||² + ||y - x_{k+1}||²`,
    /// relative residual.
    pub pythagorean: f64,
    /// `||x - x_{k+1}||² = ||x - x_k||² - (2α - α²)||y - x_k||² + Z_k`,
    /// relative residual.
    pub decomposition: f64,
    /// Noise-linear part of `Z_k`.
    pub z_linear: f64,
    /// Noise-quadratic part of `Z_k`, `α²ε²/||a||²`.
    pub z_quadratic: f64,
    pub x_next: Vec<f64>,
}

impl StepAudit {
    pub fn z(&self) -> f64 {
        self.z_linear + self.z_quadratic
    }

    pub fn worst(&self) -> f64 {
        self.pythagorean.max(self.decomposition)
    }
}

fn rel_residual(lhs: f64, rhs: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(lhs.abs(), |m, t| m.max(t.abs()));
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Audits one step from `x_k` on row `i` with rate `alpha`.
///
/// `y` is the projection of `x_k` onto the clean hyperplane
/// `<a_i, y> = b_i`, and `ε_i = b̃_i - b_i`.
pub fn step_identity_audit(
    p: &Problem,
    x_k: &[f64],
    i: usize,
    alpha: f64,
) -> Result<StepAudit, SolverError> {
    let (Some(x), Some(b)) = (p.x_true.as_deref(), p.b.as_deref()) else {
        return Err(SolverError::MissingGroundTruth);
    };
    let a = &p.a;
    let norm2 = a.row_norm2(i)?;
    let norm = norm2.sqrt();
    let r_clean = b[i] - a.row_dot(i, x_k)?;
    let eps = p.b_tilde[i] - b[i];

    let mut y = x_k.to_vec();
    a.axpy_row(&mut y, i, r_clean / norm2)?;
    let mut x_next = x_k.to_vec();
    kaczmarz_step(&mut x_next, a, i, p.b_tilde[i], alpha)?;

    let lhs = linalg::dist2(x, &x_next);
    let d_k = linalg::dist2(x, x_k);
    let proj = linalg::dist2(&y, x_k);
    let y_next = linalg::dist2(&y, &x_next);

    let pythagorean = rel_residual(lhs, d_k - proj + y_next, &[d_k, proj, y_next]);

    let z_linear = -2.0 * alpha * (1.0 - alpha) * (eps / norm) * (r_clean / norm);
    let z_quadratic = alpha * alpha * eps * eps / norm2;
    let shrink = (2.0 * alpha - alpha * alpha) * proj;
    let decomposition = rel_residual(
        lhs,
        d_k - shrink + z_linear + z_quadratic,
        &[d_k, shrink, z_linear, z_quadratic],
    );

    Ok(StepAudit {
        pythagorean,
        decomposition,
        z_linear,
        z_quadratic,
        x_next,
    })
}

/// Result of [`empirical_eta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Weighted average over rows of `|<z, a_i/||a_i||>|²` with weights
/// proportional to `||a_i||²`, i.e. `||Az||² / ||A||_F²` for unit `z`.
///
/// `z` is normalised first. The standard error treats rows as independent
/// draws.
pub fn empirical_eta(a: &RowMatrix, z: &[f64]) -> Result<EtaEstimate, SolverError> {
    if z.len() != a.cols() {
        return Err(SolverError::DimensionMismatch {
            what: "z",
            expected: a.cols(),
            got: z.len(),
        });
    }
    let zn = linalg::norm2(z).sqrt();
    let total = a.frobenius_norm2();
    let m = a.rows();
    let q: Vec<(f64, f64)> = a
        .iter_rows()
        .zip(a.row_norms2())
        .map(|(row, &r2)| {
            let d = row.dot(z) / zn;
            (r2 / total, d * d / r2)
        })
        .collect();
    let mean: f64 = q.iter().map(|(w, v)| w * v).sum();
    let var: f64 = q.iter().map(|(w, v)| w * w * (v - mean) * (v - mean)).sum();
    let correction = if m > 1 {
        m as f64 / (m as f64 - 1.0)
    } else {
        1.0
    };
    Ok(EtaEstimate {
        mean,
        std_error: (var * correction).sqrt(),
    })
}

/// Worst residuals over a randomized batch of step audits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AuditSummary {
    pub steps: usize,
    pub worst_pythagorean: f64,
    pub worst_decomposition: f64,
}

/// Rates the randomized audit cycles through.
pub const AUDIT_RATES: [f64; 4] = [0.0, 0.3, 1.0, 1.7];

/// Runs `steps` single-step audits on small random problems, cycling over
/// sparse/dense rows, zero/nonzero noise, and [`AUDIT_RATES`].
pub fn audit_suite(seed: u64, steps: usize) -> Result<AuditSummary, crate::Error> {
    use crate::generators::{self, EnsembleKind, EnsembleSpec, NoiseKind};
    use rand::Rng;

    let mut rng = rng::from_seed(seed);
    let mut summary = AuditSummary {
        steps: 0,
        worst_pythagorean: 0.0,
        worst_decomposition: 0.0,
    };
    let mut gauss = rng::Gaussian::new();
    // one problem per (row kind, noise level) cell, redrawn every 256 steps
    let mut cache: Vec<Option<Problem>> = vec![None; 4];
    for step in 0..steps {
        let cell = step % 4;
        if step % 256 < 4 {
            let kind = if cell % 2 == 0 {
                EnsembleKind::SparseSphere
            } else {
                EnsembleKind::DenseSphere
            };
            let sigma = if cell < 2 { 0.0 } else { 0.1 };
            let n = rng.random_range(2..30);
            let spec = EnsembleSpec {
                kind,
                m: 40,
                n,
                s: Some(rng.random_range(1..=n)),
                sigma,
                seed: rng.random(),
            };
            let a = generators::gen_matrix(&spec)?;
            let x = generators::gen_signal(n, rng.random());
            let noise = if step % 512 < 4 {
                NoiseKind::Normal
            } else {
                NoiseKind::Rademacher
            };
            cache[cell] = Some(generators::make_problem_with_noise(
                a,
                x,
                sigma,
                rng.random(),
                noise,
            )?);
        }
        let p = cache[cell].as_ref().expect("populated above");
        let mut x_k = vec![0.0; p.cols()];
        gauss.fill(&mut rng, &mut x_k);
        let scale = 10f64.powi(rng.random_range(-3..3));
        x_k.iter_mut().for_each(|v| *v *= scale);
        let i = rng.random_range(0..p.rows());
        let alpha = AUDIT_RATES[(step / 4) % AUDIT_RATES.len()];
        let audit = step_identity_audit(p, &x_k, i, alpha)?;
        summary.steps += 1;
        summary.worst_pythagorean = summary.worst_pythagorean.max(audit.pythagorean);
        summary.worst_decomposition = summary.worst_decomposition.max(audit.decomposition);
    }
    Ok(summary)
}
