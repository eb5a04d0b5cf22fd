//! Optimal scheduled learning rate and its closed-form error bound.
//!
//! The schedule is driven by two hyperparameters: the condition parameter
//! `eta` and the signal-to-noise ratio `beta0 = ||x - x0||² / σ²`. Each step
//! sets `α_k = ηβ_k / (ηβ_k + 1)` and `β_{k+1} = β_k (1 - ηα_k)`, and
//! `σ²β_k` bounds the expected squared error after `k` iterations. The bound
//! `f(k) = σ² / (η W(e^{ηk + c}))` dominates `σ²β_k` and is what the
//! continuous rate `α(t)` and the asymptotes are expressed in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lambert_w::{self, LambertWError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("bound is degenerate for sigma2 = 0; use the small-noise asymptote")]
    ZeroNoise,
    #[error(transparent)]
    LambertW(#[from] LambertWError),
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ScheduleError {
    ScheduleError::InvalidParam {
        name,
        value,
        reason,
    }
}

fn check_eta(eta: f64) -> Result<(), ScheduleError> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(invalid("eta", eta, "must lie in (0, 1]"))
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<(), ScheduleError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, v, "must be finite and non-negative"))
    }
}

/// Hyperparameters of the scheduled learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eta: f64,
    pub sigma2: f64,
    pub beta0: f64,
}

impl ScheduleParams {
    pub fn new(eta: f64, sigma2: f64, beta0: f64) -> Result<Self, ScheduleError> {
        let p = Self { eta, sigma2, beta0 };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameters from `||x - x0||²` and `σ²`.
    ///
    /// With `sigma2 = 0` the ratio is meaningless and `beta0` is stored as 0;
    /// the schedule then emits `α = 1` regardless.
    pub fn from_error(eta: f64, sigma2: f64, x0_err2: f64) -> Result<Self, ScheduleError> {
        check_nonneg("x0_err2", x0_err2)?;
        check_nonneg("sigma2", sigma2)?;
        let beta0 = if sigma2 > 0.0 { x0_err2 / sigma2 } else { 0.0 };
        Self::new(eta, sigma2, beta0)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        check_eta(self.eta)?;
        check_nonneg("sigma2", self.sigma2)?;
        check_nonneg("beta0", self.beta0)
    }

    pub fn initial_state(&self) -> ScheduleState {
        ScheduleState {
            k: 0,
            beta: if self.sigma2 > 0.0 { self.beta0 } else { 0.0 },
            alpha: self.alpha_for(self.beta0),
        }
    }

    fn alpha_for(&self, beta: f64) -> f64 {
        if self.sigma2 == 0.0 {
            return 1.0;
        }
        let u = self.eta * beta;
        u / (u + 1.0)
    }

    /// Iterator over `ScheduleState`s starting at `k = 0`.
    pub fn iter(&self) -> Schedule {
        Schedule {
            params: *self,
            next: Some(self.initial_state()),
        }
    }

    /// The matching bound parameters (`||x - x0||² = σ²β0`).
    pub fn bound_params(&self) -> BoundParams {
        let x0_err2 = self.sigma2 * self.beta0;
        let c = if self.sigma2 > 0.0 && self.beta0 > 0.0 {
            let u0 = self.eta * self.beta0;
            1.0 / u0 - u0.ln()
        } else {
            f64::INFINITY
        };
        BoundParams {
            c,
            eta: self.eta,
            sigma2: self.sigma2,
            x0_err2,
        }
    }
}

/// Schedule state at iteration `k`: `beta` is `β_k`, `alpha` is `α_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub k: u64,
    pub beta: f64,
    pub alpha: f64,
}

impl ScheduleState {
    /// `σ²β_k`, the bound on the expected squared error at step `k`.
    pub fn error_bound(&self, params: &ScheduleParams) -> f64 {
        params.sigma2 * self.beta
    }
}

/// Advances the recursion by one step.
///
/// With `sigma2 = 0` the rate stays at 1 and `beta` stays 0.
pub fn schedule_step(state: ScheduleState, params: &ScheduleParams) -> ScheduleState {
    let beta = if params.sigma2 == 0.0 {
        0.0
    } else {
        state.beta * (1.0 - params.eta * state.alpha)
    };
    ScheduleState {
        k: state.k + 1,
        beta,
        alpha: params.alpha_for(beta),
    }
}

/// Infinite iterator over the schedule.
#[derive(Debug, Clone)]
pub struct Schedule {
    params: ScheduleParams,
    next: Option<ScheduleState>,
}

impl Iterator for Schedule {
    type Item = ScheduleState;

    fn next(&mut self) -> Option<ScheduleState> {
        let cur = self.next?;
        self.next = Some(schedule_step(cur, &self.params));
        Some(cur)
    }
}

/// Parameters of the closed-form bound `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `σ²/(η||x - x0||²) - ln(η||x - x0||²/σ²)`; infinite when either
    /// `sigma2` or `x0_err2` is zero.
    pub c: f64,
    pub eta: f64,
    pub sigma2: f64,
    pub x0_err2: f64,
}

impl BoundParams {
    pub fn new(eta: f64, sigma2: f64, x0_err2: f64) -> Result<Self, ScheduleError> {
        check_eta(eta)?;
        check_nonneg("sigma2", sigma2)?;
        check_nonneg("x0_err2", x0_err2)?;
        let c = if sigma2 > 0.0 && x0_err2 > 0.0 {
            let u0 = eta * x0_err2 / sigma2;
            sigma2 / (eta * x0_err2) - u0.ln()
        } else {
            f64::INFINITY
        };
        Ok(Self {
            c,
            eta,
            sigma2,
            x0_err2,
        })
    }

    /// `W(e^{ηt + c})`; infinite when `x0_err2 = 0`.
    fn w_of(&self, t: f64) -> Result<f64, ScheduleError> {
        if !t.is_finite() || t < 0.0 {
            return Err(invalid("k", t, "must be finite and non-negative"));
        }
        if self.sigma2 == 0.0 {
            return Err(ScheduleError::ZeroNoise);
        }
        if self.x0_err2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(lambert_w::lambert_w_exp(
            self.eta * t + self.c,
            lambert_w::DEFAULT_TOL,
        )?)
    }
}

/// The bound `f(k) = σ² / (η W(e^{ηk + c}))`; `k` may be fractional.
pub fn bound_f(k: f64, bp: &BoundParams) -> Result<f64, ScheduleError> {
    let w = bp.w_of(k)?;
    Ok(bp.sigma2 / (bp.eta * w))
}

/// Continuous-time rate `α(t) = ηf(t) / (ηf(t) + σ²)`.
///
/// Evaluated as `1 / (1 + W(e^{ηt + c}))`, which is the same quantity
/// since `ηf(t)/σ² = 1/W`.
pub fn continuous_alpha(t: f64, bp: &BoundParams) -> Result<f64, ScheduleError> {
    let w = bp.w_of(t)?;
    Ok(1.0 / (1.0 + w))
}

/// Small-noise limit of the bound: `e^{-ηk} ||x - x0||²`.
pub fn asymptote_small_sigma(k: f64, eta: f64, x0_err2: f64) -> f64 {
    (-eta * k).exp() * x0_err2
}

/// Large-`k` limit of the bound: `σ² / (η² k)`.
pub fn asymptote_large_k(k: f64, eta: f64, sigma2: f64) -> f64 {
    sigma2 / (eta * eta * k)
}

/// Squared-error horizon `δ²/η` of the unit-rate iteration under noise
/// bounded by `δ ||a_i||`.
pub fn needell_horizon(delta: f64, eta: f64) -> f64 {
    delta * delta / eta
}

/// Runs the unsimplified optimality recursion
/// `β' ← (1 - (2α - α²)η)β' + α²` (with `α` recomputed from `β'`) next to
/// the simplified one and returns the largest relative discrepancy seen over
/// `k <= k_max`.
pub fn optimality_recursion_check(params: &ScheduleParams, k_max: u64) -> f64 {
    if params.sigma2 == 0.0 {
        return 0.0;
    }
    let eta = params.eta;
    let mut unsimplified = params.beta0;
    let mut worst: f64 = 0.0;
    for state in params.iter().take(k_max as usize + 1) {
        let scale = state.beta.abs().max(unsimplified.abs());
        if scale > 0.0 {
            worst = worst.max((state.beta - unsimplified).abs() / scale);
        }
        let u = eta * unsimplified;
        let a = u / (u + 1.0);
        unsimplified = (1.0 - (2.0 * a - a * a) * eta) * unsimplified + a * a;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example1() -> BoundParams {
        BoundParams::new(0.01, 0.0025, 100.0).unwrap()
    }

    #[test]
    fn first_step_rational() {
        let p = ScheduleParams::new(0.5, 1.0, 1.0).unwrap();
        let s0 = p.initial_state();
        assert!((s0.alpha - 1.0 / 3.0).abs() < 1e-15);
        let s1 = schedule_step(s0, &p);
        assert_eq!(s1.k, 1);
        assert!((s1.beta - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_beta_collapses() {
        let p = ScheduleParams::new(0.3, 1.0, 0.0).unwrap();
        for s in p.iter().take(10) {
            assert_eq!(s.alpha, 0.0);
            assert_eq!(s.beta, 0.0);
        }
    }

    #[test]
    fn example1_first_rate() {
        let p = ScheduleParams::new(0.01, 0.0025, 100.0 / 0.0025).unwrap();
        let a0 = p.initial_state().alpha;
        assert!((a0 - 400.0 / 401.0).abs() < 1e-15);
        assert!((a0 - 0.997506).abs() < 1e-6);
    }

    #[test]
    fn zero_noise_gives_unit_rate() {
        let p = ScheduleParams::from_error(0.1, 0.0, 50.0).unwrap();
        for s in p.iter().take(50) {
            assert_eq!(s.alpha, 1.0);
            assert_eq!(s.beta, 0.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ScheduleParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ScheduleParams::new(1.5, 1.0, 1.0).is_err());
        assert!(ScheduleParams::new(0.5, -1.0, 1.0).is_err());
        assert!(ScheduleParams::new(0.5, 1.0, f64::NAN).is_err());
        assert!(BoundParams::new(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn example1_bound_constants() {
        let bp = example1();
        assert!((bp.c - -5.988_964_547_107_982).abs() < 1e-12);
        // W(e^c) = 1/u0 exactly, so f(0) = ||x - x0||²
        let f0 = bound_f(0.0, &bp).unwrap();
        assert!((f0 - 100.0).abs() < 1e-10, "f(0) = {f0}");
        let f2000 = bound_f(2000.0, &bp).unwrap();
        // 40-digit reference: 0.021620299273479116795...
        assert!((f2000 - 0.021_620_299_273_479_12).abs() < 1e-14);
        assert!(((f2000.sqrt() / 10.0) - 0.0147).abs() < 1e-4);
    }

    #[test]
    fn bound_matches_schedule_parametrisation() {
        let p = ScheduleParams::new(0.01, 0.0025, 40_000.0).unwrap();
        let a = p.bound_params();
        let b = example1();
        assert!((a.c - b.c).abs() < 1e-14);
        assert_eq!(a.x0_err2, 100.0);
    }

    #[test]
    fn bound_zero_noise_is_error() {
        let bp = BoundParams::new(0.1, 0.0, 1.0).unwrap();
        assert_eq!(bound_f(1.0, &bp), Err(ScheduleError::ZeroNoise));
        assert_eq!(continuous_alpha(1.0, &bp), Err(ScheduleError::ZeroNoise));
        assert!(bound_f(-1.0, &example1()).is_err());
    }

    #[test]
    fn bound_zero_initial_error() {
        let bp = BoundParams::new(0.1, 1.0, 0.0).unwrap();
        assert_eq!(bound_f(3.0, &bp).unwrap(), 0.0);
        assert_eq!(continuous_alpha(3.0, &bp).unwrap(), 0.0);
    }

    #[test]
    fn continuous_alpha_examples() {
        let bp = example1();
        let a0 = continuous_alpha(0.0, &bp).unwrap();
        assert!((a0 - 400.0 / 401.0).abs() < 1e-12);
        assert!((a0 - 0.99751).abs() < 5e-6);
        // agrees with the literal formula
        for t in [0.0, 10.0, 500.0, 2000.0, 1e5] {
            let f = bound_f(t, &bp).unwrap();
            let lit = bp.eta * f / (bp.eta * f + bp.sigma2);
            let a = continuous_alpha(t, &bp).unwrap();
            assert!((a - lit).abs() < 1e-13 * lit.max(1e-300));
        }
        assert!(continuous_alpha(1e12, &bp).unwrap() < 1e-9);
        let noisy = BoundParams::new(0.01, 1e12, 100.0).unwrap();
        assert!(continuous_alpha(0.0, &noisy).unwrap() < 1e-11);
    }

    #[test]
    fn asymptote_examples() {
        assert_eq!(asymptote_small_sigma(0.0, 0.01, 100.0), 100.0);
        let v = asymptote_small_sigma(100.0, 0.01, 100.0);
        assert!((v - 100.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 36.788).abs() < 1e-3);
        // (1 - η)^k vs e^{-ηk}
        let sv = 0.99f64.powi(100) * 100.0;
        assert!((sv / v - 1.0).abs() < 0.01);

        let l = asymptote_large_k(1e6, 0.01, 0.0025);
        assert!((l - 2.5e-5).abs() < 1e-18);
        assert!((asymptote_large_k(2e6, 0.01, 0.0025) - l / 2.0).abs() < 1e-18);
    }

    #[test]
    fn needell_examples() {
        assert_eq!(needell_horizon(0.0, 0.3), 0.0);
        let h = needell_horizon(0.05, 0.01);
        assert!((h - 0.25).abs() < 1e-15);
        let f = bound_f(2000.0, &example1()).unwrap();
        assert!((h / f - 11.56).abs() < 0.01);
    }

    #[test]
    fn recursion_forms_agree() {
        let p = ScheduleParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(optimality_recursion_check(&p, 1) <= 1e-15);
        let p0 = ScheduleParams::new(0.5, 1.0, 0.0).unwrap();
        assert_eq!(optimality_recursion_check(&p0, 100), 0.0);
        for (eta, beta0) in [(0.01, 40_000.0), (1e-4, 1e6), (0.5, 1e-3), (1.0, 7.0)] {
            let p = ScheduleParams::new(eta, 0.3, beta0).unwrap();
            let d = optimality_recursion_check(&p, 1000);
            assert!(d <= 1e-12, "eta {eta} beta0 {beta0}: {d}");
        }
    }

    #[test]
    fn tight_for_small_eta() {
        // exact recursion vs closed form; worst gap measured at 2.3e-3
        let mut worst: f64 = 0.0;
        for beta0 in [1e-3, 1.0, 1e3, 1e6] {
            let p = ScheduleParams::new(1e-3, 1.0, beta0).unwrap();
            let bp = p.bound_params();
            for s in p.iter().take(10_001) {
                let f = bound_f(s.k as f64, &bp).unwrap();
                worst = worst.max((s.error_bound(&p) - f).abs() / f);
            }
        }
        assert!(worst <= 1e-2, "worst relative gap {worst}");
    }

    #[test]
    fn small_sigma_scaling() {
        let dev = |sigma: f64| {
            let bp = BoundParams::new(0.01, sigma * sigma, 100.0).unwrap();
            (bound_f(200.0, &bp).unwrap() / asymptote_small_sigma(200.0, 0.01, 100.0) - 1.0).abs()
        };
        for pair in [(1e-1, 1e-2), (1e-2, 1e-3), (1e-3, 1e-4)] {
            let r = dev(pair.0) / dev(pair.1);
            assert!((50.0..=200.0).contains(&r), "ratio {r} at {pair:?}");
        }
    }

    #[test]
    fn large_k_constant_settles_near_inverse_eta() {
        // f η² k / σ² = ηk / W(e^y) with y = ηk + c, and
        // W(e^y) ≈ y - ln y + ln y / y, so C(k) → 1/η from above
        let bp = example1();
        let mut prev = f64::INFINITY;
        for e in 4..=8 {
            let k = 10f64.powi(e);
            let f = bound_f(k, &bp).unwrap();
            let dev = (f * bp.eta * bp.eta * k / bp.sigma2 - 1.0).abs();
            let c_fit = dev / (k.ln() / k);
            let y = bp.eta * k + bp.c;
            let w_approx = y - y.ln() + y.ln() / y;
            let predicted = (bp.eta * k / w_approx - 1.0) / (k.ln() / k);
            assert!(c_fit < prev, "C must decrease with k");
            assert!(c_fit > 1.0 / bp.eta, "C = {c_fit}");
            assert!(
                (c_fit / predicted - 1.0).abs() < 1e-3,
                "C = {c_fit}, predicted {predicted}"
            );
            prev = c_fit;
        }
        let f = bound_f(1e8, &bp).unwrap();
        assert!((f / asymptote_large_k(1e8, bp.eta, bp.sigma2) - 1.0).abs() < 2e-5);
    }

    proptest! {
        #[test]
        fn schedule_below_bound_and_decreasing(
            log_eta in -4.0f64..(0.5f64).log10(),
            log_beta in -3.0f64..6.0,
            log_sigma2 in -4.0f64..2.0,
        ) {
            let p = ScheduleParams::new(
                10f64.powf(log_eta), 10f64.powf(log_sigma2), 10f64.powf(log_beta)).unwrap();
            let bp = p.bound_params();
            let mut prev: Option<ScheduleState> = None;
            for s in p.iter().step_by(7).take(300) {
                let f = bound_f(s.k as f64, &bp).unwrap();
                prop_assert!(s.error_bound(&p) <= f * (1.0 + 1e-9));
                prop_assert!(s.alpha > 0.0 && s.alpha < 1.0);
                if let Some(q) = prev {
                    prop_assert!(s.beta < q.beta);
                    prop_assert!(s.alpha < q.alpha);
                }
                prev = Some(s);
            }
        }

        #[test]
        fn bound_strictly_decreasing(
            eta in 1e-3f64..1.0,
            sigma2 in 1e-4f64..10.0,
            x0 in 1e-2f64..1e3,
            t in 0.0f64..1e4,
        ) {
            let bp = BoundParams::new(eta, sigma2, x0).unwrap();
            let a = bound_f(t, &bp).unwrap();
            let b = bound_f(t + 1.0, &bp).unwrap();
            prop_assert!(b < a);
            let (ca, cb) = (continuous_alpha(t, &bp).unwrap(), continuous_alpha(t + 1.0, &bp).unwrap());
            prop_assert!(cb < ca && ca < 1.0 && cb > 0.0);
        }
    }
}
