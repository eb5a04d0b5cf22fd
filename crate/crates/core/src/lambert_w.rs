//! Principal real branch of the Lambert-W function.
//!
//! `lambert_w0` evaluates W₀(x) by Halley iteration on `w·e^w − x` with an
//! initial guess chosen per regime (branch-point series, Taylor series near
//! zero, logarithmic asymptote for large `x`). `lambert_w_exp` evaluates
//! W₀(e^ξ) by solving `w + ln w = ξ` directly, so it never forms `e^ξ` and
//! stays finite for exponents far beyond the range of `f64`.

use std::f64::consts::E;

use thiserror::Error;

/// Default convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Iteration cap shared by both solvers.
pub const MAX_ITER: usize = 100;

/// Inputs up to this far below `-1/e` are treated as the branch point.
pub const BRANCH_SLACK: f64 = 1e-12;

const INV_E: f64 = 1.0 / E;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LambertWError {
    #[error("lambert W0 is undefined for x = {x} < -1/e")]
    Domain { x: f64 },
    #[error("lambert W failed to converge for {arg} after {iterations} iterations")]
    NoConvergence { arg: f64, iterations: usize },
    #[error("invalid tolerance {0}; must be positive and finite")]
    BadTolerance(f64),
    #[error("lambert W argument {0} is not finite")]
    NonFinite(f64),
}

/// Result of a W₀ evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WEvalReport {
    /// W₀(x), always `>= -1`.
    pub value: f64,
    /// Halley iterations performed.
    pub iterations: usize,
    /// `|w·e^w − x| / max(|x|, 1)`.
    pub residual: f64,
}

fn check_tol(tol: f64) -> Result<(), LambertWError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(LambertWError::BadTolerance(tol))
    }
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.32 {
        // series in p = sqrt(2(ex + 1)) about the branch point
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x.abs() <= 0.25 {
        x - x * x + 1.5 * x * x * x
    } else if x < 3.0 {
        // Winitzki's approximation, within a few percent here
        let l = (1.0 + x).ln();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// Evaluates the principal branch W₀(x).
///
/// Accepts `x >= -1/e`; arguments at most [`BRANCH_SLACK`] (or `tol`, if
/// larger) below the branch point are clamped to it.
pub fn lambert_w0(x: f64, tol: f64) -> Result<WEvalReport, LambertWError> {
    check_tol(tol)?;
    if !x.is_finite() {
        return Err(LambertWError::NonFinite(x));
    }
    let slack = BRANCH_SLACK.max(tol);
    if x < -INV_E - slack {
        return Err(LambertWError::Domain { x });
    }
    if x <= -INV_E {
        return Ok(WEvalReport {
            value: -1.0,
            iterations: 0,
            residual: (-INV_E - x).abs(),
        });
    }
    if x == 0.0 {
        return Ok(WEvalReport {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }

    let scale = x.abs().max(1.0);
    let residual_of = |w: f64| (w * w.exp() - x).abs() / scale;

    let mut w = initial_guess(x).max(-1.0);
    for it in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let residual = f.abs() / scale;
        if residual <= tol {
            return Ok(WEvalReport {
                value: w,
                iterations: it,
                residual,
            });
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = (w - f / denom).max(-1.0);
        if next == w {
            // stalled at rounding level; accept only if within tolerance
            break;
        }
        w = next;
    }
    let residual = residual_of(w);
    if residual <= tol {
        Ok(WEvalReport {
            value: w,
            iterations: MAX_ITER,
            residual,
        })
    } else {
        Err(LambertWError::NoConvergence {
            arg: x,
            iterations: MAX_ITER,
        })
    }
}

/// Evaluates W₀(e^ξ) as the positive root of `w + ln w = ξ`.
///
/// Uses Newton's method safeguarded by the bracket `[1, ξ]` for `ξ >= 1` and
/// `[e^(ξ-1), min(1, e^ξ)]` otherwise; steps that leave the bracket fall back
/// to bisection. Stops once the Newton correction is below `tol·w`.
/// For `ξ` below about `-745` the result underflows to zero.
pub fn lambert_w_exp(xi: f64, tol: f64) -> Result<f64, LambertWError> {
    check_tol(tol)?;
    if !xi.is_finite() {
        return Err(LambertWError::NonFinite(xi));
    }
    if xi == 1.0 {
        return Ok(1.0);
    }
    if xi < -700.0 {
        // w = e^(ξ - w) with w < e^-700
        return Ok(xi.exp());
    }

    let (mut lo, mut hi, mut w) = if xi >= 1.0 {
        (1.0, xi, (xi - xi.ln()).max(1.0))
    } else {
        let hi = xi.exp().min(1.0);
        let lo = (xi - 1.0).exp();
        let guess = if xi < -2.0 {
            // w ≈ e^ξ (1 - e^ξ)
            let e = xi.exp();
            e * (1.0 - e)
        } else {
            0.5 * (lo + hi)
        };
        (lo, hi, guess.clamp(lo, hi))
    };

    let g = |w: f64| w + w.ln() - xi;
    for _ in 0..MAX_ITER {
        let gw = g(w);
        if gw == 0.0 {
            return Ok(w);
        }
        if gw < 0.0 {
            lo = lo.max(w);
        } else {
            hi = hi.min(w);
        }
        let step = gw / (1.0 + 1.0 / w);
        let mut next = w - step;
        if !(next > lo && next < hi) {
            next = if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - w).abs() <= tol * w.max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        if hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        w = next;
    }
    Err(LambertWError::NoConvergence {
        arg: xi,
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on `w·e^w = x` over a bracket known to contain the root.
    fn bisect_w0(x: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Bisection on `w + ln w = ξ`.
    fn bisect_wexp(xi: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.ln() < xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn trivial_points() {
        assert_eq!(lambert_w0(0.0, DEFAULT_TOL).unwrap().value, 0.0);
        assert!((lambert_w0(E, DEFAULT_TOL).unwrap().value - 1.0).abs() < 1e-13);
        assert_eq!(lambert_w0(-INV_E, DEFAULT_TOL).unwrap().value, -1.0);
        assert_eq!(lambert_w_exp(1.0, DEFAULT_TOL).unwrap(), 1.0);
    }

    #[test]
    fn omega_constant_matches_bisection() {
        let oracle = bisect_w0(1.0, 0.0, 1.0);
        assert!((oracle - 0.567_143_290_409_78).abs() < 1e-12);
        let w = lambert_w0(1.0, DEFAULT_TOL).unwrap();
        assert!((w.value - oracle).abs() < 1e-12);
        assert!(w.residual <= 1e-12);
        let w = lambert_w_exp(0.0, DEFAULT_TOL).unwrap();
        assert!((w - oracle).abs() < 1e-12);
    }

    #[test]
    fn wexp_at_example_scale() {
        let oracle = bisect_wexp(14.011, 1.0, 14.011);
        let w = lambert_w_exp(14.011, DEFAULT_TOL).unwrap();
        assert!((w - oracle).abs() < 1e-11 * oracle);
        assert!((w - 11.56).abs() < 0.01);
    }

    #[test]
    fn wexp_large_argument_asymptote() {
        let xi = 1e6_f64;
        let w = lambert_w_exp(xi, DEFAULT_TOL).unwrap();
        let asym = xi - xi.ln();
        // next term of the expansion is ln ξ / ξ
        assert!((w - asym - xi.ln() / xi).abs() < 1e-8);
        let oracle = bisect_wexp(xi, 1.0, xi);
        assert!((w - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn wexp_huge_exponents_do_not_overflow() {
        for xi in [800.0, 1e10, 1e300] {
            let w = lambert_w_exp(xi, DEFAULT_TOL).unwrap();
            assert!(w.is_finite() && w > 0.0);
            let g = w + w.ln() - xi;
            assert!(g.abs() <= 1e-12 * xi, "xi = {xi}, residual {g}");
        }
    }

    #[test]
    fn wexp_very_negative() {
        let w = lambert_w_exp(-30.0, DEFAULT_TOL).unwrap();
        let oracle = bisect_wexp(-30.0, (-31.0f64).exp(), (-30.0f64).exp());
        assert!((w - oracle).abs() <= 1e-12 * oracle);
        assert!(lambert_w_exp(-1000.0, DEFAULT_TOL).unwrap() >= 0.0);
    }

    #[test]
    fn domain_and_slack() {
        assert!(matches!(
            lambert_w0(-0.4, DEFAULT_TOL),
            Err(LambertWError::Domain { .. })
        ));
        let w = lambert_w0(-INV_E - 5e-13, DEFAULT_TOL).unwrap();
        assert_eq!(w.value, -1.0);
        assert!(matches!(
            lambert_w0(1.0, 0.0),
            Err(LambertWError::BadTolerance(_))
        ));
        assert!(lambert_w0(f64::NAN, DEFAULT_TOL).is_err());
        assert!(lambert_w_exp(f64::INFINITY, DEFAULT_TOL).is_err());
    }

    #[test]
    fn near_branch_point() {
        for d in [1e-12, 1e-10, 1e-8, 1e-6, 1e-3] {
            let x = -INV_E + d;
            let r = lambert_w0(x, DEFAULT_TOL).unwrap();
            assert!(r.value >= -1.0);
            assert!(r.residual <= 1e-12, "x = {x}: {r:?}");
        }
    }

    #[test]
    fn small_x_series() {
        let mut worst: f64 = 0.0;
        for i in 1..=200 {
            let x = -0.05 + 0.1 * i as f64 / 201.0;
            let w = lambert_w0(x, DEFAULT_TOL).unwrap().value;
            worst = worst.max((w - (x - x * x)).abs() / x.abs().powi(3));
        }
        // third-order Taylor coefficient of W is 3/2
        assert!(worst <= 2.0, "constant {worst}");
    }

    #[test]
    fn halley_converges_fast() {
        for x in [-0.3, -0.1, 0.5, 2.0, 10.0, 1e3, 1e10, 1e100] {
            let r = lambert_w0(x, DEFAULT_TOL).unwrap();
            assert!(r.iterations < 10, "x = {x}: {r:?}");
        }
    }
}
