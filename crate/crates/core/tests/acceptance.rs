//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line (run with `--nocapture` to see them) and fails on FAIL.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use kaczmarz::experiments::output::curve_csv;
use kaczmarz::experiments::{
    run_experiment, run_experiment_with_workers, ExperimentConfig, ExperimentResult,
};
use kaczmarz::generators::{gen_dense_sphere, EnsembleKind, EnsembleSpec};
use kaczmarz::lambert_w::{lambert_w0, lambert_w_exp, DEFAULT_TOL};
use kaczmarz::rng;
use kaczmarz::sampler::RowSampler;
use kaczmarz::schedule::{
    asymptote_small_sigma, bound_f, needell_horizon, BoundParams, ScheduleParams,
};
use kaczmarz::solver::{audit_suite, empirical_eta};

fn report(n: u32, pass: bool, detail: &str, elapsed: Duration, limit: Option<f64>) {
    let within = limit.is_none_or(|l| elapsed.as_secs_f64() < l);
    let ok = pass && within;
    let budget = limit.map(|l| format!(" (limit {l} s)")).unwrap_or_default();
    println!(
        "criterion {n}: {} - {detail}; {:.3} s{budget}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(
        within,
        "criterion {n} exceeded its runtime limit: {elapsed:?}"
    );
}

#[test]
fn criterion_1_lambert_w_accuracy() {
    let t = Instant::now();
    let e_inv = (-1.0f64).exp();
    let lo = 1e-6f64;
    let hi = 1e15 + e_inv;
    let mut worst: f64 = 0.0;
    for j in 0..1000 {
        let d = lo * (hi / lo).powf(j as f64 / 999.0);
        let x = -e_inv + d;
        let w = lambert_w0(x, DEFAULT_TOL).unwrap().value;
        worst = worst.max((w * w.exp() - x).abs() / x.abs());
    }
    let xi = 1e6f64;
    let we = lambert_w_exp(xi, DEFAULT_TOL).unwrap();
    let asym = (we - (xi - xi.ln())).abs() / we;
    let pass = worst <= 1e-10 && asym <= 1e-4;
    report(
        1,
        pass,
        &format!("worst round-trip {worst:.2e} (<= 1e-10), asymptote gap {asym:.2e} (<= 1e-4)"),
        t.elapsed(),
        Some(1.0),
    );
}

#[test]
fn criterion_2_schedule_below_bound() {
    let t = Instant::now();
    let mut r = rng::from_seed(2);
    let mut worst_ratio: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..200 {
        let eta = 10f64.powf(r.random_range(-4.0..0.5f64.log10()));
        let beta0 = 10f64.powf(r.random_range(-3.0..6.0));
        let p = ScheduleParams::new(eta, 1.0, beta0).unwrap();
        let bp = p.bound_params();
        let mut prev = f64::INFINITY;
        for s in p.iter().take(10_001) {
            let f = bound_f(s.k as f64, &bp).unwrap();
            worst_ratio = worst_ratio.max(s.error_bound(&p) / f);
            monotone &= s.beta < prev;
            prev = s.beta;
        }
    }
    let pass = worst_ratio <= 1.0 + 1e-9 && monotone;
    report(
        2,
        pass,
        &format!(
            "max sigma2*beta_k/f(k) = {worst_ratio:.12}, beta strictly decreasing: {monotone}"
        ),
        t.elapsed(),
        Some(5.0),
    );
}

#[test]
fn criterion_3_step_identities() {
    let t = Instant::now();
    let s = audit_suite(3, 10_000).unwrap();
    let pass = s.steps == 10_000 && s.worst_pythagorean <= 1e-10 && s.worst_decomposition <= 1e-10;
    report(
        3,
        pass,
        &format!(
            "{} steps, worst Pythagorean {:.2e}, worst decomposition {:.2e} (<= 1e-10)",
            s.steps, s.worst_pythagorean, s.worst_decomposition
        ),
        t.elapsed(),
        Some(2.0),
    );
}

fn example1_100() -> &'static (ExperimentResult, Duration) {
    static RUN: OnceLock<(ExperimentResult, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = ExperimentConfig::example1();
        cfg.trials = 100;
        let t = Instant::now();
        let r = run_experiment(&cfg).unwrap();
        (r, t.elapsed())
    })
}

#[test]
fn criterion_4_example1_reproduction() {
    let (r, elapsed) = example1_100();
    let s = r.curve("scheduled").unwrap();
    let (k_worst, worst) = (100..=2000)
        .map(|k| (k, s.mse_mean[k] / s.f_k[k].unwrap()))
        .fold((0, 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    let target = s.f_k[2000].unwrap().sqrt() / 10.0;
    let rel = s.relerr_median[2000];
    let factor = (rel / target).max(target / rel);
    let pass = worst <= 1.1 && factor <= 2.0;
    report(
        4,
        pass,
        &format!(
            "{} trials: max mean/f(k) = {worst:.4} at k = {k_worst} (<= 1.1); median relerr(2000) = {rel:.5} vs sqrt(f)/||x|| = {target:.5}, factor {factor:.3} (<= 2)",
            r.x_norm2.len()
        ),
        *elapsed,
        Some(10.0),
    );
}

#[test]
fn criterion_5_horizon_breakthrough() {
    let (r, elapsed) = example1_100();
    let s = r.curve("scheduled").unwrap();
    let u = r.curve("constant_1").unwrap();
    let ratio = u.mse_mean[2000] / s.mse_mean[2000];
    let tail = &u.mse_mean[1500..=2000];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    let horizon = needell_horizon(0.05, 0.01);
    let off = (plateau / horizon).max(horizon / plateau);
    let pass = ratio >= 3.0 && off <= 3.0;
    report(
        5,
        pass,
        &format!(
            "unit/scheduled at k = 2000: {ratio:.2} (>= 3); unit plateau (k 1500..2000) {plateau:.4} vs horizon {horizon}, factor {off:.2} (<= 3)"
        ),
        *elapsed,
        None,
    );
}

#[test]
fn criterion_6_small_sigma_scaling() {
    let t = Instant::now();
    let dev = |sigma: f64| {
        let bp = BoundParams::new(0.01, sigma * sigma, 100.0).unwrap();
        (bound_f(200.0, &bp).unwrap() / asymptote_small_sigma(200.0, 0.01, 100.0) - 1.0).abs()
    };
    let (d3, d4) = (dev(1e-3), dev(1e-4));
    let ratio = d3 / d4;
    report(
        6,
        (50.0..=200.0).contains(&ratio),
        &format!(
            "deviation {d3:.3e} at sigma 1e-3, {d4:.3e} at 1e-4, ratio {ratio:.2} (in [50, 200])"
        ),
        t.elapsed(),
        None,
    );
}

#[test]
fn criterion_7_large_k_convergence() {
    let t = Instant::now();
    let bp = BoundParams::new(0.01, 0.0025, 100.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [1e4f64, 1e5, 1e6] {
        let f = bound_f(k, &bp).unwrap();
        let dev = (f * bp.eta * bp.eta * k / bp.sigma2 - 1.0).abs();
        let limit = 10.0 * k.ln() / k;
        pass &= dev <= limit;
        parts.push(format!("k = {k:e}: {dev:.3e} vs {limit:.3e}"));
    }
    report(7, pass, &parts.join(", "), t.elapsed(), None);
}

#[test]
fn criterion_8_isotropic_rows() {
    let t = Instant::now();
    let a = gen_dense_sphere(&EnsembleSpec {
        kind: EnsembleKind::DenseSphere,
        m: 5000,
        n: 50,
        s: None,
        sigma: 0.0,
        seed: 8,
    })
    .unwrap();
    let mut r = rng::from_seed(80);
    let mut g = rng::Gaussian::new();
    let mut worst_z: f64 = 0.0;
    for _ in 0..20 {
        let mut z = vec![0.0; 50];
        g.fill(&mut r, &mut z);
        let est = empirical_eta(&a, &z).unwrap();
        worst_z = worst_z.max((est.mean - 1.0 / 50.0).abs() / est.std_error);
    }
    report(
        8,
        worst_z <= 3.0,
        &format!("worst |mean - 1/50| over 20 unit vectors = {worst_z:.2} standard errors (<= 3)"),
        t.elapsed(),
        Some(2.0),
    );
}

#[test]
fn criterion_9_sampler() {
    let t = Instant::now();
    let w = [1.0, 2.0, 3.0, 4.0];
    let passes = 100_000u64;
    let mut counts = [0usize; 4];
    let mut permutations = true;
    for seed in 0..passes {
        let order: Vec<usize> = RowSampler::new(&w, seed).unwrap().collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        permutations &= sorted == [0, 1, 2, 3];
        counts[order[0]] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(w)
        .map(|(&c, wi)| {
            let e = passes as f64 * wi / 10.0;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let weights: Vec<f64> = (1..=50).map(|i| i as f64).collect();
    let a: Vec<usize> = RowSampler::new(&weights, 42).unwrap().collect();
    let b: Vec<usize> = RowSampler::new(&weights, 42).unwrap().collect();
    let first: Vec<usize> = a.iter().copied().take(8).collect();
    let frozen = FROZEN_SEED42_PREFIX;
    let identical = a == b && first == frozen;
    // chi-square, 3 dof, upper 1e-3 quantile
    let pass = permutations && chi2 < 16.26624 && identical;
    report(
        9,
        pass,
        &format!(
            "all passes permutations: {permutations}; first-draw chi2 = {chi2:.3} (< 16.266); seed-42 stream reproducible and matches frozen prefix: {identical} ({first:?})"
        ),
        t.elapsed(),
        None,
    );
}

const FROZEN_SEED42_PREFIX: [usize; 8] = [41, 48, 31, 38, 24, 17, 26, 44];

#[test]
fn criterion_10_determinism() {
    let t = Instant::now();
    let cfg = ExperimentConfig::example1();
    let csv = |r: &ExperimentResult| r.curves.iter().map(curve_csv).collect::<Vec<_>>();
    let one = csv(&run_experiment_with_workers(&cfg, 1).unwrap());
    let four = csv(&run_experiment_with_workers(&cfg, 4).unwrap());
    let default = csv(&run_experiment(&cfg).unwrap());
    let pass = one == four && one == default;
    report(
        10,
        pass,
        &format!("Example 1 CSVs byte-identical across 1, 4 and default workers: {pass}"),
        t.elapsed(),
        None,
    );
}
