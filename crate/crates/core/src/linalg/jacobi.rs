use super::LinalgError;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric row-major `n × n` matrix by cyclic Jacobi
/// rotations. `a` is overwritten (it ends up nearly diagonal).
///
/// A pair `(p, q)` is rotated while `|a_pq| > tol·sqrt(|a_pp a_qq|)`, which
/// keeps relative accuracy for small eigenvalues of positive definite input.
pub fn symmetric_eigenvalues(a: &mut [f64], n: usize, tol: f64) -> Result<Vec<f64>, LinalgError> {
    assert_eq!(a.len(), n * n, "matrix storage does not match n");
    let tol = tol.max(f64::EPSILON);
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    // entries this small are treated as zero regardless of the diagonal
    let floor = f64::EPSILON * f64::EPSILON * scale;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= floor || apq.abs() <= tol * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
        if !rotated {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
    }
    Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS })
}
