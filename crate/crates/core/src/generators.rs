//! Synthetic problems: sphere-normalised random rows, Gaussian signals and
//! row-scaled noise, plus the on-disk problem format.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Row, RowMatrix};
use crate::rng::{self, Gaussian, Purpose, StreamRng};
use crate::solver::{Problem, SolverError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid ensemble: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `s` nonzeros per row at uniformly random columns, values uniform on
    /// the unit sphere of dimension `s`.
    SparseSphere,
    /// Rows uniform on the unit sphere in `R^n`.
    DenseSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `ε_i ~ N(0, σ²||a_i||²)`.
    #[default]
    Normal,
    /// `ε_i = ±σ||a_i||` with equal probability.
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub m: usize,
    pub n: usize,
    /// Nonzeros per row; required for the sparse ensemble.
    #[serde(default)]
    pub s: Option<usize>,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleSpec {
    /// The sparse ensemble `m = 2000, n = 100, s = 10, σ = 0.05`.
    pub fn example1(seed: u64) -> Self {
        Self {
            kind: EnsembleKind::SparseSphere,
            m: 2000,
            n: 100,
            s: Some(10),
            sigma: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::BadSpec(m));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!(
                "sigma = {} must be finite and non-negative",
                self.sigma
            ));
        }
        if self.kind == EnsembleKind::SparseSphere {
            match self.s {
                None => return bad("sparse-sphere needs s".into()),
                Some(s) if s < 1 || s > self.n => {
                    return bad(format!("s = {s} must lie in 1..={}", self.n));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Uniform point on the unit sphere in `R^d`.
fn sphere_point(rng: &mut StreamRng, gauss: &mut Gaussian, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    loop {
        gauss.fill(rng, &mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Uniform random `s`-subset of `0..n` (Floyd's algorithm), sorted.
fn random_subset(rng: &mut StreamRng, n: usize, s: usize, mark: &mut [bool]) -> Vec<usize> {
    let mut picked = Vec::with_capacity(s);
    for j in n - s..n {
        let t = rng.random_range(0..=j);
        let choice = if mark[t] { j } else { t };
        mark[choice] = true;
        picked.push(choice);
    }
    for &c in &picked {
        mark[c] = false;
    }
    picked.sort_unstable();
    picked
}

pub fn gen_sparse_sphere(spec: &EnsembleSpec) -> Result<RowMatrix, GenError> {
    spec.validate()?;
    if spec.kind != EnsembleKind::SparseSphere {
        return Err(GenError::BadSpec("expected a sparse-sphere spec".into()));
    }
    let s = spec.s.expect("validated");
    let mut rng = rng::from_seed(spec.seed);
    let mut gauss = Gaussian::new();
    let mut mark = vec![false; spec.n];
    let rows = (0..spec.m)
        .map(|_| {
            let idx = random_subset(&mut rng, spec.n, s, &mut mark);
            let val = sphere_point(&mut rng, &mut gauss, s);
            if s == spec.n {
                Row::Dense(val)
            } else {
                Row::Sparse { idx, val }
            }
        })
        .collect();
    Ok(RowMatrix::from_rows(spec.n, rows)?)
}

pub fn gen_dense_sphere(spec: &EnsembleSpec) -> Result<RowMatrix, GenError> {
    spec.validate()?;
    if spec.kind != EnsembleKind::DenseSphere {
        return Err(GenError::BadSpec("expected a dense-sphere spec".into()));
    }
    let mut rng = rng::from_seed(spec.seed);
    let mut gauss = Gaussian::new();
    let rows = (0..spec.m)
        .map(|_| Row::Dense(sphere_point(&mut rng, &mut gauss, spec.n)))
        .collect();
    Ok(RowMatrix::from_rows(spec.n, rows)?)
}

/// Dispatches on `spec.kind`.
pub fn gen_matrix(spec: &EnsembleSpec) -> Result<RowMatrix, GenError> {
    match spec.kind {
        EnsembleKind::SparseSphere => gen_sparse_sphere(spec),
        EnsembleKind::DenseSphere => gen_dense_sphere(spec),
    }
}

/// `n` independent standard normal entries.
pub fn gen_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::from_seed(seed);
    let mut out = vec![0.0; n];
    Gaussian::new().fill(&mut rng, &mut out);
    out
}

/// `b = Ax`, `b̃ = b + ε` with normal `ε_i` of standard deviation `σ||a_i||`.
pub fn make_problem(a: RowMatrix, x: Vec<f64>, sigma: f64, seed: u64) -> Result<Problem, GenError> {
    make_problem_with_noise(a, x, sigma, seed, NoiseKind::Normal)
}

pub fn make_problem_with_noise(
    a: RowMatrix,
    x: Vec<f64>,
    sigma: f64,
    seed: u64,
    noise: NoiseKind,
) -> Result<Problem, GenError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SolverError::BadSigma(sigma).into());
    }
    let b = a.mul_vec(&x)?;
    let mut b_tilde = b.clone();
    if sigma > 0.0 {
        let mut rng = rng::from_seed(seed);
        let mut gauss = Gaussian::new();
        for (bt, r2) in b_tilde.iter_mut().zip(a.row_norms2()) {
            let unit = match noise {
                NoiseKind::Normal => gauss.sample(&mut rng),
                NoiseKind::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            *bt += sigma * r2.sqrt() * unit;
        }
    }
    Ok(Problem::from_parts(a, Some(x), Some(b), b_tilde, sigma)?)
}

/// Matrix, signal and noise for `spec`, with the signal and noise seeds
/// derived from `spec.seed`.
pub fn generate_problem(spec: &EnsembleSpec, noise: NoiseKind) -> Result<Problem, GenError> {
    let a = gen_matrix(spec)?;
    let x = gen_signal(spec.n, rng::derive_seed(spec.seed, 0, Purpose::Signal));
    make_problem_with_noise(
        a,
        x,
        spec.sigma,
        rng::derive_seed(spec.seed, 0, Purpose::Noise),
        noise,
    )
}

/// JSON sidecar stored next to a matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    /// Matrix file name, relative to the sidecar's directory.
    pub matrix: String,
    pub x_true: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub b_tilde: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseKind>,
}

/// Writes `<dir>/<stem>.mat` and `<dir>/<stem>.json`; returns both paths.
pub fn write_problem(
    dir: &Path,
    stem: &str,
    p: &Problem,
    seed: Option<u64>,
    noise: Option<NoiseKind>,
) -> Result<(PathBuf, PathBuf), GenError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GenError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mat_name = format!("{stem}.mat");
    let mat_path = dir.join(&mat_name);
    let file = fs::File::create(&mat_path).map_err(io(&mat_path))?;
    p.a.write_text(BufWriter::new(file)).map_err(|e| match e {
        LinalgError::Io(source) => GenError::Io {
            path: mat_path.clone(),
            source,
        },
        other => other.into(),
    })?;

    let side = ProblemFile {
        matrix: mat_name,
        x_true: p.x_true.clone(),
        b: p.b.clone(),
        b_tilde: p.b_tilde.clone(),
        sigma: p.sigma,
        seed,
        noise,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let file = fs::File::create(&json_path).map_err(io(&json_path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &side).map_err(|source| GenError::Json {
        path: json_path.clone(),
        source,
    })?;
    Ok((mat_path, json_path))
}

/// Loads a problem from its JSON sidecar.
pub fn read_problem(sidecar: &Path) -> Result<(Problem, ProblemFile), GenError> {
    let file = fs::File::open(sidecar).map_err(|source| GenError::Io {
        path: sidecar.to_path_buf(),
        source,
    })?;
    let side: ProblemFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| GenError::Json {
            path: sidecar.to_path_buf(),
            source,
        })?;
    let mat_path = sidecar
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&side.matrix);
    let file = fs::File::open(&mat_path).map_err(|source| GenError::Io {
        path: mat_path.clone(),
        source,
    })?;
    let a = RowMatrix::read_text(BufReader::new(file))?;
    let p = Problem::from_parts(
        a,
        side.x_true.clone(),
        side.b.clone(),
        side.b_tilde.clone(),
        side.sigma,
    )?;
    Ok((p, side))
}
