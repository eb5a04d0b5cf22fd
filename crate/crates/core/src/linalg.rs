//! Row-oriented matrix storage and the few dense routines the solver needs.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

mod jacobi;

pub use jacobi::symmetric_eigenvalues;

/// Sparse rows denser than this are stored densely.
pub const DENSE_FALLBACK: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jacobi eigenvalue iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One stored row.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Dense(Vec<f64>),
    /// Strictly increasing column indices with matching values.
    Sparse {
        idx: Vec<usize>,
        val: Vec<f64>,
    },
}

impl Row {
    pub fn dot(&self, v: &[f64]) -> f64 {
        match self {
            Row::Dense(r) => r.iter().zip(v).map(|(a, b)| a * b).sum(),
            Row::Sparse { idx, val } => idx.iter().zip(val).map(|(&j, a)| a * v[j]).sum(),
        }
    }

    /// `x += coeff * row`, touching only stored entries.
    pub fn axpy(&self, coeff: f64, x: &mut [f64]) {
        match self {
            Row::Dense(r) => {
                for (xi, a) in x.iter_mut().zip(r) {
                    *xi += coeff * a;
                }
            }
            Row::Sparse { idx, val } => {
                for (&j, a) in idx.iter().zip(val) {
                    x[j] += coeff * a;
                }
            }
        }
    }

    pub fn norm2(&self) -> f64 {
        let vals = match self {
            Row::Dense(r) => r.as_slice(),
            Row::Sparse { val, .. } => val.as_slice(),
        };
        vals.iter().map(|a| a * a).sum()
    }

    pub fn nnz(&self) -> usize {
        match self {
            Row::Dense(r) => r.len(),
            Row::Sparse { idx, .. } => idx.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Row::Sparse { .. })
    }

    /// `(column, value)` pairs of the stored entries.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            Row::Dense(r) => Box::new(r.iter().copied().enumerate()),
            Row::Sparse { idx, val } => Box::new(idx.iter().copied().zip(val.iter().copied())),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (j, a) in self.entries() {
            out[j] = a;
        }
        out
    }

    fn validate(&self, row: usize, n: usize) -> Result<(), LinalgError> {
        let bad = |reason: String| LinalgError::BadRow { row, reason };
        match self {
            Row::Dense(r) => {
                if r.len() != n {
                    return Err(bad(format!(
                        "dense row has {} entries, expected {n}",
                        r.len()
                    )));
                }
            }
            Row::Sparse { idx, val } => {
                if idx.len() != val.len() {
                    return Err(bad("index and value lengths differ".into()));
                }
                if idx.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad("sparse indices must be strictly increasing".into()));
                }
                if let Some(&last) = idx.last() {
                    if last >= n {
                        return Err(bad(format!("column {last} out of range for n = {n}")));
                    }
                }
            }
        }
        if self.entries().any(|(_, a)| !a.is_finite()) {
            return Err(bad("non-finite entry".into()));
        }
        Ok(())
    }
}

/// An `m × n` matrix stored row by row with cached squared row norms.
///
/// Immutable after construction; every row has positive norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    n: usize,
    rows: Vec<Row>,
    row_norm2: Vec<f64>,
}

impl RowMatrix {
    pub fn from_rows(n: usize, rows: Vec<Row>) -> Result<Self, LinalgError> {
        let mut row_norm2 = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            row.validate(i, n)?;
            let r2 = row.norm2();
            if r2.is_nan() || r2 <= 0.0 {
                return Err(LinalgError::ZeroRow { row: i });
            }
            row_norm2.push(r2);
        }
        Ok(Self { n, rows, row_norm2 })
    }

    pub fn from_dense_rows(n: usize, rows: Vec<Vec<f64>>) -> Result<Self, LinalgError> {
        Self::from_rows(n, rows.into_iter().map(Row::Dense).collect())
    }

    /// Builds from `(column, value)` lists. Entries need not be sorted;
    /// duplicate columns are rejected. Rows denser than [`DENSE_FALLBACK`]
    /// are stored densely.
    pub fn from_sparse_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, LinalgError> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, mut entries)| {
                entries.sort_by_key(|e| e.0);
                if entries.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(LinalgError::BadRow {
                        row: i,
                        reason: "duplicate column index".into(),
                    });
                }
                let (idx, val): (Vec<usize>, Vec<f64>) = entries.into_iter().unzip();
                let row = Row::Sparse { idx, val };
                if n > 0 && (row.nnz() as f64) > DENSE_FALLBACK * n as f64 {
                    row.validate(i, n)?;
                    Ok(Row::Dense(row.to_dense(n)))
                } else {
                    Ok(row)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(n, rows)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| Row::Sparse {
                idx: vec![i],
                val: vec![1.0],
            })
            .collect();
        Self::from_rows(n, rows).expect("identity rows are valid")
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> Result<&Row, LinalgError> {
        self.rows.get(i).ok_or(LinalgError::RowOutOfRange {
            index: i,
            rows: self.rows.len(),
        })
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter()
    }

    /// Cached `||a_i||²` for every row.
    pub fn row_norms2(&self) -> &[f64] {
        &self.row_norm2
    }

    pub fn row_norm2(&self, i: usize) -> Result<f64, LinalgError> {
        self.row(i)?;
        Ok(self.row_norm2[i])
    }

    fn check_len(&self, v: &[f64]) -> Result<(), LinalgError> {
        if v.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `<a_i, v>`.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> Result<f64, LinalgError> {
        let row = self.row(i)?;
        self.check_len(v)?;
        Ok(row.dot(v))
    }

    /// `x += coeff * a_i`.
    pub fn axpy_row(&self, x: &mut [f64], i: usize, coeff: f64) -> Result<(), LinalgError> {
        let row = self.row(i)?;
        self.check_len(x)?;
        row.axpy(coeff, x);
        Ok(())
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.check_len(v)?;
        Ok(self.rows.iter().map(|r| r.dot(v)).collect())
    }

    pub fn frobenius_norm2(&self) -> f64 {
        self.row_norm2.iter().sum()
    }

    /// Dense row-major `AᵀA`.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for row in &self.rows {
            let entries: Vec<(usize, f64)> = row.entries().filter(|e| e.1 != 0.0).collect();
            for &(p, ap) in &entries {
                for &(q, aq) in &entries {
                    if q >= p {
                        g[p * n + q] += ap * aq;
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                g[p * n + q] = g[q * n + p];
            }
        }
        g
    }

    /// Smallest singular value, from the smallest eigenvalue of `AᵀA`.
    ///
    /// Returns (approximately) zero for rank-deficient or wide matrices.
    pub fn min_singular_value(&self, tol: f64) -> Result<f64, LinalgError> {
        Ok(self.min_gram_eigenvalue(tol)?.sqrt())
    }

    /// `η = σ_min(A)² / ||A||_F²`.
    pub fn eta(&self, tol: f64) -> Result<f64, LinalgError> {
        Ok(self.min_gram_eigenvalue(tol)? / self.frobenius_norm2())
    }

    fn min_gram_eigenvalue(&self, tol: f64) -> Result<f64, LinalgError> {
        if self.n == 0 {
            return Ok(0.0);
        }
        let mut g = self.gram();
        let eig = symmetric_eigenvalues(&mut g, self.n, tol)?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min).max(0.0))
    }

    /// Writes the plain-text matrix format.
    ///
    /// ```text
    /// m n dense|sparse
    /// <row 0>
    /// ...
    /// ```
    ///
    /// Dense mode writes `n` whitespace-separated values per row. Sparse mode
    /// writes `col:value` pairs; dense-stored rows are written with all `n`
    /// columns so they reload densely. Values use shortest round-trip
    /// formatting, so a write/read cycle is bit-exact.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), LinalgError> {
        let sparse = self.rows.iter().any(Row::is_sparse);
        let mode = if sparse { "sparse" } else { "dense" };
        writeln!(w, "{} {} {}", self.rows(), self.n, mode)?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (k, (j, a)) in row.entries().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                if sparse {
                    write!(line, "{j}:{a:?}").unwrap();
                } else {
                    write!(line, "{a:?}").unwrap();
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, LinalgError> {
        let fmt = |msg: String| LinalgError::Format(msg);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| fmt("empty file".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [m, n, mode] = parts.as_slice() else {
            return Err(fmt(format!(
                "bad header {header:?}; expected `m n dense|sparse`"
            )));
        };
        let m: usize = m.parse().map_err(|_| fmt(format!("bad row count {m:?}")))?;
        let n: usize = n
            .parse()
            .map_err(|_| fmt(format!("bad column count {n:?}")))?;
        let sparse = match *mode {
            "dense" => false,
            "sparse" => true,
            other => return Err(fmt(format!("unknown mode {other:?}"))),
        };
        let parse_f = |s: &str, i: usize| {
            s.parse::<f64>()
                .map_err(|_| fmt(format!("row {i}: bad value {s:?}")))
        };
        let mut dense_rows = Vec::new();
        let mut sparse_rows = Vec::new();
        for i in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| fmt(format!("expected {m} rows, found {i}")))??;
            if sparse {
                let entries = line
                    .split_whitespace()
                    .map(|tok| {
                        let (j, a) = tok.split_once(':').ok_or_else(|| {
                            fmt(format!("row {i}: expected col:value, got {tok:?}"))
                        })?;
                        let j: usize = j
                            .parse()
                            .map_err(|_| fmt(format!("row {i}: bad column {j:?}")))?;
                        Ok((j, parse_f(a, i)?))
                    })
                    .collect::<Result<Vec<_>, LinalgError>>()?;
                sparse_rows.push(entries);
            } else {
                let vals = line
                    .split_whitespace()
                    .map(|tok| parse_f(tok, i))
                    .collect::<Result<Vec<_>, _>>()?;
                dense_rows.push(vals);
            }
        }
        if let Some(extra) = lines.next() {
            if !extra?.trim().is_empty() {
                return Err(fmt(format!("more than {m} rows")));
            }
        }
        if sparse {
            Self::from_sparse_rows(n, sparse_rows)
        } else {
            Self::from_dense_rows(n, dense_rows)
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `||a - b||²`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
