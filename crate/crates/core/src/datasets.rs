//! Synthetic ill-conditioned datasets and LIBSVM-format ingestion.
//!
//! Synthetic design matrices are `X = U Σ Vᵀ` with orthonormal factors drawn
//! from seeded Gaussians (QR with sign-fixed diagonal) and singular values
//! linearly spaced from `κ` down to 1, so `cond(X) = κ` up to rounding and
//! the data scale grows with the conditioning. Labels come from a noisy
//! linear separator: `yᵢ = 1[xᵢᵀw⋆ + ξᵢ > 0]` with unit Gaussian direction
//! `w⋆` and margin noise `ξᵢ ~ N(0, (0.02κ)²)`, about 5% of the typical
//! margin. That keeps the problems genuinely non-separable while the large
//! gradients early on exercise the adaptive forcing.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::numkit::DenseMatrix;
use crate::rng::{RngSeed, SplitMix64};

/// Margin-noise standard deviation for synthetic labels, as a fraction of
/// the top singular value.
pub const LABEL_NOISE_FRAC: f64 = 0.02;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("kappa must be > 1, got {0}")]
    BadKappa(f64),
    #[error("need n >= d >= 2, got n={n}, d={d}")]
    BadShape { n: usize, d: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("non-binary label set {0:?}; expected {{0,1}}, {{-1,+1}} or {{1,2}}")]
    NonBinaryLabels(Vec<String>),
    #[error("file contains no data lines")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSource {
    Synthetic,
    File,
}

/// Dense design matrix with binary labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DenseMatrix<f64>,
    pub y: Vec<u8>,
    pub kappa: Option<f64>,
    pub source: DatasetSource,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

/// Orthonormalizes a seeded Gaussian matrix by QR, negating columns so the
/// corresponding R diagonal is positive (makes the factor unique).
fn random_orthonormal(rows: usize, cols: usize, rng: &mut SplitMix64) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            a[(i, j)] = rng.next_gaussian();
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Singular values linearly spaced from `kappa` down to 1.
fn linear_singular_values(d: usize, kappa: f64) -> Vec<f64> {
    (0..d)
        .map(|i| kappa - (kappa - 1.0) * i as f64 / (d as f64 - 1.0))
        .collect()
}

/// Generates a synthetic classification dataset with `cond(X) = kappa`.
/// Deterministic in the seed.
pub fn synth_dataset(n: usize, d: usize, kappa: f64, seed: RngSeed) -> Result<Dataset, DatasetError> {
    // κ within 1e-9 of 1 is indistinguishable from a degenerate spectrum at
    // the verification tolerance, so it is rejected along with κ ≤ 1.
    if !(kappa > 1.0 + 1e-9) || !kappa.is_finite() {
        return Err(DatasetError::BadKappa(kappa));
    }
    if n < d || d < 2 {
        return Err(DatasetError::BadShape { n, d });
    }
    let mut rng = SplitMix64::new(seed);
    let u = random_orthonormal(n, d, &mut rng);
    let v = random_orthonormal(d, d, &mut rng);
    let sigma = linear_singular_values(d, kappa);

    // X = U Σ Vᵀ: scale columns of U by σ, then multiply by Vᵀ.
    let mut us = u;
    for (j, &s) in sigma.iter().enumerate() {
        for i in 0..n {
            us[(i, j)] *= s;
        }
    }
    let x = &us * v.transpose();

    let w_star: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
    let w_norm = w_star.iter().map(|w| w * w).sum::<f64>().sqrt();
    let noise_std = LABEL_NOISE_FRAC * kappa;
    let y: Vec<u8> = (0..n)
        .map(|i| {
            let margin: f64 = (0..d).map(|j| x[(i, j)] * w_star[j]).sum::<f64>() / w_norm;
            u8::from(margin + noise_std * rng.next_gaussian() > 0.0)
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|j| x[(i, j)]).collect())
        .collect();
    Ok(Dataset {
        x: DenseMatrix::from_rows(rows),
        y,
        kappa: Some(kappa),
        source: DatasetSource::Synthetic,
    })
}

fn map_labels(raw: &[f64]) -> Result<Vec<u8>, DatasetError> {
    let subset_of = |allowed: &[f64]| raw.iter().all(|l| allowed.contains(l));
    if subset_of(&[0.0, 1.0]) {
        Ok(raw.iter().map(|&l| l as u8).collect())
    } else if subset_of(&[-1.0, 1.0]) {
        Ok(raw.iter().map(|&l| u8::from(l > 0.0)).collect())
    } else if subset_of(&[1.0, 2.0]) {
        Ok(raw.iter().map(|&l| u8::from(l > 1.5)).collect())
    } else {
        let mut distinct: Vec<String> = raw.iter().map(|l| l.to_string()).collect();
        distinct.sort();
        distinct.dedup();
        Err(DatasetError::NonBinaryLabels(distinct))
    }
}

/// Parses LIBSVM text: `<label> <index>:<value> ...` per line, 1-based
/// strictly increasing indices, `#` comments ignored to end of line.
/// The feature count is the maximum index seen.
pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    parse_libsvm_with_dim(path, None)
}

/// Like [`parse_libsvm`] but with an explicit feature-count override for
/// files whose trailing features are all zero.
pub fn parse_libsvm_with_dim(
    path: impl AsRef<Path>,
    dim: Option<usize>,
) -> Result<Dataset, DatasetError> {
    let content = std::fs::read_to_string(path)?;
    parse_libsvm_str(&content, dim)
}

pub fn parse_libsvm_str(content: &str, dim: Option<usize>) -> Result<Dataset, DatasetError> {
    let mut raw_labels = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw_line) in content.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let lineno = lineno + 1;
        let label: f64 = label_tok.parse().map_err(|_| DatasetError::MalformedLine {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        let mut row = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or(DatasetError::MalformedLine {
                line: lineno,
                msg: format!("expected index:value, got {tok:?}"),
            })?;
            let idx: i64 = idx_str.parse().map_err(|_| DatasetError::MalformedLine {
                line: lineno,
                msg: format!("bad index {idx_str:?}"),
            })?;
            if idx <= 0 {
                return Err(DatasetError::MalformedLine {
                    line: lineno,
                    msg: format!("index must be >= 1, got {idx}"),
                });
            }
            let idx = idx as usize;
            if idx <= prev_index {
                return Err(DatasetError::MalformedLine {
                    line: lineno,
                    msg: format!("indices must be strictly increasing, got {idx} after {prev_index}"),
                });
            }
            let val: f64 = val_str.parse().map_err(|_| DatasetError::MalformedLine {
                line: lineno,
                msg: format!("bad value {val_str:?}"),
            })?;
            prev_index = idx;
            max_index = max_index.max(idx);
            row.push((idx, val));
        }
        raw_labels.push(label);
        sparse_rows.push(row);
    }

    if sparse_rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    let y = map_labels(&raw_labels)?;
    let d = dim.unwrap_or(max_index).max(max_index);
    let rows: Vec<Vec<f64>> = sparse_rows
        .into_iter()
        .map(|entries| {
            let mut row = vec![0.0; d];
            for (idx, val) in entries {
                row[idx - 1] = val;
            }
            row
        })
        .collect();
    Ok(Dataset {
        x: DenseMatrix::from_rows(rows),
        y,
        kappa: None,
        source: DatasetSource::File,
    })
}

/// Writes a dataset in LIBSVM format (labels as -1/+1, zero entries
/// omitted, shortest round-trip float formatting).
pub fn write_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    std::fs::write(path, libsvm_string(ds))?;
    Ok(())
}

pub fn libsvm_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.n_samples() {
        let label = if ds.y[i] == 1 { "+1" } else { "-1" };
        out.push_str(label);
        for j in 0..ds.n_features() {
            let v = ds.x.get(i, j);
            if v != 0.0 {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}
