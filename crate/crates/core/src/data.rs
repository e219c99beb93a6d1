//! Datasets for the logistic-regression evidence experiment.
//!
//! The default input is the numeric variant of the German credit table:
//! whitespace-separated integer-coded rows, 24 predictors followed by the
//! class code (1 = good, 2 = bad). The file is not shipped with the crate;
//! its path comes from the CLI or the `ADASTRAT_GERMAN_PATH` variable.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats::MomentAccumulator;

pub const GERMAN_PATH_ENV: &str = "ADASTRAT_GERMAN_PATH";
/// Optional expected SHA-256 (hex) of the data file; a mismatch only logs a warning.
pub const GERMAN_SHA256_ENV: &str = "ADASTRAT_GERMAN_SHA256";
pub const GERMAN_ROWS: usize = 1000;
pub const GERMAN_PREDICTORS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × s`, each column standardized to mean 0 and sample variance 1.
    pub design: DMatrix<f64>,
    /// `±1` labels.
    pub labels: Vec<f64>,
    pub source_path: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn s(&self) -> usize {
        self.design.ncols()
    }

    /// Appends an unstandardized column of ones.
    pub fn with_intercept(mut self) -> Self {
        let n = self.n();
        let s = self.s();
        self.design = self.design.insert_column(s, 1.0);
        debug_assert_eq!(self.design.nrows(), n);
        self
    }
}

/// Resolves the data path from an explicit value or the environment.
pub fn resolve_german_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(GERMAN_PATH_ENV).map(PathBuf::from))
}

fn standardize_columns(design: &mut DMatrix<f64>) -> Result<()> {
    for (j, mut col) in design.column_iter_mut().enumerate() {
        let acc: MomentAccumulator = col.iter().copied().collect();
        let sd = acc.variance().sqrt();
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::Degenerate(format!(
                "column {} has zero spread",
                j + 1
            )));
        }
        for v in col.iter_mut() {
            *v = (*v - acc.mean()) / sd;
        }
    }
    Ok(())
}

/// Loads the numeric German credit table and keeps the first `s` predictors.
pub fn load_german_numeric(path: &Path, s: usize) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if let Ok(expected) = std::env::var(GERMAN_SHA256_ENV) {
        let digest = Sha256::digest(&bytes);
        let actual: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        if !actual.eq_ignore_ascii_case(expected.trim()) {
            log::warn!(
                "{}: sha256 {actual} does not match expected {}",
                path.display(),
                expected.trim()
            );
        }
    }
    let text = String::from_utf8_lossy(&bytes);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(i + 1, format!("non-numeric field {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if fields.len() < 2 {
            return Err(parse_err(
                i + 1,
                "need at least one predictor and a class".into(),
            ));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    i + 1,
                    format!("expected {w} fields, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        rows.push(fields);
    }
    let width = width.ok_or_else(|| parse_err(1, "file has no rows".into()))?;
    let available = width - 1;
    if s == 0 || s > available {
        return Err(Error::arg(format!(
            "requested {s} predictors but the file has {available}"
        )));
    }
    if rows.len() != GERMAN_ROWS || available != GERMAN_PREDICTORS {
        log::warn!(
            "{}: {} rows x {available} predictors differs from the expected {GERMAN_ROWS} x {GERMAN_PREDICTORS}",
            path.display(),
            rows.len()
        );
    }
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        labels.push(match row[available] {
            1.0 => 1.0,
            2.0 => -1.0,
            c => return Err(parse_err(i + 1, format!("class code {c} is not 1 or 2"))),
        });
    }
    let mut design = DMatrix::from_fn(rows.len(), s, |i, j| rows[i][j]);
    standardize_columns(&mut design)?;
    Ok(Dataset {
        design,
        labels,
        source_path: path.display().to_string(),
    })
}

/// Standard-normal design with labels drawn from the logistic model at `beta`.
pub fn synthetic_logistic(n: usize, beta: &[f64], seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::arg("synthetic dataset needs at least two rows"));
    }
    if beta.is_empty() {
        return Err(Error::arg("beta must have at least one coefficient"));
    }
    let s = beta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = DMatrix::from_fn(n, s, |_, _| rng.sample::<f64, _>(StandardNormal));
    let labels = (0..n)
        .map(|i| {
            let eta: f64 = (0..s).map(|j| design[(i, j)] * beta[j]).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(Dataset {
        design,
        labels,
        source_path: format!("synthetic(n={n}, seed={seed})"),
    })
}
