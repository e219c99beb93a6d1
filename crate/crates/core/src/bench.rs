//! RMSE sweeps over `N`, CSV output and convergence-slope fitting.
//!
//! Every `(estimator, N)` cell runs `replicates` independent estimates with
//! seeds `derive_seed(master_seed, [estimator, N, i])`. Cells are processed
//! in a fixed order and replicates are collected by index, so the table is
//! byte-identical across machines and thread counts. Wall time is measured
//! only when `record_timing` is set; otherwise the column holds 0.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_german_numeric, resolve_german_path, GERMAN_PATH_ENV};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_adastrat, estimate_adastrat_with_variance, estimate_haber1, estimate_mc,
    estimate_oracle_stratified, haber_cells_per_axis, EstimateReport, EstimatorKind,
};
use crate::integrands::{
    fit_laplace, linear, marginal_likelihood_integrand, sine_counterexample, toy, IntegrandSpec,
};
use crate::replicate::{derive_seed, map};
use crate::stats::{summarize_replicates, MomentAccumulator, ReferenceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Toy,
    Logistic,
    Linear,
    Sine,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "toy" => Ok(Experiment::Toy),
            "logistic" => Ok(Experiment::Logistic),
            "linear" => Ok(Experiment::Linear),
            "sine" => Ok(Experiment::Sine),
            other => Err(Error::arg(format!(
                "unknown experiment {other:?} (expected toy, logistic, linear or sine)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub experiment: Experiment,
    pub s: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub replicates: usize,
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    pub data_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    /// Explicit Haber cells-per-axis values; `N = j^s` for each. When empty,
    /// Haber runs at every `k` in the sweep with `2^k` a perfect `s`-th power.
    pub haber_per_axis: Vec<u64>,
    /// Weights of the linear experiment (default: all ones).
    pub lambda: Option<Vec<f64>>,
    /// Slope of the sine experiment's linear term.
    pub sine_lambda: f64,
    pub prior_sd: f64,
    pub intercept: bool,
    /// Write measured wall time per cell (breaks byte-identical output); when false the column is 0.
    pub record_timing: bool,
}

impl BenchConfig {
    pub fn new(experiment: Experiment, s: usize, k_min: u32, k_max: u32) -> Self {
        BenchConfig {
            experiment,
            s,
            k_min,
            k_max,
            replicates: 256,
            estimators: vec![EstimatorKind::Mc, EstimatorKind::Adastrat],
            master_seed: 42,
            data_path: None,
            output_path: None,
            haber_per_axis: Vec::new(),
            lambda: None,
            sine_lambda: 1.0,
            prior_sd: 5.0,
            intercept: false,
            record_timing: false,
        }
    }

    /// Sample sizes to run for `estimator`, in increasing order.
    pub fn sizes_for(&self, estimator: EstimatorKind) -> Vec<u64> {
        match estimator {
            EstimatorKind::Haber if !self.haber_per_axis.is_empty() => {
                let mut v: Vec<u64> = self
                    .haber_per_axis
                    .iter()
                    .filter_map(|&j| j.checked_pow(self.s as u32))
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            EstimatorKind::Haber => (self.k_min..=self.k_max)
                .filter(|k| *k > 0 && (*k as usize).is_multiple_of(self.s))
                .map(|k| 1u64 << k)
                .collect(),
            _ => (self.k_min..=self.k_max).map(|k| 1u64 << k).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::arg("s must be at least 1"));
        }
        if self.k_min > self.k_max {
            return Err(Error::arg(format!(
                "kmin {} > kmax {}",
                self.k_min, self.k_max
            )));
        }
        if self.k_max >= 40 {
            return Err(Error::arg("kmax must be below 40"));
        }
        if self.replicates < 2 {
            return Err(Error::arg("at least two replicates are required"));
        }
        if self.estimators.is_empty() {
            return Err(Error::arg("no estimators selected"));
        }
        if self.experiment == Experiment::Sine && self.s != 2 {
            return Err(Error::arg("the sine experiment is two-dimensional (s = 2)"));
        }
        if let Some(l) = &self.lambda {
            if l.len() != self.s {
                return Err(Error::arg(format!(
                    "lambda has {} weights but s = {}",
                    l.len(),
                    self.s
                )));
            }
        }
        for &e in &self.estimators {
            match e {
                EstimatorKind::Oracle if self.experiment == Experiment::Logistic => {
                    return Err(Error::arg(
                        "the oracle estimator needs a closed-form Δ(R), unavailable for the logistic experiment",
                    ))
                }
                EstimatorKind::Haber => {
                    if self.haber_per_axis.iter().any(|&j| j < 2) {
                        return Err(Error::arg("Haber cells per axis must be >= 2"));
                    }
                    if self.sizes_for(e).is_empty() {
                        return Err(Error::arg(format!(
                            "haber needs N = j^s: no k in {}..={} has 2^k a {}-th power; pass explicit --haber-j values",
                            self.k_min, self.k_max, self.s
                        )));
                    }
                }
                EstimatorKind::AdastratVar if self.k_min == 0 => {
                    return Err(Error::arg("adastrat-var needs kmin >= 1"))
                }
                _ => {}
            }
        }
        let mut seeds = HashSet::new();
        for &e in &self.estimators {
            for n in self.sizes_for(e) {
                for i in 0..self.replicates as u64 {
                    if !seeds.insert(cell_seed(self.master_seed, e, n, i)) {
                        return Err(Error::arg(
                            "derived replicate seeds collide; choose another master seed",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds the integrand of the configured experiment (loads data for `logistic`).
    pub fn integrand(&self) -> Result<IntegrandSpec> {
        Ok(match self.experiment {
            Experiment::Toy => toy(self.s),
            Experiment::Linear => linear(self.lambda.clone().unwrap_or_else(|| vec![1.0; self.s])),
            Experiment::Sine => sine_counterexample(self.sine_lambda),
            Experiment::Logistic => {
                let path =
                    resolve_german_path(self.data_path.as_deref()).ok_or_else(|| Error::Io {
                        path: PathBuf::from(format!("${GERMAN_PATH_ENV}")),
                        source: std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "no data file given (use --data or set the environment variable)",
                        ),
                    })?;
                let mut data = load_german_numeric(&path, self.s)?;
                if self.intercept {
                    data = data.with_intercept();
                }
                let fit = fit_laplace(&data.design, &data.labels, self.prior_sd)?;
                marginal_likelihood_integrand(&fit, &data.design, &data.labels, self.prior_sd)?
            }
        })
    }
}

pub fn cell_seed(master: u64, estimator: EstimatorKind, n: u64, replicate: u64) -> u64 {
    derive_seed(master, &[estimator.code(), n, replicate])
}

/// Runs one estimator at sample size `n` (for Haber, `n` must be `j^s`).
pub fn run_estimator(
    f: &IntegrandSpec,
    estimator: EstimatorKind,
    n: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let exponent = || {
        if n.is_power_of_two() {
            Ok(n.trailing_zeros())
        } else {
            Err(Error::arg(format!("{estimator} needs N = 2^k, got {n}")))
        }
    };
    match estimator {
        EstimatorKind::Mc => estimate_mc(f, n, seed),
        EstimatorKind::Haber => estimate_haber1(f, haber_cells_per_axis(n, f.dim())?, seed),
        EstimatorKind::Adastrat => estimate_adastrat(f, exponent()?, None, seed),
        EstimatorKind::AdastratVar => estimate_adastrat_with_variance(f, exponent()?, seed),
        EstimatorKind::Oracle => estimate_oracle_stratified(f, exponent()?, seed),
    }
}

/// One CSV row: an `(estimator, N)` cell aggregated over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub estimator: EstimatorKind,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub total_evals: u64,
    pub replicates: usize,
    pub mean_estimate: f64,
    pub reference: f64,
    pub rmse: f64,
    pub rel_rmse: f64,
    pub mean_var_estimate: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub estimator: EstimatorKind,
    pub n: u64,
    pub reports: Vec<EstimateReport>,
    pub wall_seconds: f64,
}

impl CellResult {
    pub fn estimates(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.estimate).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub cells: Vec<CellResult>,
    pub reference: f64,
    pub reference_kind: ReferenceKind,
    /// See [`IntegrandSpec::log_offset`]; estimates are in scaled units.
    pub log_offset: f64,
}

/// Runs the whole sweep and aggregates one row per cell.
pub fn run_bench(config: &BenchConfig) -> Result<BenchOutput> {
    config.validate()?;
    let f = config.integrand()?;
    run_bench_with(config, &f)
}

/// [`run_bench`] with a caller-supplied integrand of dimension `config.s`.
pub fn run_bench_with(config: &BenchConfig, f: &IntegrandSpec) -> Result<BenchOutput> {
    config.validate()?;
    let mut cells = Vec::new();
    for &estimator in &config.estimators {
        for n in config.sizes_for(estimator) {
            let start = Instant::now();
            let reports = map(config.replicates, |i| {
                run_estimator(
                    f,
                    estimator,
                    n,
                    cell_seed(config.master_seed, estimator, n, i as u64),
                )
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let wall_seconds = if config.record_timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            log::info!("{estimator} N={n}: {:.3}s", start.elapsed().as_secs_f64());
            cells.push(CellResult {
                estimator,
                n,
                reports,
                wall_seconds,
            });
        }
    }
    let (reference, reference_kind) = match f.analytic_integral() {
        Some(v) => (v, ReferenceKind::Analytic),
        None => {
            let largest = cells.iter().map(|c| c.n).max().unwrap_or(0);
            let pooled: MomentAccumulator = cells
                .iter()
                .filter(|c| c.n == largest)
                .flat_map(|c| c.reports.iter().map(|r| r.estimate))
                .collect();
            (pooled.mean(), ReferenceKind::GrandMean)
        }
    };
    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        let summary = summarize_replicates(&cell.estimates(), reference, reference_kind)?;
        let vars: Vec<f64> = cell
            .reports
            .iter()
            .filter_map(|r| r.variance_estimate)
            .collect();
        let mean_var_estimate = (vars.len() == cell.reports.len())
            .then(|| vars.iter().sum::<f64>() / vars.len() as f64);
        rows.push(BenchRow {
            estimator: cell.estimator,
            s: config.s,
            n: cell.n,
            total_evals: cell.reports[0].total_evaluations,
            replicates: cell.reports.len(),
            mean_estimate: summary.mean_of_estimates,
            reference,
            rmse: summary.rmse,
            rel_rmse: summary.relative_rmse,
            mean_var_estimate,
            wall_seconds: cell.wall_seconds,
        });
    }
    Ok(BenchOutput {
        rows,
        cells,
        reference,
        reference_kind,
        log_offset: f.log_offset(),
    })
}

pub fn write_csv<W: Write>(rows: &[BenchRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Least-squares slope of `log2(rmse)` against `log2(N)` for one estimator.
pub fn fit_slope(rows: &[BenchRow], estimator: EstimatorKind) -> Result<f64> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.estimator == estimator)
        .map(|r| ((r.n as f64).log2(), r.rmse.log2()))
        .collect();
    let distinct: HashSet<u64> = rows
        .iter()
        .filter(|r| r.estimator == estimator)
        .map(|r| r.n)
        .collect();
    if distinct.len() < 3 {
        return Err(Error::arg(format!(
            "need at least 3 sample sizes for {estimator}, found {}",
            distinct.len()
        )));
    }
    if points.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::arg(format!(
            "{estimator} has a zero or non-finite rmse"
        )));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
