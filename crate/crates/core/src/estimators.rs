//! Unbiased estimators of `∫_{[0,1]^s} f`.
//!
//! | estimator | strata | points per stratum | evaluations |
//! |---|---|---|---|
//! | plain MC | one | `N` | `N` |
//! | Haber order one | `k^s` congruent subcubes | 1 | `N = k^s` |
//! | adaptive (`adastrat`) | `2^d` leaves learned from `N` preliminary points | `N 2^{-d}` | `2N` |
//! | adaptive with variance | `N/2` leaves | 2 | `2N` |
//! | oracle | `N` leaves from the exact criterion | 1 | `N` |
//!
//! Preliminary points only shape the partition; the estimate uses fresh
//! draws, which keeps it unbiased whatever tree was learned.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rectangle;
use crate::integrands::IntegrandSpec;
use crate::oracle::grow_oracle;
use crate::stats::MomentAccumulator;
use crate::tree::{grow_pow2, grow_rational, Partition, SampleBatch};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Mc,
    Haber,
    Adastrat,
    AdastratVar,
    Oracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Mc,
        EstimatorKind::Haber,
        EstimatorKind::Adastrat,
        EstimatorKind::AdastratVar,
        EstimatorKind::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mc => "mc",
            EstimatorKind::Haber => "haber",
            EstimatorKind::Adastrat => "adastrat",
            EstimatorKind::AdastratVar => "adastrat-var",
            EstimatorKind::Oracle => "oracle",
        }
    }

    pub(crate) fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.label() == s.trim())
            .ok_or_else(|| {
                Error::arg(format!(
                    "unknown estimator {s:?} (expected one of mc, haber, adastrat, adastrat-var, oracle)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub estimate: f64,
    /// Number of integrand calls, preliminary sample included.
    pub total_evaluations: u64,
    /// Unbiased estimate of the estimator's variance (conditional on the strata), when available.
    pub variance_estimate: Option<f64>,
    pub seed: u64,
}

fn check_budget_exponent(k: u32) -> Result<u64> {
    if k >= 48 {
        return Err(Error::arg(format!("N = 2^{k} is too large")));
    }
    Ok(1u64 << k)
}

/// Plain Monte Carlo with `n` iid uniform points. The variance estimate is `s²/n`.
pub fn estimate_mc(f: &IntegrandSpec, n: u64, seed: u64) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::arg("N must be at least 1"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let unit = Rectangle::unit(f.dim());
    let mut x = vec![0.0; f.dim()];
    let mut acc = MomentAccumulator::new();
    for _ in 0..n {
        unit.sample_into(&mut rng, &mut x);
        acc.push(f.eval(&x));
    }
    Ok(EstimateReport {
        estimator: EstimatorKind::Mc,
        estimate: acc.mean(),
        total_evaluations: n,
        variance_estimate: (n >= 2).then(|| acc.variance() / n as f64),
        seed,
    })
}

/// Finds `k` with `k^s = n`, if any.
pub fn haber_cells_per_axis(n: u64, dim: usize) -> Result<u64> {
    let guess = (n as f64).powf(1.0 / dim as f64).round() as u64;
    for k in guess.saturating_sub(1).max(2)..=guess + 1 {
        if k.checked_pow(dim as u32) == Some(n) {
            return Ok(k);
        }
    }
    Err(Error::arg(format!(
        "Haber's estimator is defined only for N = k^s with k >= 2; N = {n} is not a {dim}-th power"
    )))
}

/// Haber's order-one estimator: one uniform point in each of the `k^s`
/// subcubes of edge `1/k`.
pub fn estimate_haber1(
    f: &IntegrandSpec,
    cells_per_axis: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let dim = f.dim();
    if cells_per_axis < 2 {
        return Err(Error::arg("Haber's estimator needs k >= 2"));
    }
    let n = u32::try_from(dim)
        .ok()
        .and_then(|d| cells_per_axis.checked_pow(d))
        .filter(|&n| n <= 1 << 40)
        .ok_or_else(|| Error::arg(format!("N = {cells_per_axis}^{dim} is too large")))?;
    let mut rng = Rng::seed_from_u64(seed);
    let k = cells_per_axis as f64;
    let mut idx = vec![0u64; dim];
    let mut x = vec![0.0; dim];
    let mut sum = 0.0;
    for _ in 0..n {
        for (xi, &c) in x.iter_mut().zip(&idx) {
            let u: f64 = rand::Rng::random(&mut rng);
            *xi = (c as f64 + u) / k;
        }
        sum += f.eval(&x);
        for c in idx.iter_mut() {
            *c += 1;
            if *c < cells_per_axis {
                break;
            }
            *c = 0;
        }
    }
    Ok(EstimateReport {
        estimator: EstimatorKind::Haber,
        estimate: sum / n as f64,
        total_evaluations: n,
        variance_estimate: None,
        seed,
    })
}

/// Estimate and conditional variance estimate from `per_leaf[p]` fresh uniform draws in leaf `p`.
fn stratified_pass(
    f: &IntegrandSpec,
    partition: &Partition,
    per_leaf: impl Fn(&Rectangle) -> u64,
    rng: &mut Rng,
) -> (f64, u64, Option<f64>) {
    let mut x = vec![0.0; f.dim()];
    let mut total = 0.0;
    let mut count = 0u64;
    let mut var_sum = 0.0;
    let mut var_available = true;
    for leaf in partition.leaves() {
        let m = per_leaf(leaf);
        let mut acc = MomentAccumulator::new();
        for _ in 0..m {
            leaf.sample_into(rng, &mut x);
            let y = f.eval(&x);
            total += y;
            acc.push(y);
        }
        count += m;
        if m >= 2 {
            var_sum += m as f64 * acc.variance();
        } else {
            var_available = false;
        }
    }
    let n = count as f64;
    (total / n, count, var_available.then(|| var_sum / (n * n)))
}

/// Adaptive stratification with `N = 2^k` and tree depth `depth` (default `k`).
pub fn estimate_adastrat(
    f: &IntegrandSpec,
    k: u32,
    depth: Option<u32>,
    seed: u64,
) -> Result<EstimateReport> {
    let n = check_budget_exponent(k)?;
    let depth = depth.unwrap_or(k);
    if depth > k {
        return Err(Error::arg(format!(
            "depth {depth} exceeds k = {k}: strata would get fewer than one point"
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let batch = SampleBatch::draw(f, n as usize, &mut rng);
    let partition = grow_pow2(&batch, depth, &mut rng)?;
    let per_leaf = 1u64 << (k - depth);
    let (estimate, used, variance_estimate) =
        stratified_pass(f, &partition, |_| per_leaf, &mut rng);
    debug_assert_eq!(used, n);
    Ok(EstimateReport {
        estimator: EstimatorKind::Adastrat,
        estimate,
        total_evaluations: n + used,
        variance_estimate,
        seed,
    })
}

/// Adaptive stratification with two points per stratum (depth `k - 1`) and
/// the within-stratum variance estimate `(1/N²) Σ_p N_p s_p²`.
pub fn estimate_adastrat_with_variance(
    f: &IntegrandSpec,
    k: u32,
    seed: u64,
) -> Result<EstimateReport> {
    if k == 0 {
        return Err(Error::arg(
            "variance estimation needs k >= 1 (two points per stratum)",
        ));
    }
    let mut report = estimate_adastrat(f, k, Some(k - 1), seed)?;
    report.estimator = EstimatorKind::AdastratVar;
    Ok(report)
}

/// Adaptive stratification for arbitrary `N`: the tree is grown on the
/// `n^+/n_R` grid and each leaf of exact volume `n_R/N` receives `n_R` points.
pub fn estimate_adastrat_any_n(f: &IntegrandSpec, n: u64, seed: u64) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::arg("N must be at least 1"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let batch = SampleBatch::draw(f, n as usize, &mut rng);
    let partition = grow_rational(&batch, n, &mut rng)?;
    let (estimate, used, variance_estimate) = stratified_pass(
        f,
        &partition,
        |leaf| {
            leaf.volume_numerator()
                .expect("rational leaves carry exact volumes")
        },
        &mut rng,
    );
    debug_assert_eq!(used, n);
    Ok(EstimateReport {
        estimator: EstimatorKind::Adastrat,
        estimate,
        total_evaluations: n + used,
        variance_estimate,
        seed,
    })
}

/// Stratification on the oracle tree of depth `k`, one point per leaf.
pub fn estimate_oracle_stratified(f: &IntegrandSpec, k: u32, seed: u64) -> Result<EstimateReport> {
    let n = check_budget_exponent(k)?;
    let delta = f.closed_form_delta().ok_or_else(|| {
        Error::Unsupported(format!("integrand {} has no closed-form Δ(R)", f.name()))
    })?;
    let mut rng = Rng::seed_from_u64(seed);
    let partition = grow_oracle(f.dim(), |r| delta(r), k, &mut rng)?;
    let (estimate, used, _) = stratified_pass(f, &partition, |_| 1, &mut rng);
    debug_assert_eq!(used, n);
    Ok(EstimateReport {
        estimator: EstimatorKind::Oracle,
        estimate,
        total_evaluations: used,
        variance_estimate: None,
        seed,
    })
}
