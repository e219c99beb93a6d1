//! Empirical moments and replicate-level error summaries.
//!
//! Sample variance follows the convention that a set with at most one element
//! has variance `+inf`, which lets the tree learner compare splits that leave
//! a child (nearly) empty without special cases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine with another accumulator as if its values had been pushed here.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean += delta * n_b / n;
        self.m2 += other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance, `+inf` when fewer than two values were seen.
    pub fn variance(&self) -> f64 {
        if self.count <= 1 {
            f64::INFINITY
        } else {
            self.m2.max(0.0) / (self.count - 1) as f64
        }
    }
}

impl FromIterator<f64> for MomentAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MomentAccumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

impl Extend<f64> for MomentAccumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

/// Sample variance with divisor `|A| - 1`; `+inf` for `|A| <= 1`.
pub fn empirical_variance(values: &[f64]) -> f64 {
    values
        .iter()
        .copied()
        .collect::<MomentAccumulator>()
        .variance()
}

/// Where the reference value of an RMSE summary came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Analytic,
    GrandMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseSummary {
    pub replicate_count: usize,
    pub mean_of_estimates: f64,
    pub rmse: f64,
    pub relative_rmse: f64,
    pub reference_value: f64,
    pub reference_kind: ReferenceKind,
    /// `(mean - reference) / standard error`; near zero for an unbiased estimator.
    pub bias_z: f64,
}

pub fn summarize_replicates(
    estimates: &[f64],
    reference: f64,
    reference_kind: ReferenceKind,
) -> Result<RmseSummary> {
    if estimates.len() < 2 {
        return Err(Error::arg("at least two replicate estimates are required"));
    }
    let acc: MomentAccumulator = estimates.iter().copied().collect();
    let n = estimates.len() as f64;
    let mse = estimates
        .iter()
        .map(|e| (e - reference).powi(2))
        .sum::<f64>()
        / n;
    let rmse = mse.sqrt();
    let se = (acc.variance() / n).sqrt();
    let diff = acc.mean() - reference;
    let bias_z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(RmseSummary {
        replicate_count: estimates.len(),
        mean_of_estimates: acc.mean(),
        rmse,
        relative_rmse: rmse / reference.abs(),
        reference_value: reference,
        reference_kind,
        bias_z,
    })
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}
