//! Closed-form variance criteria and predicted convergence rates.
//!
//! `Δ(R) = Var[f(X) | X ∈ R]` for `X` uniform on the unit cube. The oracle
//! tree grows exactly like the empirical tree but compares the theoretical
//! criterion `½Δ(R[j]⁺) + ½Δ(R[j]⁻)`. The exact variance of a stratified
//! estimator with `n_R = N·vol(R)` points per stratum is
//! `(1/N) Σ_R vol(R)·Δ(R)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Rectangle;
use crate::tree::{select_minimizer, Partition, PartitionMode, SplitDecision, MAX_DEPTH};

/// Weights of a linear integrand `f(x) = λᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    lambda: Vec<f64>,
    active_count: usize,
}

impl LinearSpec {
    pub fn new(lambda: Vec<f64>) -> Self {
        let active_count = lambda.iter().filter(|&&l| l != 0.0).count();
        LinearSpec {
            lambda,
            active_count,
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of nonzero weights, `s0`.
    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }
}

/// Per-coordinate lower and upper Lipschitz constants of a monotone integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLipschitzBounds {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BiLipschitzBounds {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::arg(
                "alpha and beta must be non-empty and of equal length",
            ));
        }
        if alpha.iter().zip(&beta).any(|(&a, &b)| !(a > 0.0 && a <= b)) {
            return Err(Error::arg("bounds must satisfy 0 < alpha_i <= beta_i"));
        }
        Ok(BiLipschitzBounds { alpha, beta })
    }

    /// Bounds of a linear integrand with positive weights (`α = β = λ`).
    pub fn from_linear(spec: &LinearSpec) -> Result<Self> {
        Self::new(spec.lambda.clone(), spec.lambda.clone())
    }
}

/// `Δ(R) = Σ_j μ_j² λ_j² / 12` for `f(x) = λᵀx`, with `μ` the edge lengths of `R`.
pub fn delta_linear(spec: &LinearSpec, r: &Rectangle) -> f64 {
    spec.lambda
        .iter()
        .zip(r.edges())
        .map(|(l, mu)| (l * mu).powi(2))
        .sum::<f64>()
        / 12.0
}

/// `½Δ(R[j]⁺) + ½Δ(R[j]⁻)` for every axis `j`.
pub fn axis_criteria<D>(delta: D, r: &Rectangle) -> Vec<f64>
where
    D: Fn(&Rectangle) -> f64,
{
    (0..r.dim())
        .map(|j| {
            let pair = r.split_mid(j).expect("axis in range");
            0.5 * delta(&pair.plus) + 0.5 * delta(&pair.minus)
        })
        .collect()
}

/// Best-axis variance reduction factor `(Δ(R[j*]⁺) + Δ(R[j*]⁻)) / 2Δ(R)` for a linear integrand.
pub fn reduction_ratio_linear(spec: &LinearSpec, r: &Rectangle) -> Result<f64> {
    let parent = delta_linear(spec, r);
    if parent <= 0.0 {
        return Err(Error::Degenerate(
            "Δ(R) = 0, the reduction ratio is undefined".into(),
        ));
    }
    let best = axis_criteria(|q| delta_linear(spec, q), r)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(best / parent)
}

/// Grows the oracle tree of depth `depth` with the theoretical criterion.
pub fn grow_oracle<D, R>(dim: usize, delta: D, depth: u32, rng: &mut R) -> Result<Partition>
where
    D: Fn(&Rectangle) -> f64,
    R: Rng + ?Sized,
{
    if dim == 0 {
        return Err(Error::arg("dimension must be at least 1"));
    }
    if depth > MAX_DEPTH {
        return Err(Error::arg(format!(
            "depth {depth} exceeds the supported maximum of {MAX_DEPTH}"
        )));
    }
    let mut leaves = vec![Rectangle::unit(dim)];
    let mut decisions = Vec::new();
    for level in 0..depth {
        let mut next = Vec::with_capacity(leaves.len() * 2);
        for rect in leaves {
            let criteria = axis_criteria(&delta, &rect);
            let (axis, was_tiebreak) = select_minimizer(&criteria, rng);
            decisions.push(SplitDecision {
                axis,
                n_plus: None,
                criterion_value: criteria[axis],
                was_tiebreak,
                level,
            });
            let pair = rect.split_mid(axis)?;
            next.push(pair.minus);
            next.push(pair.plus);
        }
        leaves = next;
    }
    Ok(Partition::from_parts(
        leaves,
        Some(depth),
        PartitionMode::Pow2,
        decisions,
    ))
}

/// Exact variance `(1/N) Σ vol(R) Δ(R)` of the estimator that places
/// `N·vol(R)` uniform points in each stratum.
pub fn stratified_variance<D>(partition: &Partition, delta: D, total_points: u64) -> f64
where
    D: Fn(&Rectangle) -> f64,
{
    partition
        .leaves()
        .iter()
        .map(|r| {
            let vol = r.exact_volume().map_or_else(|| r.volume(), |v| v.to_f64());
            vol * delta(r)
        })
        .sum::<f64>()
        / total_points as f64
}

/// Rate exponent `r(s0) = -log(1 - 3/(4 s0)) / (2 log 2)` of the oracle
/// estimator on linear integrands with `s0` active coordinates: its RMSE is
/// `O(N^{-1/2 - r(s0)})`.
pub fn predicted_rate_linear(active_count: usize) -> Result<f64> {
    if active_count < 1 {
        return Err(Error::arg("at least one active coordinate is required"));
    }
    let s0 = active_count as f64;
    let rate = -(1.0 - 3.0 / (4.0 * s0)).ln() / (2.0 * std::f64::consts::LN_2);
    debug_assert!(rate >= 0.541 / s0);
    Ok(rate)
}

/// Rate exponent `log((3/4 + S)/S) / (2 log 2)` with `S = Σ β_i²/α_i²`, for
/// monotone integrands with per-coordinate bi-Lipschitz bounds.
pub fn predicted_rate_bilipschitz(bounds: &BiLipschitzBounds) -> f64 {
    let s: f64 = bounds
        .alpha
        .iter()
        .zip(&bounds.beta)
        .map(|(a, b)| (b / a).powi(2))
        .sum();
    ((0.75 + s) / s).ln() / (2.0 * std::f64::consts::LN_2)
}

/// Axes whose theoretical criterion is within a factor `(1+ε)/(1-ε)` of the
/// minimum; always contains the minimizing axis.
pub fn epsilon_tie<D>(delta: D, r: &Rectangle, epsilon: f64) -> Result<Vec<usize>>
where
    D: Fn(&Rectangle) -> f64,
{
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg("epsilon must lie in (0, 1)"));
    }
    let criteria = axis_criteria(delta, r);
    let best = criteria.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = best * (1.0 + epsilon) / (1.0 - epsilon);
    Ok((0..criteria.len())
        .filter(|&j| criteria[j] <= bound)
        .collect())
}
