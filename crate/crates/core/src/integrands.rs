//! Test integrands on `[0,1]^s`.
//!
//! Besides the analytic test functions this module builds the
//! marginal-likelihood integrand of a Bayesian logistic regression: a Laplace
//! approximation `N(β̂, H⁻¹)` is fitted to the posterior, and the importance
//! ratio `p(β)L(y|β)/q(β)` is pulled back to the unit cube through
//! `β(x) = β̂ + C Φ⁻¹(x)`, `C Cᵀ = H⁻¹`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Rectangle;
use crate::oracle::{delta_linear, LinearSpec};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DeltaFn = Arc<dyn Fn(&Rectangle) -> f64 + Send + Sync>;

/// A named integrand with optional analytic integral and closed-form `Δ(R)`.
#[derive(Clone)]
pub struct IntegrandSpec {
    name: String,
    dim: usize,
    evaluate: Evaluator,
    analytic_integral: Option<f64>,
    closed_form_delta: Option<DeltaFn>,
    log_offset: f64,
}

impl fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrandSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_integral", &self.analytic_integral)
            .field("closed_form_delta", &self.closed_form_delta.is_some())
            .field("log_offset", &self.log_offset)
            .finish()
    }
}

impl IntegrandSpec {
    pub fn new(name: impl Into<String>, dim: usize, evaluate: Evaluator) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        IntegrandSpec {
            name: name.into(),
            dim,
            evaluate,
            analytic_integral: None,
            closed_form_delta: None,
            log_offset: 0.0,
        }
    }

    pub fn with_integral(mut self, value: f64) -> Self {
        self.analytic_integral = Some(value);
        self
    }

    pub fn with_delta(mut self, delta: DeltaFn) -> Self {
        self.closed_form_delta = Some(delta);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluate)(x)
    }

    pub fn analytic_integral(&self) -> Option<f64> {
        self.analytic_integral
    }

    pub fn closed_form_delta(&self) -> Option<&DeltaFn> {
        self.closed_form_delta.as_ref()
    }

    /// The integrand is scaled by `exp(-log_offset)`; the target integral is
    /// `exp(log_offset) · ∫ f`. Zero for unscaled integrands.
    pub fn log_offset(&self) -> f64 {
        self.log_offset
    }
}

/// `(t/2)·coth(t/2) - 1`, accurate for small `t`.
fn half_coth_minus_one(t: f64) -> f64 {
    let u = 0.5 * t;
    if u.abs() < 0.1 {
        let u2 = u * u;
        u2 * (1.0 / 3.0
            + u2 * (-1.0 / 45.0 + u2 * (2.0 / 945.0 + u2 * (-1.0 / 4725.0 + u2 * 2.0 / 93555.0))))
    } else {
        u / u.tanh() - 1.0
    }
}

/// `Var[exp(λᵀX) | X ∈ R]` using that the coordinates are independent.
fn toy_delta(lambda: &[f64], r: &Rectangle) -> f64 {
    let mut log_mean_sq = 0.0;
    let mut log_ratio = 0.0;
    for ((&l, &a), mu) in lambda.iter().zip(r.lower()).zip(r.edges()) {
        let t = l * mu;
        // E[e^{lX}] on [a, a+mu] is e^{la} (e^t - 1)/t.
        let log_mean = if t == 0.0 {
            l * a
        } else {
            l * a + (t.exp_m1() / t).ln()
        };
        log_mean_sq += 2.0 * log_mean;
        // E[e^{2lX}] / E[e^{lX}]^2 = (t/2) coth(t/2).
        log_ratio += if t == 0.0 {
            0.0
        } else {
            half_coth_minus_one(t).ln_1p()
        };
    }
    log_mean_sq.exp() * log_ratio.exp_m1()
}

/// `f(x) = exp(Σ λ_i x_i)` with `λ_i = i^{-2}`.
pub fn toy(dim: usize) -> IntegrandSpec {
    let lambda: Arc<Vec<f64>> = Arc::new((1..=dim).map(|i| 1.0 / (i * i) as f64).collect());
    let integral = lambda.iter().map(|&l| l.exp_m1() / l).product();
    let eval_lambda = Arc::clone(&lambda);
    let delta_lambda = Arc::clone(&lambda);
    IntegrandSpec::new(
        format!("toy-{dim}"),
        dim,
        Arc::new(move |x: &[f64]| {
            x.iter()
                .zip(eval_lambda.iter())
                .map(|(xi, l)| xi * l)
                .sum::<f64>()
                .exp()
        }),
    )
    .with_integral(integral)
    .with_delta(Arc::new(move |r: &Rectangle| toy_delta(&delta_lambda, r)))
}

/// `f(x) = λᵀx`.
pub fn linear(lambda: Vec<f64>) -> IntegrandSpec {
    let dim = lambda.len();
    let integral = lambda.iter().sum::<f64>() / 2.0;
    let spec = Arc::new(LinearSpec::new(lambda));
    let eval_spec = Arc::clone(&spec);
    IntegrandSpec::new(
        format!("linear-{dim}"),
        dim,
        Arc::new(move |x: &[f64]| x.iter().zip(eval_spec.lambda()).map(|(a, b)| a * b).sum()),
    )
    .with_integral(integral)
    .with_delta(Arc::new(move |r: &Rectangle| delta_linear(&spec, r)))
}

const GAUSS_LEGENDRE_16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

/// Variance of `g(X)` for `X` uniform on `[a, b]`, by 16-point Gauss-Legendre
/// quadrature of the deviations from `g` at the midpoint.
pub fn interval_variance<G: Fn(f64) -> f64>(g: G, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let gc = g(c);
    let (mut m1, mut m2) = (0.0, 0.0);
    for &(node, weight) in &GAUSS_LEGENDRE_16 {
        for x in [c - h * node, c + h * node] {
            let d = g(x) - gc;
            m1 += 0.5 * weight * d;
            m2 += 0.5 * weight * d * d;
        }
    }
    (m2 - m1 * m1).max(0.0)
}

/// `f(x) = λ x[0] + sin(2π x[1])`, on `[0,1]^2`.
pub fn sine_counterexample(lambda: f64) -> IntegrandSpec {
    IntegrandSpec::new(
        "sine",
        2,
        Arc::new(move |x: &[f64]| lambda * x[0] + (2.0 * PI * x[1]).sin()),
    )
    .with_integral(lambda / 2.0)
    .with_delta(Arc::new(move |r: &Rectangle| {
        (lambda * r.edge(0)).powi(2) / 12.0
            + interval_variance(|t| (2.0 * PI * t).sin(), r.lower()[1], r.upper()[1])
    }))
}

/// Standard normal quantile, Wichura's AS 241 (PPND16), relative accuracy about 1e-16.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(p));
    }
    Ok(ppnd16(p))
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_8e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// `log F(z)` with `F(z) = 1/(1 + e^{-z})`, stable for large `|z|`.
fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `F(z) = 1/(1 + e^{-z})`.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression with a `N(0, prior_sd² I)` prior.
///
/// Rows are stored pre-multiplied by their label, so `z_i = y_i β·x_i` is a
/// plain dot product.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    dim: usize,
    signed_rows: Vec<f64>,
    prior_sd: f64,
}

impl LogisticModel {
    pub fn new(design: &DMatrix<f64>, labels: &[f64], prior_sd: f64) -> Result<Self> {
        let (n, dim) = design.shape();
        if n != labels.len() {
            return Err(Error::arg(format!(
                "{n} design rows but {} labels",
                labels.len()
            )));
        }
        if dim == 0 {
            return Err(Error::arg("design has no columns"));
        }
        if !(prior_sd > 0.0 && prior_sd.is_finite()) {
            return Err(Error::arg("prior standard deviation must be positive"));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("design contains non-finite entries"));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::arg("labels must be -1 or +1"));
        }
        let mut signed_rows = Vec::with_capacity(n * dim);
        for i in 0..n {
            signed_rows.extend((0..dim).map(|j| labels[i] * design[(i, j)]));
        }
        Ok(LogisticModel {
            dim,
            signed_rows,
            prior_sd,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.signed_rows.chunks_exact(self.dim)
    }

    /// `h(β) = log p(β) + Σ log F(y_i βᵀx_i)`, including the prior's normalizing constant.
    pub fn log_joint(&self, beta: &[f64]) -> f64 {
        let var = self.prior_sd * self.prior_sd;
        let norm2: f64 = beta.iter().map(|b| b * b).sum();
        let log_prior = -0.5 * self.dim as f64 * (2.0 * PI * var).ln() - 0.5 * norm2 / var;
        let log_lik: f64 = self
            .rows()
            .map(|row| log_logistic(row.iter().zip(beta).map(|(a, b)| a * b).sum()))
            .sum();
        log_prior + log_lik
    }

    /// Gradient of `h`: `-β/σ² + Σ y_i x_i F(-y_i βᵀx_i)`.
    pub fn gradient(&self, beta: &[f64]) -> DVector<f64> {
        let var = self.prior_sd * self.prior_sd;
        let mut g = DVector::from_iterator(self.dim, beta.iter().map(|b| -b / var));
        for row in self.rows() {
            let z: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let w = logistic(-z);
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += xj * w;
            }
        }
        g
    }

    /// Negative Hessian of `h`: `I/σ² + Σ x_i x_iᵀ F(z_i) F(-z_i)`.
    pub fn negative_hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.dim, self.dim) / (self.prior_sd * self.prior_sd);
        for row in self.rows() {
            let z: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let w = logistic(z) * logistic(-z);
            for a in 0..self.dim {
                for b in 0..=a {
                    h[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..self.dim {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        h
    }
}

/// Gaussian proposal `N(β̂, H⁻¹)` centred at the posterior mode.
#[derive(Debug, Clone)]
pub struct LaplaceProposal {
    pub mode: DVector<f64>,
    /// Negative Hessian of the log joint at the mode.
    pub hessian: DMatrix<f64>,
    /// Lower-triangular `C` with `C Cᵀ = H⁻¹`.
    pub cholesky_factor: DMatrix<f64>,
    /// `log q(β̂) = -s/2 log 2π + ½ log det H`.
    pub log_det_term: f64,
    /// `h(β̂)`.
    pub log_joint_at_mode: f64,
    pub iterations: usize,
}

const NEWTON_TOLERANCE: f64 = 1e-8;
const NEWTON_MAX_ITERATIONS: usize = 100;

/// Newton's method for the posterior mode, then the Laplace proposal.
pub fn fit_laplace(
    design: &DMatrix<f64>,
    labels: &[f64],
    prior_sd: f64,
) -> Result<LaplaceProposal> {
    let model = LogisticModel::new(design, labels, prior_sd)?;
    fit_laplace_model(&model)
}

pub fn fit_laplace_model(model: &LogisticModel) -> Result<LaplaceProposal> {
    let dim = model.dim();
    let mut beta = DVector::zeros(dim);
    let mut iterations = 0;
    loop {
        let g = model.gradient(beta.as_slice());
        let gnorm = g.amax();
        if gnorm <= NEWTON_TOLERANCE {
            break;
        }
        if iterations == NEWTON_MAX_ITERATIONS {
            return Err(Error::Convergence {
                iterations,
                gradient_norm: gnorm,
            });
        }
        let h = model.negative_hessian(beta.as_slice());
        let chol = h.cholesky().ok_or_else(|| {
            Error::LinearAlgebra("negative Hessian is not positive definite".into())
        })?;
        beta += chol.solve(&g);
        iterations += 1;
    }
    let hessian = model.negative_hessian(beta.as_slice());
    let chol = hessian
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("negative Hessian is not positive definite".into()))?;
    let log_det_h: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let inverse = chol.inverse();
    let inverse = (&inverse + inverse.transpose()) * 0.5;
    let cholesky_factor = inverse
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("inverse Hessian is not positive definite".into()))?
        .l();
    Ok(LaplaceProposal {
        log_joint_at_mode: model.log_joint(beta.as_slice()),
        mode: beta,
        hessian,
        cholesky_factor,
        log_det_term: -0.5 * dim as f64 * (2.0 * PI).ln() + 0.5 * log_det_h,
        iterations,
    })
}

/// Lower clamp applied to cube coordinates before the normal quantile map.
pub const QUANTILE_CLAMP: f64 = 1e-15;

impl LaplaceProposal {
    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    /// `β(x) = β̂ + C Φ⁻¹(x)`; also returns `|Φ⁻¹(x)|²`.
    pub fn transform(&self, x: &[f64], beta: &mut [f64]) -> f64 {
        let dim = self.dim();
        let mut z = [0.0; 64];
        let mut z_heap;
        let z: &mut [f64] = if dim <= 64 {
            &mut z[..dim]
        } else {
            z_heap = vec![0.0; dim];
            &mut z_heap
        };
        for (zi, &xi) in z.iter_mut().zip(x) {
            *zi = ppnd16(xi.clamp(QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP));
        }
        for (i, b) in beta.iter_mut().enumerate() {
            *b = self.mode[i]
                + (0..=i)
                    .map(|j| self.cholesky_factor[(i, j)] * z[j])
                    .sum::<f64>();
        }
        z.iter().map(|v| v * v).sum()
    }

    /// `log q(β(x))` given `|Φ⁻¹(x)|²`.
    pub fn log_density_from_norm(&self, z_norm2: f64) -> f64 {
        self.log_det_term - 0.5 * z_norm2
    }
}

/// The importance ratio `exp{h(β(x)) - log q(β(x))}` scaled by `exp{-h(β̂)}`.
///
/// The returned spec has `log_offset = h(β̂)`, so the marginal likelihood is
/// `exp(h(β̂)) · ∫ f`.
pub fn marginal_likelihood_integrand(
    proposal: &LaplaceProposal,
    design: &DMatrix<f64>,
    labels: &[f64],
    prior_sd: f64,
) -> Result<IntegrandSpec> {
    let model = LogisticModel::new(design, labels, prior_sd)?;
    if model.dim() != proposal.dim() {
        return Err(Error::arg("proposal and design dimensions differ"));
    }
    let offset = proposal.log_joint_at_mode;
    let dim = model.dim();
    let proposal = Arc::new(proposal.clone());
    let model = Arc::new(model);
    let evaluate: Evaluator = Arc::new(move |x: &[f64]| {
        let mut beta = vec![0.0; dim];
        let z2 = proposal.transform(x, &mut beta);
        let log_ratio = model.log_joint(&beta) - proposal.log_density_from_norm(z2);
        (log_ratio - offset).exp()
    });
    let mut spec = IntegrandSpec::new(format!("logistic-{dim}"), dim, evaluate);
    spec.log_offset = offset;
    Ok(spec)
}
