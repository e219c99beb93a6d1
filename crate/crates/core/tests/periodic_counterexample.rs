//! The periodic-component example: when the second coordinate enters through a
//! term whose two halves are mirror images, halving that axis leaves `Δ`
//! unchanged, so the oracle tree only ever refines the first axis and the
//! stratified RMSE stays at the Monte Carlo rate.
//!
//! With `sin(2π x2)` the halves are *not* mirror images (the mean differs
//! between them), which is why the sine integrand does get split on axis 2.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adastrat::geometry::Rectangle;
use adastrat::integrands::{interval_variance, sine_counterexample, IntegrandSpec};
use adastrat::oracle::{axis_criteria, grow_oracle, stratified_variance};

fn cosine(lambda: f64) -> IntegrandSpec {
    IntegrandSpec::new(
        "cosine",
        2,
        Arc::new(move |x: &[f64]| lambda * x[0] + (2.0 * PI * x[1]).cos()),
    )
    .with_integral(lambda / 2.0)
    .with_delta(Arc::new(move |r: &Rectangle| {
        (lambda * r.edge(0)).powi(2) / 12.0
            + interval_variance(|t| (2.0 * PI * t).cos(), r.lower()[1], r.upper()[1])
    }))
}

#[test]
fn cosine_oracle_never_splits_the_periodic_axis() {
    let f = cosine(1.0);
    let delta = f.closed_form_delta().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = grow_oracle(2, |r| delta(r), 12, &mut rng).unwrap();
    assert!(p.decisions().iter().all(|d| d.axis == 0));
}

#[test]
fn cosine_oracle_rmse_stays_at_monte_carlo_rate() {
    let f = cosine(1.0);
    let delta = f.closed_form_delta().unwrap();
    let ks: Vec<u32> = (4..=12).collect();
    let points: Vec<(f64, f64)> = ks
        .iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let p = grow_oracle(2, |r| delta(r), k, &mut rng).unwrap();
            let v = stratified_variance(&p, |r| delta(r), 1 << k);
            (k as f64, 0.5 * v.log2())
        })
        .collect();
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!((-0.51..=-0.49).contains(&slope), "slope {slope}");
}

#[test]
fn sine_root_split_prefers_the_periodic_axis() {
    // Halving x2 leaves Var[sin | half] = 1/2 - 4/π², far below the
    // 1/2 + 1/48 left by halving x1.
    let f = sine_counterexample(1.0);
    let delta = f.closed_form_delta().unwrap();
    let c = axis_criteria(|r| delta(r), &Rectangle::unit(2));
    assert!((c[0] - (1.0 / 48.0 + 0.5)).abs() < 1e-12, "{c:?}");
    assert!(
        (c[1] - (1.0 / 12.0 + 0.5 - 4.0 / (PI * PI))).abs() < 1e-12,
        "{c:?}"
    );
    assert!(c[1] < c[0]);
}
