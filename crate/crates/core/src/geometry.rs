//! Axis-aligned rectangles in the unit hypercube.
//!
//! Axes are zero-based throughout the crate. A rectangle carries its float
//! edges and, when it was derived from the unit cube by splits, an exact
//! volume `n_R / N` kept as an unreduced integer pair so that the arbitrary-N
//! allocation rule (`n_R` points in a leaf) never depends on float rounding.

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};

/// Exact volume `numerator / denominator`, not reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExactVolume {
    pub numerator: u64,
    pub denominator: u64,
}

impl ExactVolume {
    pub fn ratio(&self) -> Ratio<u128> {
        Ratio::new(self.numerator as u128, self.denominator as u128)
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    fn halved(&self) -> Option<ExactVolume> {
        if self.numerator.is_multiple_of(2) {
            Some(ExactVolume {
                numerator: self.numerator / 2,
                denominator: self.denominator,
            })
        } else {
            self.denominator
                .checked_mul(2)
                .map(|denominator| ExactVolume {
                    numerator: self.numerator,
                    denominator,
                })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
    exact: Option<ExactVolume>,
}

/// The two halves produced by a split. `minus` is the lower side along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub minus: Rectangle,
    pub plus: Rectangle,
    pub axis: usize,
    /// Cut position as a fraction of the parent edge, `(numerator, denominator)`.
    pub fraction: (u64, u64),
}

impl Rectangle {
    /// `[0,1]^s` with exact volume `1/1`.
    pub fn unit(dim: usize) -> Self {
        Self::unit_with_total(dim, 1)
    }

    /// `[0,1]^s` with exact volume `total/total`, the root of arbitrary-N growth.
    pub fn unit_with_total(dim: usize, total: u64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        assert!(total >= 1, "total must be at least 1");
        Rectangle {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
            exact: Some(ExactVolume {
                numerator: total,
                denominator: total,
            }),
        }
    }

    /// A free-standing rectangle without exact volume bookkeeping.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::arg(
                "lower and upper must be non-empty and of equal length",
            ));
        }
        for (i, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(Error::arg(format!(
                    "edge {i} = [{a}, {b}] is not a non-empty interval inside [0, 1]"
                )));
            }
        }
        Ok(Rectangle {
            lower,
            upper,
            exact: None,
        })
    }

    /// Like [`Rectangle::new`] with a caller-supplied exact volume.
    pub fn with_exact_volume(
        lower: Vec<f64>,
        upper: Vec<f64>,
        numerator: u64,
        denominator: u64,
    ) -> Result<Self> {
        if numerator == 0 || denominator == 0 || numerator > denominator {
            return Err(Error::arg("exact volume must lie in (0, 1]"));
        }
        let mut r = Self::new(lower, upper)?;
        r.exact = Some(ExactVolume {
            numerator,
            denominator,
        });
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn edge(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a)
    }

    /// Product of edge lengths.
    pub fn volume(&self) -> f64 {
        self.edges().product()
    }

    pub fn exact_volume(&self) -> Option<ExactVolume> {
        self.exact
    }

    /// `n_R`, the exact volume numerator.
    pub fn volume_numerator(&self) -> Option<u64> {
        self.exact.map(|v| v.numerator)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            return Err(Error::arg(format!(
                "axis {axis} out of range for dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn cut_at(&self, axis: usize, cut: f64) -> (Rectangle, Rectangle) {
        let mut minus = self.clone();
        let mut plus = self.clone();
        minus.upper[axis] = cut;
        plus.lower[axis] = cut;
        (minus, plus)
    }

    /// Split in the middle along `axis`.
    pub fn split_mid(&self, axis: usize) -> Result<SplitPair> {
        self.check_axis(axis)?;
        let cut = self.lower[axis] + 0.5 * self.edge(axis);
        let (mut minus, mut plus) = self.cut_at(axis, cut);
        let half = self.exact.and_then(|v| v.halved());
        minus.exact = half;
        plus.exact = half;
        Ok(SplitPair {
            minus,
            plus,
            axis,
            fraction: (1, 2),
        })
    }

    /// Split along `axis` so that the upper child gets exact volume
    /// `n_plus / N` and the lower child `(n_R - n_plus) / N`.
    pub fn split_frac(&self, axis: usize, n_plus: u64) -> Result<SplitPair> {
        self.check_axis(axis)?;
        let exact = self
            .exact
            .ok_or_else(|| Error::arg("split_frac needs a rectangle with exact volume"))?;
        let n_r = exact.numerator;
        if n_r == 1 {
            return Err(Error::Indivisible);
        }
        if n_plus == 0 || n_plus >= n_r {
            return Err(Error::arg(format!(
                "n_plus = {n_plus} must lie in 1..={}",
                n_r - 1
            )));
        }
        let n_minus = n_r - n_plus;
        let cut = self.lower[axis] + (n_minus as f64 / n_r as f64) * self.edge(axis);
        let (mut minus, mut plus) = self.cut_at(axis, cut);
        minus.exact = Some(ExactVolume {
            numerator: n_minus,
            denominator: exact.denominator,
        });
        plus.exact = Some(ExactVolume {
            numerator: n_plus,
            denominator: exact.denominator,
        });
        Ok(SplitPair {
            minus,
            plus,
            axis,
            fraction: (n_minus, n_r),
        })
    }

    /// Half-open containment `lower <= x < upper`, closed on the faces of the unit cube.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(x)
            .all(|((&a, &b), &xi)| a <= xi && (xi < b || (b == 1.0 && xi <= 1.0)))
    }

    /// Writes a uniform draw from the rectangle into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, &a), &b) in out.iter_mut().zip(&self.lower).zip(&self.upper) {
            let u: f64 = rng.random();
            *o = a + u * (b - a);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.sample_into(rng, &mut x);
        x
    }
}
