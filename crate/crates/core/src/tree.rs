//! Learning stratifications from a preliminary sample.
//!
//! Two growth procedures are provided:
//! - [`grow_pow2`] splits every leaf in the middle along the axis minimizing
//!   the CART criterion, level by level, until depth `d` (`2^d` equal leaves).
//! - [`grow_rational`] also chooses the cut position on the grid `n^+/n_R`,
//!   so that every leaf has exact volume `n_R/N`; it stops when every leaf
//!   has `n_R = 1`.
//!
//! Criteria within a relative `1e-12` of the minimum count as tied and the
//! winner is drawn uniformly with the supplied rng. A child holding at most
//! one point has infinite empirical variance, so nodes that are (nearly)
//! empty fall back to a uniformly random axis.

use std::collections::VecDeque;
use std::fmt::Write as _;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{ExactVolume, Rectangle};
use crate::integrands::IntegrandSpec;
use crate::stats::MomentAccumulator;

/// Relative tolerance under which two split criteria are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Paired points `X_n` (row-major, `dim` coordinates each) and values `Y_n = f(X_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(dim: usize, points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be at least 1"));
        }
        if points.len() != dim * values.len() {
            return Err(Error::arg(format!(
                "{} coordinates do not match {} values in dimension {dim}",
                points.len(),
                values.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::arg(format!("coordinate {bad} is outside [0, 1]")));
        }
        Ok(SampleBatch {
            dim,
            points,
            values,
        })
    }

    /// Draws `n` iid uniform points and evaluates `f` at each.
    pub fn draw<R: Rng + ?Sized>(f: &IntegrandSpec, n: usize, rng: &mut R) -> Self {
        let dim = f.dim();
        let unit = Rectangle::unit(dim);
        let mut points = vec![0.0; n * dim];
        let mut values = Vec::with_capacity(n);
        for x in points.chunks_exact_mut(dim) {
            unit.sample_into(rng, x);
            values.push(f.eval(x));
        }
        SampleBatch {
            dim,
            points,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// `2^d` leaves of volume `2^-d`.
    Pow2,
    /// Leaves of exact volume `n_R/N` on the grid of the arbitrary-N variant.
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDecision {
    pub axis: usize,
    /// Size of the upper child in units of `1/N` (rational mode only).
    pub n_plus: Option<u64>,
    pub criterion_value: f64,
    pub was_tiebreak: bool,
    /// Depth of the node that was split (root is 0).
    pub level: u32,
}

/// A finite set of disjoint rectangles covering the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    leaves: Vec<Rectangle>,
    depth: Option<u32>,
    mode: PartitionMode,
    decisions: Vec<SplitDecision>,
}

impl Partition {
    pub(crate) fn from_parts(
        leaves: Vec<Rectangle>,
        depth: Option<u32>,
        mode: PartitionMode,
        decisions: Vec<SplitDecision>,
    ) -> Self {
        Partition {
            leaves,
            depth,
            mode,
            decisions,
        }
    }

    pub fn leaves(&self) -> &[Rectangle] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn depth(&self) -> Option<u32> {
        self.depth
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    /// Split decisions in the order they were made (breadth-first).
    pub fn decisions(&self) -> &[SplitDecision] {
        &self.decisions
    }

    pub fn dim(&self) -> usize {
        self.leaves[0].dim()
    }

    /// Sum of exact leaf volumes, `None` if some leaf lacks exact bookkeeping.
    pub fn total_exact_volume(&self) -> Option<Ratio<u128>> {
        self.leaves
            .iter()
            .map(|r| r.exact_volume().map(|v| v.ratio()))
            .sum()
    }

    /// Index of the leaf containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.leaves.iter().position(|r| r.contains(x))
    }

    /// Plain-text form: a header line, then one leaf per line as
    /// `lower_1 .. lower_s | upper_1 .. upper_s | numerator/denominator`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            PartitionMode::Pow2 => "pow2",
            PartitionMode::Rational => "rational",
        };
        let depth = self
            .depth
            .map_or_else(|| "-".to_string(), |d| d.to_string());
        let _ = writeln!(
            out,
            "# partition mode={mode} depth={depth} dim={} leaves={}",
            self.dim(),
            self.len()
        );
        for leaf in &self.leaves {
            let join = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{x:?}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let vol = leaf.exact_volume().map_or_else(
                || "-".to_string(),
                |v| format!("{}/{}", v.numerator, v.denominator),
            );
            let _ = writeln!(
                out,
                "{} | {} | {vol}",
                join(leaf.lower()),
                join(leaf.upper())
            );
        }
        out
    }

    /// Parses the output of [`Partition::to_text`]. Decisions are not stored in the text form.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: "<partition>".into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input".into()))?;
        let mut mode = None;
        let mut depth = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("mode", "pow2")) => mode = Some(PartitionMode::Pow2),
                Some(("mode", "rational")) => mode = Some(PartitionMode::Rational),
                Some(("depth", "-")) => depth = None,
                Some(("depth", d)) => {
                    depth = Some(d.parse().map_err(|_| bad(1, format!("bad depth {d}")))?)
                }
                _ => {}
            }
        }
        let mode = mode.ok_or_else(|| bad(1, "missing mode".into()))?;
        let mut leaves = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad(i + 1, "expected three '|'-separated fields".into()));
            }
            let floats = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| bad(i + 1, format!("{t}: {e}")))
                    })
                    .collect()
            };
            let lower = floats(parts[0])?;
            let upper = floats(parts[1])?;
            let leaf = match parts[2].split_once('/') {
                Some((n, d)) => {
                    let n = n
                        .parse()
                        .map_err(|_| bad(i + 1, format!("bad numerator {n}")))?;
                    let d = d
                        .parse()
                        .map_err(|_| bad(i + 1, format!("bad denominator {d}")))?;
                    Rectangle::with_exact_volume(lower, upper, n, d)
                }
                None => Rectangle::new(lower, upper),
            }
            .map_err(|e| bad(i + 1, e.to_string()))?;
            leaves.push(leaf);
        }
        if leaves.is_empty() {
            return Err(bad(1, "no leaves".into()));
        }
        Ok(Partition {
            leaves,
            depth,
            mode,
            decisions: Vec::new(),
        })
    }
}

/// Picks the index of the smallest criterion, breaking ties uniformly at random.
///
/// Returns `(index, was_tiebreak)`. When every criterion is infinite all
/// candidates are tied.
pub(crate) fn select_minimizer<R: Rng + ?Sized>(criteria: &[f64], rng: &mut R) -> (usize, bool) {
    debug_assert!(!criteria.is_empty());
    let key = |c: f64| if c.is_nan() { f64::INFINITY } else { c };
    let min = criteria
        .iter()
        .map(|&c| key(c))
        .fold(f64::INFINITY, f64::min);
    let threshold = if min.is_finite() {
        min + TIE_TOLERANCE * min.abs()
    } else {
        f64::INFINITY
    };
    let tied: Vec<usize> = (0..criteria.len())
        .filter(|&i| key(criteria[i]) <= threshold)
        .collect();
    if tied.len() == 1 {
        return (tied[0], false);
    }
    (tied[rng.random_range(0..tied.len())], true)
}

fn midpoint(r: &Rectangle, axis: usize) -> f64 {
    r.lower()[axis] + 0.5 * r.edge(axis)
}

/// CART criterion for a midpoint split of `r` along `axis`: the equal-weight
/// average of the empirical variances of the batch values on each side.
/// `indices` selects the batch points lying in `r`.
pub fn cart_criterion(batch: &SampleBatch, indices: &[usize], r: &Rectangle, axis: usize) -> f64 {
    let cut = midpoint(r, axis);
    let mut minus = MomentAccumulator::new();
    let mut plus = MomentAccumulator::new();
    for &i in indices {
        if batch.coord(i, axis) < cut {
            minus.push(batch.value(i));
        } else {
            plus.push(batch.value(i));
        }
    }
    0.5 * plus.variance() + 0.5 * minus.variance()
}

fn all_axis_criteria(batch: &SampleBatch, indices: &[usize], r: &Rectangle) -> Vec<f64> {
    let dim = r.dim();
    let cuts: Vec<f64> = (0..dim).map(|j| midpoint(r, j)).collect();
    let mut minus = vec![MomentAccumulator::new(); dim];
    let mut plus = vec![MomentAccumulator::new(); dim];
    for &i in indices {
        let y = batch.value(i);
        let x = batch.point(i);
        for j in 0..dim {
            if x[j] < cuts[j] {
                minus[j].push(y);
            } else {
                plus[j].push(y);
            }
        }
    }
    minus
        .iter()
        .zip(&plus)
        .map(|(m, p)| 0.5 * p.variance() + 0.5 * m.variance())
        .collect()
}

/// Maximum supported depth for [`grow_pow2`].
pub const MAX_DEPTH: u32 = 40;

/// Grows the midpoint-split tree to depth `depth`, breadth first.
pub fn grow_pow2<R: Rng + ?Sized>(
    batch: &SampleBatch,
    depth: u32,
    rng: &mut R,
) -> Result<Partition> {
    if batch.is_empty() {
        return Err(Error::arg("preliminary sample is empty"));
    }
    if depth > MAX_DEPTH {
        return Err(Error::arg(format!(
            "depth {depth} exceeds the supported maximum of {MAX_DEPTH}"
        )));
    }
    let mut nodes: Vec<(Rectangle, Vec<usize>)> =
        vec![(Rectangle::unit(batch.dim()), (0..batch.len()).collect())];
    let mut decisions = Vec::with_capacity((1usize << depth) - 1);
    for level in 0..depth {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for (rect, indices) in nodes {
            let criteria = all_axis_criteria(batch, &indices, &rect);
            let (axis, was_tiebreak) = select_minimizer(&criteria, rng);
            decisions.push(SplitDecision {
                axis,
                n_plus: None,
                criterion_value: criteria[axis],
                was_tiebreak,
                level,
            });
            let pair = rect.split_mid(axis)?;
            let cut = pair.minus.upper()[axis];
            let (lo, hi): (Vec<usize>, Vec<usize>) = indices
                .into_iter()
                .partition(|&i| batch.coord(i, axis) < cut);
            next.push((pair.minus, lo));
            next.push((pair.plus, hi));
        }
        nodes = next;
    }
    Ok(Partition {
        leaves: nodes.into_iter().map(|(r, _)| r).collect(),
        depth: Some(depth),
        mode: PartitionMode::Pow2,
        decisions,
    })
}

/// Weighted criteria for every admissible `(axis, n_plus)` of a rational-mode node.
///
/// Returns `(axis, n_plus, criterion)` triples.
fn rational_candidates(
    batch: &SampleBatch,
    indices: &[usize],
    r: &Rectangle,
) -> Vec<(usize, u64, f64)> {
    let n_r = r
        .volume_numerator()
        .expect("rational nodes carry exact volumes");
    let m = indices.len();
    let mut out = Vec::with_capacity(r.dim() * (n_r as usize - 1));
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut prefix = vec![MomentAccumulator::new(); m + 1];
    let mut suffix = vec![MomentAccumulator::new(); m + 1];
    for axis in 0..r.dim() {
        sorted.clear();
        sorted.extend(
            indices
                .iter()
                .map(|&i| (batch.coord(i, axis), batch.value(i))),
        );
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for k in 0..m {
            let mut acc = prefix[k];
            acc.push(sorted[k].1);
            prefix[k + 1] = acc;
        }
        suffix[m] = MomentAccumulator::new();
        for k in (0..m).rev() {
            let mut acc = suffix[k + 1];
            acc.push(sorted[k].1);
            suffix[k] = acc;
        }
        let lower = r.lower()[axis];
        let edge = r.edge(axis);
        let mut below = 0;
        for n_minus in 1..n_r {
            let n_plus = n_r - n_minus;
            let cut = lower + (n_minus as f64 / n_r as f64) * edge;
            while below < m && sorted[below].0 < cut {
                below += 1;
            }
            let w_plus = n_plus as f64 / n_r as f64;
            let w_minus = n_minus as f64 / n_r as f64;
            let crit = w_plus * suffix[below].variance() + w_minus * prefix[below].variance();
            out.push((axis, n_plus, crit));
        }
    }
    out
}

/// Grows the arbitrary-N tree: every leaf ends with exact volume `1/N`.
pub fn grow_rational<R: Rng + ?Sized>(
    batch: &SampleBatch,
    total: u64,
    rng: &mut R,
) -> Result<Partition> {
    if total == 0 {
        return Err(Error::arg("N must be at least 1"));
    }
    if batch.len() as u64 != total {
        return Err(Error::arg(format!(
            "batch has {} points but N = {total}",
            batch.len()
        )));
    }
    let root = Rectangle::unit_with_total(batch.dim(), total);
    let mut queue: VecDeque<(Rectangle, Vec<usize>, u32)> = VecDeque::new();
    queue.push_back((root, (0..batch.len()).collect(), 0));
    let mut leaves = Vec::with_capacity(total as usize);
    let mut decisions = Vec::with_capacity(total as usize - 1);
    let mut criteria = Vec::new();
    while let Some((rect, indices, level)) = queue.pop_front() {
        if rect.volume_numerator() == Some(1) {
            leaves.push(rect);
            continue;
        }
        let candidates = rational_candidates(batch, &indices, &rect);
        criteria.clear();
        criteria.extend(candidates.iter().map(|c| c.2));
        let (pick, was_tiebreak) = select_minimizer(&criteria, rng);
        let (axis, n_plus, criterion_value) = candidates[pick];
        decisions.push(SplitDecision {
            axis,
            n_plus: Some(n_plus),
            criterion_value,
            was_tiebreak,
            level,
        });
        let pair = rect.split_frac(axis, n_plus)?;
        let cut = pair.minus.upper()[axis];
        let (lo, hi): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| batch.coord(i, axis) < cut);
        queue.push_back((pair.minus, lo, level + 1));
        queue.push_back((pair.plus, hi, level + 1));
    }
    Ok(Partition {
        leaves,
        depth: None,
        mode: PartitionMode::Rational,
        decisions,
    })
}

/// Exact volume `1/N` check helper used by tests and diagnostics.
pub fn all_leaves_have_volume(partition: &Partition, expected: ExactVolume) -> bool {
    partition
        .leaves()
        .iter()
        .all(|r| r.exact_volume().map(|v| v.ratio()) == Some(expected.ratio()))
}
