//! Temporal expansion/contraction discriminator.
//!
//! Rays are cast from every anchor in `k` evenly spaced directions. The change
//! of each ray's length from one frame to the next is a vote: longer means the
//! cavity boundary moved outward. Votes are reduced to one expansion rate per
//! transition, the rates are accumulated into a relative-size curve and the
//! curve is searched for the frame pair that best separates one contraction
//! from one expansion.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::anchors::{AnchorSet, Point};
use crate::config::RateMode;
use crate::error::{input, param, Result};
use crate::imgproc::BinaryMask;

/// Distance between consecutive ray samples, in pixels.
pub const RAY_STEP: f64 = 0.5;

/// Guard added to the valid-ray count in the rate denominator.
pub const RATE_EPSILON: f64 = 1e-6;

/// Casts a ray from `anchor` at angle `theta` and returns the distance at
/// which it first samples a non-cavity pixel.
///
/// The ray advances `(sin theta, cos theta)` in `(row, col)` by
/// [`RAY_STEP`] and rounds each sample to the nearest pixel. The returned
/// distance is that of the sample along the ray. `Ok(None)` means the ray left
/// the image without meeting a 1-pixel.
pub fn ray_distance(mask: &BinaryMask, anchor: Point, theta: f64) -> Result<Option<f64>> {
    check_anchor(mask, anchor)?;
    Ok(march(mask, anchor, theta.sin(), theta.cos()))
}

fn check_anchor(mask: &BinaryMask, anchor: Point) -> Result<()> {
    let inside = |v: f64, n: usize| v.is_finite() && v >= 0.0 && v <= (n - 1) as f64;
    if !inside(anchor.row, mask.height()) || !inside(anchor.col, mask.width()) {
        return input(format!(
            "anchor ({}, {}) lies outside a {}x{} mask",
            anchor.row,
            anchor.col,
            mask.height(),
            mask.width()
        ));
    }
    Ok(())
}

fn march(mask: &BinaryMask, anchor: Point, dr: f64, dc: f64) -> Option<f64> {
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    let mut n = 0u32;
    loop {
        let t = n as f64 * RAY_STEP;
        let r = (anchor.row + t * dr).round() as i64;
        let c = (anchor.col + t * dc).round() as i64;
        if r < 0 || c < 0 || r >= h || c >= w {
            return None;
        }
        if mask.get(r as usize, c as usize) == 1 {
            return Some(t);
        }
        n += 1;
    }
}

/// `(sin, cos)` of the angles `2 pi k0 / k` for `k0 = 1..=k`.
pub fn directions(k: usize) -> Vec<(f64, f64)> {
    (1..=k)
        .map(|k0| {
            let theta = TAU * k0 as f64 / k as f64;
            (theta.sin(), theta.cos())
        })
        .collect()
}

/// Ray lengths for every anchor and direction on one mask, anchor-major.
pub fn distance_table(mask: &BinaryMask, anchors: &[Point], dirs: &[(f64, f64)]) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(anchors.len() * dirs.len());
    for &anchor in anchors {
        check_anchor(mask, anchor)?;
        out.extend(dirs.iter().map(|&(s, c)| march(mask, anchor, s, c)));
    }
    Ok(out)
}

/// Boundary-distance changes for one transition, `k x t_a` entries laid out
/// anchor-major. `None` marks an invalid entry (a ray that missed the boundary
/// in either frame).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub k: usize,
    pub t_a: usize,
    pub values: Vec<Option<f64>>,
}

impl DeltaRow {
    /// Entry for direction `k0` (1-based) from anchor `i` (1-based).
    pub fn get(&self, k0: usize, i: usize) -> Option<f64> {
        self.values[(i - 1) * self.k + (k0 - 1)]
    }

    /// Next-minus-current difference of two distance tables.
    pub fn between(current: &[Option<f64>], next: &[Option<f64>], k: usize, t_a: usize) -> Self {
        let values = current
            .iter()
            .zip(next)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            })
            .collect();
        Self { k, t_a, values }
    }
}

/// Change of every ray from `mask_j` to `mask_j1`; positive means expansion.
pub fn deltas_for_transition(
    mask_j: &BinaryMask,
    mask_j1: &BinaryMask,
    anchors: &AnchorSet,
    k: usize,
) -> Result<DeltaRow> {
    if !mask_j.same_shape(mask_j1) {
        return input("consecutive masks differ in size");
    }
    if k < 4 {
        return param(format!("direction count k must be >= 4, got {k}"));
    }
    let dirs = directions(k);
    let current = distance_table(mask_j, &anchors.anchors, &dirs)?;
    let next = distance_table(mask_j1, &anchors.anchors, &dirs)?;
    Ok(DeltaRow::between(&current, &next, k, anchors.t_a))
}

/// Expansion rate of one transition together with its valid-ray count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub valid: usize,
}

/// Reduces a row of changes to one expansion rate.
///
/// Valid changes are the finite ones with `|delta| < alpha` (all finite ones
/// when `alpha` is `None`). In [`RateMode::Counts`] the rate is
/// `(#positive - #negative) / (#valid + 1e-6)`; zeros only enlarge the
/// denominator. [`RateMode::SignedMean`] divides the sum of valid changes by
/// the same denominator instead.
pub fn expansion_rate(values: &[Option<f64>], alpha: Option<f64>, mode: RateMode) -> Rate {
    let mut valid = 0usize;
    let mut balance = 0.0f64;
    for delta in values.iter().flatten() {
        if alpha.is_some_and(|a| delta.abs() >= a) {
            continue;
        }
        valid += 1;
        balance += match mode {
            RateMode::Counts if *delta > 0.0 => 1.0,
            RateMode::Counts if *delta < 0.0 => -1.0,
            RateMode::Counts => 0.0,
            RateMode::SignedMean => *delta,
        };
    }
    Rate { value: balance / (valid as f64 + RATE_EPSILON), valid }
}

/// Per-transition rates and their running sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCurve {
    /// `rates[m - 1]` is the rate of the transition from frame `m` to `m + 1`.
    pub rates: Vec<f64>,
    /// `cumulative[m - 1]` is the accumulated rate at frame `m`; starts at 0.
    pub cumulative: Vec<f64>,
    /// Valid-ray count per transition; empty when built from bare rates.
    pub valid_counts: Vec<usize>,
}

impl ExpansionCurve {
    pub fn frame_count(&self) -> usize {
        self.cumulative.len()
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("curve has at least three frames")
    }
}

/// Prefix sums of `rates` for a sequence of `rates.len() + 1` frames.
pub fn cumulative_curve(rates: &[f64]) -> Result<ExpansionCurve> {
    if rates.len() < 2 {
        return input(format!("need at least 3 frames (2 rates), got {} rates", rates.len()));
    }
    let mut cumulative = Vec::with_capacity(rates.len() + 1);
    let mut acc = 0.0;
    cumulative.push(acc);
    for &e in rates {
        acc += e;
        cumulative.push(acc);
    }
    Ok(ExpansionCurve { rates: rates.to_vec(), cumulative, valid_counts: Vec::new() })
}

/// ED/ES frames picked from a cumulative curve. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub t_ed: usize,
    pub t_es: usize,
    /// Signed `2 A_i0 - 2 A_j0 + A_T`.
    pub objective: f64,
    pub degenerate: bool,
    pub i0: usize,
    pub j0: usize,
}

impl PhaseResult {
    /// Orients the raw pair by the sign of its objective.
    pub fn from_pair(i0: usize, j0: usize, objective: f64) -> Self {
        let (t_ed, t_es) = if objective < 0.0 { (j0, i0) } else { (i0, j0) };
        Self { t_ed, t_es, objective, degenerate: objective == 0.0, i0, j0 }
    }
}

/// The pair objective. Every caller must evaluate it in exactly this form so
/// that floating-point ties are seen identically.
#[inline]
pub fn pair_objective(a_i: f64, a_j: f64, a_total: f64) -> f64 {
    2.0 * a_i - 2.0 * a_j + a_total
}

/// Finds `i < j` maximizing `|2 A_i - 2 A_j + A_T|`, lexicographically
/// smallest on ties, in linear time.
///
/// The objective is monotone in `A_i` and in `-A_j` even after rounding, so
/// running extrema give the maximum exactly. A second pass locates the first
/// row that reaches it, and a scan of that row gives the first column.
pub fn find_phase_pair(curve: &ExpansionCurve) -> Result<PhaseResult> {
    let a = &curve.cumulative;
    let n = a.len();
    if n < 3 {
        return input(format!("need at least 3 frames, got {n}"));
    }
    let total = a[n - 1];
    let f = |i: usize, j: usize| pair_objective(a[i], a[j], total);

    let mut best = 0.0f64;
    let (mut hi, mut lo) = (0usize, 0usize);
    for j in 1..n {
        best = best.max(f(hi, j)).max(-f(lo, j));
        if a[j] > a[hi] {
            hi = j;
        }
        if a[j] < a[lo] {
            lo = j;
        }
    }

    // Suffix argmin/argmax of A over j > i.
    let mut suffix_min = vec![n - 1; n];
    let mut suffix_max = vec![n - 1; n];
    for j in (1..n - 1).rev() {
        suffix_min[j] = if a[j] < a[suffix_min[j + 1]] { j } else { suffix_min[j + 1] };
        suffix_max[j] = if a[j] > a[suffix_max[j + 1]] { j } else { suffix_max[j + 1] };
    }

    let i0 = (0..n - 1)
        .find(|&i| f(i, suffix_min[i + 1]) == best || f(i, suffix_max[i + 1]) == -best)
        .expect("maximum is attained");
    let j0 = (i0 + 1..n).find(|&j| f(i0, j).abs() == best).expect("row attains maximum");

    Ok(PhaseResult::from_pair(i0 + 1, j0 + 1, f(i0, j0)))
}
