//! Anchor selection: find the region that stays cavity for the whole sequence,
//! keep the candidate blob nearest the top center of the frame and cut it into
//! horizontal bands whose centroids serve as ray origins.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{input, param, DdsbError, Result};
use crate::imgproc::{label_components, BinaryMask, Connectivity};

/// Number of largest candidate components considered for the anchor region.
pub const ANCHOR_COMPONENT_POOL: usize = 4;

/// A real-valued pixel position, `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

/// Per-pixel count of frames in which the filtered mask is 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyMap {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub sums: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    /// Pixels of the chosen cavity region, raster order.
    pub region_pixels: Vec<(usize, usize)>,
    /// Band centroids, top band first.
    pub anchors: Vec<Point>,
    /// Effective band count, i.e. `anchors.len()`.
    pub t_a: usize,
    /// Band count that was asked for; larger than `t_a` when bands were empty.
    pub requested_t_a: usize,
}

impl AnchorSet {
    /// The middle anchor, index `ceil(t_a / 2)` counted from 1.
    pub fn primary(&self) -> Point {
        self.anchors[self.t_a.div_ceil(2) - 1]
    }
}

pub fn temporal_occupancy(masks: &[BinaryMask]) -> Result<OccupancyMap> {
    if masks.len() < 2 {
        return input(format!("occupancy needs at least 2 masks, got {}", masks.len()));
    }
    let first = &masks[0];
    let mut sums = vec![0u32; first.values().len()];
    for (i, mask) in masks.iter().enumerate() {
        if !mask.same_shape(first) {
            return input(format!(
                "mask {} is {}x{}, expected {}x{}",
                i + 1,
                mask.height(),
                mask.width(),
                first.height(),
                first.width()
            ));
        }
        for (s, &v) in sums.iter_mut().zip(mask.values()) {
            *s += v as u32;
        }
    }
    Ok(OccupancyMap { height: first.height(), width: first.width(), frames: masks.len(), sums })
}

/// Nearest-rank percentile: the `ceil(q * n)`-th smallest value.
pub fn nearest_rank(values: &[u32], q: f64) -> u32 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // The epsilon absorbs products like 0.07 * 100 = 7.000000000000001.
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

/// Marks (1) the pixels whose occupancy is at or below the `percentile` value.
pub fn candidate_mask(occ: &OccupancyMap, percentile: f64) -> Result<BinaryMask> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return param(format!("percentile must lie in (0, 1), got {percentile}"));
    }
    let threshold = nearest_rank(&occ.sums, percentile);
    BinaryMask::new(occ.height, occ.width, occ.sums.iter().map(|&s| (s <= threshold) as u8).collect())
}

/// Picks the candidate component whose centroid is nearest `(0, width / 2)`
/// among the four largest components.
///
/// Equal distances prefer the larger area, then the component found first in
/// raster order.
pub fn select_anchor_region(candidates: &BinaryMask) -> Result<Vec<(usize, usize)>> {
    let labeling = label_components(candidates, true, Connectivity::Eight);
    if labeling.count() == 0 {
        return Err(DdsbError::Pipeline("anchor candidate mask is empty".into()));
    }
    let centroids = labeling.centroids();
    let top_center = Point::new(0.0, candidates.width() as f64 / 2.0);

    let mut by_size: Vec<usize> = (0..labeling.count()).collect();
    by_size.sort_by(|&a, &b| labeling.areas[b].cmp(&labeling.areas[a]).then(a.cmp(&b)));
    by_size.truncate(ANCHOR_COMPONENT_POOL);

    let best = by_size
        .into_iter()
        .map(|i| {
            let (r, c) = centroids[i];
            (i, Point::new(r, c).distance(&top_center))
        })
        .min_by(|&(a, da), &(b, db)| da.total_cmp(&db).then(labeling.areas[b].cmp(&labeling.areas[a])).then(a.cmp(&b)))
        .map(|(i, _)| i)
        .expect("at least one component");

    Ok(labeling.pixels_of(best as u32 + 1))
}

/// Splits the region's row span into `t_a` contiguous bands and returns the
/// centroid of each non-empty band.
///
/// Band heights differ by at most one row; the first bands take the extra rows.
pub fn band_anchors(region: &[(usize, usize)], t_a: usize) -> Result<AnchorSet> {
    if t_a == 0 {
        return param("band count must be >= 1");
    }
    if region.is_empty() {
        return input("anchor region is empty");
    }
    let r_min = region.iter().map(|p| p.0).min().unwrap();
    let r_max = region.iter().map(|p| p.0).max().unwrap();
    let span = r_max - r_min + 1;
    let (base, extra) = (span / t_a, span % t_a);

    // Row offset -> band index.
    let mut band_of_row = Vec::with_capacity(span);
    for band in 0..t_a {
        let rows = base + usize::from(band < extra);
        band_of_row.extend(std::iter::repeat_n(band, rows));
    }

    let mut sums = vec![(0.0f64, 0.0f64, 0usize); t_a];
    for &(r, c) in region {
        let s = &mut sums[band_of_row[r - r_min]];
        s.0 += r as f64;
        s.1 += c as f64;
        s.2 += 1;
    }

    let anchors: Vec<Point> =
        sums.iter().filter(|s| s.2 > 0).map(|&(r, c, n)| Point::new(r / n as f64, c / n as f64)).collect();
    if anchors.len() < t_a {
        warn!("{} of {t_a} anchor bands are empty and were skipped", t_a - anchors.len());
    }

    let mut region_pixels = region.to_vec();
    region_pixels.sort_unstable();
    Ok(AnchorSet { region_pixels, t_a: anchors.len(), anchors, requested_t_a: t_a })
}

/// Runs occupancy, candidate selection, region choice and banding in sequence.
pub fn pick_anchors(filtered: &[BinaryMask], percentile: f64, t_a: usize) -> Result<AnchorSet> {
    let occ = temporal_occupancy(filtered)?;
    let candidates = candidate_mask(&occ, percentile)?;
    let region = select_anchor_region(&candidates)?;
    band_anchors(&region, t_a)
}
