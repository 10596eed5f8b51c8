//! Pixel-level primitives: the grayscale frame model, adaptive local-mean
//! thresholding, connected-component labeling and small-component removal.
//!
//! Images are row-major. A pixel is addressed as `(row, col)`.

use serde::{Deserialize, Serialize};

use crate::error::{input, param, Result};

/// Smallest frame side accepted by the detection pipeline.
pub const MIN_FRAME_SIDE: usize = 8;

/// A single-channel 8-bit frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return input(format!("frame must be non-empty, got {height}x{width}"));
        }
        if pixels.len() != height * width {
            return input(format!("frame of {height}x{width} needs {} pixels, got {}", height * width, pixels.len()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds a frame by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Rejects frames smaller than [`MIN_FRAME_SIDE`] on either side.
    pub fn check_pipeline_size(&self) -> Result<()> {
        if self.height < MIN_FRAME_SIDE || self.width < MIN_FRAME_SIDE {
            return input(format!(
                "frame is {}x{}, the pipeline needs at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
                self.height, self.width
            ));
        }
        Ok(())
    }
}

/// Binary segmentation: 0 is cavity, 1 is tissue or anything else.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return input(format!("mask must be non-empty, got {height}x{width}"));
        }
        if values.len() != height * width {
            return input(format!("mask of {height}x{width} needs {} values, got {}", height * width, values.len()));
        }
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return input(format!("mask values must be 0 or 1, found {bad}"));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value as u8; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c) as u8);
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.values[row * self.width + col] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// N, S, E and W neighbours.
    Four,
    /// All eight neighbours.
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Result of [`label_components`].
///
/// Label 0 marks pixels not equal to the queried value. Labels `1..=n` are
/// assigned in raster order of each component's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    /// `areas[id - 1]` is the pixel count of component `id`.
    pub areas: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.areas.len()
    }

    pub fn area(&self, id: u32) -> usize {
        if id == 0 {
            0
        } else {
            self.areas[id as usize - 1]
        }
    }

    #[inline]
    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Pixel-coordinate centroids `(mean row, mean col)`, indexed like `areas`.
    pub fn centroids(&self) -> Vec<(f64, f64)> {
        let mut sums = vec![(0.0f64, 0.0f64); self.count()];
        for (idx, &label) in self.labels.iter().enumerate() {
            if label > 0 {
                let s = &mut sums[label as usize - 1];
                s.0 += (idx / self.width) as f64;
                s.1 += (idx % self.width) as f64;
            }
        }
        sums.iter().zip(&self.areas).map(|(&(r, c), &a)| (r / a as f64, c / a as f64)).collect()
    }

    /// Pixels of component `id` in raster order.
    pub fn pixels_of(&self, id: u32) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == id && id != 0)
            .map(|(idx, _)| (idx / self.width, idx % self.width))
            .collect()
    }
}

/// Sum of each `window x window` neighbourhood, replicating edge pixels.
fn box_sums(frame: &GrayFrame, window: usize) -> Vec<u32> {
    let (h, w) = (frame.height, frame.width);
    let half = window / 2;

    // Running sum over one padded line: out[i] = sum of line[clamp(i - half ..= i + half)].
    fn line_sums(line: &[u32], half: usize, out: &mut [u32]) {
        let n = line.len();
        let at = |i: isize| line[i.clamp(0, n as isize - 1) as usize];
        let mut acc: u32 = (-(half as isize)..=half as isize).map(at).sum();
        out[0] = acc;
        for (i, slot) in out.iter_mut().enumerate().take(n).skip(1) {
            acc += at(i as isize + half as isize);
            acc -= at(i as isize - half as isize - 1);
            *slot = acc;
        }
    }

    let mut horizontal = vec![0u32; h * w];
    let mut line = vec![0u32; w];
    for r in 0..h {
        for (dst, &p) in line.iter_mut().zip(&frame.pixels[r * w..(r + 1) * w]) {
            *dst = p as u32;
        }
        line_sums(&line, half, &mut horizontal[r * w..(r + 1) * w]);
    }

    let mut sums = vec![0u32; h * w];
    let mut column = vec![0u32; h];
    let mut column_out = vec![0u32; h];
    for c in 0..w {
        for r in 0..h {
            column[r] = horizontal[r * w + c];
        }
        line_sums(&column, half, &mut column_out);
        for r in 0..h {
            sums[r * w + c] = column_out[r];
        }
    }
    sums
}

/// Local-mean adaptive threshold.
///
/// A pixel becomes cavity (0) when its intensity is strictly below the mean of
/// its `window x window` neighbourhood minus `offset`; everything else is 1.
/// The neighbourhood replicates edge pixels beyond the border.
pub fn adaptive_threshold(frame: &GrayFrame, window: usize, offset: f64) -> Result<BinaryMask> {
    if window.is_multiple_of(2) || window < 3 {
        return param(format!("window must be odd and >= 3, got {window}"));
    }
    if window > frame.height.min(frame.width) {
        return input(format!("window {window} does not fit a {}x{} frame", frame.height, frame.width));
    }
    if !offset.is_finite() || offset < 0.0 {
        return param(format!("offset must be finite and >= 0, got {offset}"));
    }

    let n = (window * window) as f64;
    let sums = box_sums(frame, window);
    let values = frame
        .pixels
        .iter()
        .zip(&sums)
        .map(|(&p, &s)| {
            // p < s / n - offset, kept in one multiplication to stay exact for integer offsets.
            let cavity = (p as f64 + offset) * n < s as f64;
            (!cavity) as u8
        })
        .collect();
    Ok(BinaryMask { height: frame.height, width: frame.width, values })
}

/// Labels the connected components formed by pixels equal to `value`.
pub fn label_components(mask: &BinaryMask, value: bool, connectivity: Connectivity) -> ComponentLabeling {
    let (h, w) = (mask.height, mask.width);
    let target = value as u8;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; h * w];
    let mut areas = Vec::new();
    let mut stack = Vec::new();

    for start in 0..h * w {
        if mask.values[start] != target || labels[start] != 0 {
            continue;
        }
        let id = areas.len() as u32 + 1;
        let mut area = 0usize;
        labels[start] = id;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            area += 1;
            let (r, c) = ((idx / w) as isize, (idx % w) as isize);
            for &(dr, dc) in offsets {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let nidx = nr as usize * w + nc as usize;
                if mask.values[nidx] == target && labels[nidx] == 0 {
                    labels[nidx] = id;
                    stack.push(nidx);
                }
            }
        }
        areas.push(area);
    }

    ComponentLabeling { height: h, width: w, labels, areas, connectivity }
}

/// Clears every non-cavity (1) component with fewer than `min_area` pixels.
///
/// Components use 8-connectivity. Cavity pixels are never touched.
pub fn filter_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    let labeling = label_components(mask, true, Connectivity::Eight);
    let mut out = mask.clone();
    for (v, &label) in out.values.iter_mut().zip(&labeling.labels) {
        if label != 0 && labeling.area(label) < min_area {
            *v = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight nine-loop reference for the local mean with edge replication.
    fn reference_threshold(frame: &GrayFrame, window: usize, offset: f64) -> Vec<u8> {
        let (h, w) = (frame.height() as isize, frame.width() as isize);
        let half = (window / 2) as isize;
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let mut sum = 0.0;
                for dr in -half..=half {
                    for dc in -half..=half {
                        let rr = (r + dr).clamp(0, h - 1) as usize;
                        let cc = (c + dc).clamp(0, w - 1) as usize;
                        sum += frame.get(rr, cc) as f64;
                    }
                }
                let mean = sum / (window * window) as f64;
                let p = frame.get(r as usize, c as usize) as f64;
                out.push(if p < mean - offset { 0 } else { 1 });
            }
        }
        out
    }

    fn recursive_fill(mask: &BinaryMask, seen: &mut [bool], r: isize, c: isize, value: u8, eight: bool) -> usize {
        let (h, w) = (mask.height() as isize, mask.width() as isize);
        if r < 0 || c < 0 || r >= h || c >= w {
            return 0;
        }
        let idx = (r * w + c) as usize;
        if seen[idx] || mask.values()[idx] != value {
            return 0;
        }
        seen[idx] = true;
        let mut area = 1;
        for dr in -1..=1 {
            for dc in -1..=1 {
                if (dr, dc) == (0, 0) || (!eight && dr != 0 && dc != 0) {
                    continue;
                }
                area += recursive_fill(mask, seen, r + dr, c + dc, value, eight);
            }
        }
        area
    }

    fn oracle_areas(mask: &BinaryMask, value: bool, eight: bool) -> Vec<usize> {
        let mut seen = vec![false; mask.values().len()];
        let mut areas = Vec::new();
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                let a = recursive_fill(mask, &mut seen, r as isize, c as isize, value as u8, eight);
                if a > 0 {
                    areas.push(a);
                }
            }
        }
        areas
    }

    #[test]
    fn uniform_frame_has_no_cavity() {
        let frame = GrayFrame::filled(5, 5, 100).unwrap();
        let mask = adaptive_threshold(&frame, 3, 5.0).unwrap();
        assert_eq!(mask.count_ones(), 25);
    }

    #[test]
    fn single_dark_pixel_is_the_only_cavity() {
        let frame = GrayFrame::from_fn(5, 5, |r, c| if (r, c) == (2, 2) { 10 } else { 200 }).unwrap();
        let mask = adaptive_threshold(&frame, 5, 5.0).unwrap();
        let zeros: Vec<_> = (0..25).filter(|&i| mask.values()[i] == 0).collect();
        assert_eq!(zeros, vec![12]);
        assert_eq!(mask.values(), reference_threshold(&frame, 5, 5.0).as_slice());
    }

    #[test]
    fn step_edge_marks_dark_side_of_boundary() {
        let frame = GrayFrame::from_fn(9, 9, |_, c| if c < 4 { 40 } else { 220 }).unwrap();
        let mask = adaptive_threshold(&frame, 3, 5.0).unwrap();
        // Frozen from the reference: only column 3 (dark, next to bright) sees a raised mean.
        for r in 0..9 {
            for c in 0..9 {
                assert_eq!(mask.get(r, c), if c == 3 { 0 } else { 1 }, "({r},{c})");
            }
        }
        assert_eq!(mask.values(), reference_threshold(&frame, 3, 5.0).as_slice());
    }

    #[test]
    fn threshold_rejects_bad_windows() {
        let frame = GrayFrame::filled(8, 8, 0).unwrap();
        assert!(matches!(adaptive_threshold(&frame, 4, 5.0), Err(crate::DdsbError::InvalidParameter(_))));
        assert!(matches!(adaptive_threshold(&frame, 1, 5.0), Err(crate::DdsbError::InvalidParameter(_))));
        assert!(matches!(adaptive_threshold(&frame, 9, 5.0), Err(crate::DdsbError::InvalidInput(_))));
        assert!(adaptive_threshold(&frame, 3, -1.0).is_err());
    }

    #[test]
    fn pipeline_size_check() {
        assert!(GrayFrame::filled(7, 20, 0).unwrap().check_pipeline_size().is_err());
        assert!(GrayFrame::filled(8, 8, 0).unwrap().check_pipeline_size().is_ok());
        assert!(GrayFrame::new(2, 2, vec![0; 3]).is_err());
        assert!(BinaryMask::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn all_zero_mask_is_one_component() {
        let mask = BinaryMask::filled(6, 7, false).unwrap();
        let lab = label_components(&mask, false, Connectivity::Eight);
        assert_eq!(lab.areas, vec![42]);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let mask = BinaryMask::from_fn(4, 4, |r, c| (r, c) == (1, 1) || (r, c) == (2, 2)).unwrap();
        assert_eq!(label_components(&mask, true, Connectivity::Eight).count(), 1);
        assert_eq!(label_components(&mask, true, Connectivity::Four).count(), 2);
    }

    #[test]
    fn isolated_pixel_is_removed() {
        let mask = BinaryMask::from_fn(8, 8, |r, c| (r, c) == (3, 4)).unwrap();
        assert_eq!(filter_small_components(&mask, 2).count_ones(), 0);
        let ones = BinaryMask::filled(10, 10, true).unwrap();
        assert_eq!(filter_small_components(&ones, 10), ones);
    }

    #[test]
    fn only_large_component_survives() {
        // 3-pixel bar at the top left, 12-pixel block (3x4) at the bottom right.
        let mask =
            BinaryMask::from_fn(10, 10, |r, c| (r == 0 && c < 3) || ((6..9).contains(&r) && (5..9).contains(&c)))
                .unwrap();
        let oracle = oracle_areas(&mask, true, true);
        assert_eq!(oracle, vec![3, 12]);
        let out = filter_small_components(&mask, 5);
        assert_eq!(out.count_ones(), 12);
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(7, 6), 1);
    }

    #[test]
    fn centroids_and_pixels() {
        let mask = BinaryMask::from_fn(8, 8, |r, c| (2..4).contains(&r) && (1..5).contains(&c)).unwrap();
        let lab = label_components(&mask, true, Connectivity::Eight);
        assert_eq!(lab.centroids(), vec![(2.5, 2.5)]);
        assert_eq!(lab.pixels_of(1).len(), 8);
        assert!(lab.pixels_of(0).is_empty());
    }

    fn mask_strategy(h: usize, w: usize) -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(0u8..=1, h * w).prop_map(move |v| BinaryMask::new(h, w, v).unwrap())
    }

    fn frame_strategy() -> impl Strategy<Value = GrayFrame> {
        (8usize..20, 8usize..20).prop_flat_map(|(h, w)| {
            proptest::collection::vec(0u8..=200, h * w).prop_map(move |v| GrayFrame::new(h, w, v).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn threshold_matches_reference(frame in frame_strategy(), half in 1usize..4, offset in 0.0f64..20.0) {
            let window = 2 * half + 1;
            let mask = adaptive_threshold(&frame, window, offset).unwrap();
            let expected = reference_threshold(&frame, window, offset);
            prop_assert_eq!(mask.values(), expected.as_slice());
        }

        #[test]
        fn threshold_ignores_constant_shift(frame in frame_strategy(), shift in 0u8..=55) {
            let shifted = GrayFrame::new(frame.height(), frame.width(),
                frame.pixels().iter().map(|&p| p + shift).collect()).unwrap();
            prop_assert_eq!(adaptive_threshold(&frame, 5, 5.0).unwrap(), adaptive_threshold(&shifted, 5, 5.0).unwrap());
        }

        #[test]
        fn threshold_is_translation_consistent(frame in frame_strategy()) {
            // Shift content down by one row; rows far enough from both borders must agree.
            let (h, w) = (frame.height(), frame.width());
            let shifted = GrayFrame::from_fn(h, w, |r, c| frame.get(r.saturating_sub(1), c)).unwrap();
            let a = adaptive_threshold(&frame, 3, 5.0).unwrap();
            let b = adaptive_threshold(&shifted, 3, 5.0).unwrap();
            for r in 1..h - 2 {
                for c in 1..w - 1 {
                    prop_assert_eq!(a.get(r, c), b.get(r + 1, c));
                }
            }
        }

        #[test]
        fn labeling_matches_flood_fill(mask in mask_strategy(16, 16), value: bool) {
            for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
                let lab = label_components(&mask, value, conn);
                prop_assert_eq!(&lab.areas, &oracle_areas(&mask, value, eight));
                let total: usize = lab.areas.iter().sum();
                let expected = mask.values().iter().filter(|&&v| v == value as u8).count();
                prop_assert_eq!(total, expected);
            }
        }

        #[test]
        fn filter_is_idempotent_and_monotone(mask in mask_strategy(12, 12), s in 0usize..20) {
            let once = filter_small_components(&mask, s);
            prop_assert_eq!(filter_small_components(&once, s), once.clone());
            for (a, b) in mask.values().iter().zip(once.values()) {
                prop_assert!(*b <= *a);
            }
        }
    }
}
