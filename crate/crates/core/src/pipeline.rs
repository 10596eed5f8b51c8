//! End-to-end composition: segmentation, anchors, discriminator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{pick_anchors, AnchorSet};
use crate::config::Config;
use crate::discriminator::{
    cumulative_curve, directions, distance_table, expansion_rate, find_phase_pair, DeltaRow, ExpansionCurve,
    PhaseResult,
};
use crate::error::{input, Result};
use crate::imgproc::{adaptive_threshold, filter_small_components, BinaryMask, GrayFrame};
use crate::phantom::perturb_masks;

/// Everything a detection run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub phase: PhaseResult,
    pub curve: ExpansionCurve,
    pub anchors: AnchorSet,
}

fn check_sequence(frames: &[GrayFrame]) -> Result<()> {
    if frames.len() < 3 {
        return input(format!("need at least 3 frames, got {}", frames.len()));
    }
    let (h, w) = (frames[0].height(), frames[0].width());
    for (i, f) in frames.iter().enumerate() {
        if f.height() != h || f.width() != w {
            return input(format!("frame {} is {}x{}, expected {h}x{w}", i + 1, f.height(), f.width()));
        }
        f.check_pipeline_size()?;
    }
    Ok(())
}

/// Initial per-frame segmentation (adaptive threshold only).
pub fn segment_frames(frames: &[GrayFrame], cfg: &Config) -> Result<Vec<BinaryMask>> {
    cfg.validate()?;
    check_sequence(frames)?;
    frames.par_iter().map(|f| adaptive_threshold(f, cfg.window, cfg.offset)).collect()
}

/// Removes small non-cavity components from every mask.
pub fn filter_masks(initial: &[BinaryMask], cfg: &Config) -> Vec<BinaryMask> {
    initial.par_iter().map(|m| filter_small_components(m, cfg.min_area_for(m.values().len()))).collect()
}

/// Runs the discriminator on filtered masks with precomputed anchors.
pub fn discriminate(
    filtered: &[BinaryMask],
    anchors: &AnchorSet,
    cfg: &Config,
) -> Result<(ExpansionCurve, PhaseResult)> {
    cfg.validate()?;
    if filtered.len() < 3 {
        return input(format!("need at least 3 frames, got {}", filtered.len()));
    }
    if filtered.iter().any(|m| !m.same_shape(&filtered[0])) {
        return input("masks differ in size");
    }
    let dirs = directions(cfg.k);
    let tables: Vec<Vec<Option<f64>>> =
        filtered.par_iter().map(|m| distance_table(m, &anchors.anchors, &dirs)).collect::<Result<_>>()?;

    let (rates, valid_counts): (Vec<f64>, Vec<usize>) = tables
        .windows(2)
        .map(|pair| {
            let row = DeltaRow::between(&pair[0], &pair[1], cfg.k, anchors.t_a);
            let rate = expansion_rate(&row.values, cfg.alpha, cfg.rate_mode);
            (rate.value, rate.valid)
        })
        .unzip();

    let mut curve = cumulative_curve(&rates)?;
    curve.valid_counts = valid_counts;
    let phase = find_phase_pair(&curve)?;
    Ok((curve, phase))
}

/// Anchors and discriminator on an already filtered mask sequence.
pub fn detect_from_masks(filtered: &[BinaryMask], cfg: &Config) -> Result<Detection> {
    cfg.validate()?;
    if filtered.len() < 3 {
        return input(format!("need at least 3 frames, got {}", filtered.len()));
    }
    let anchors = pick_anchors(filtered, cfg.percentile, cfg.t_a)?;
    let (curve, phase) = discriminate(filtered, &anchors, cfg)?;
    Ok(Detection { phase, curve, anchors })
}

/// Detects the ED and ES frames of a grayscale sequence.
pub fn detect_phases(frames: &[GrayFrame], cfg: &Config) -> Result<Detection> {
    let initial = segment_frames(frames, cfg)?;
    detect_from_masks(&filter_masks(&initial, cfg), cfg)
}

/// Like [`detect_phases`], but flips initial-segmentation pixels with
/// probability `flip_prob` before the small-component filter runs.
pub fn detect_phases_perturbed(frames: &[GrayFrame], cfg: &Config, flip_prob: f64, seed: u64) -> Result<Detection> {
    let initial = perturb_masks(&segment_frames(frames, cfg)?, flip_prob, seed)?;
    detect_from_masks(&filter_masks(&initial, cfg), cfg)
}
