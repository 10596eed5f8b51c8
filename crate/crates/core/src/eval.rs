//! Evaluation: frame MAE, the size-based baseline, sequence re-splicing and
//! the parameter sweep.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{pick_anchors, AnchorSet};
use crate::config::Config;
use crate::discriminator::PhaseResult;
use crate::error::{input, Result};
use crate::imgproc::{label_components, BinaryMask, Connectivity, GrayFrame};
use crate::pipeline::{discriminate, filter_masks, segment_frames};

/// Mean absolute difference between predicted and true frame indices.
pub fn mae(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return input("MAE needs at least one pair");
    }
    let total: usize = pairs.iter().map(|&(p, t)| p.abs_diff(t)).sum();
    Ok(total as f64 / pairs.len() as f64)
}

/// Area of the cavity component holding `anchor`, per frame (0 when the
/// anchor pixel is tissue).
pub fn anchor_component_areas(masks: &[BinaryMask], anchor: crate::anchors::Point) -> Vec<usize> {
    masks
        .iter()
        .map(|mask| {
            let r = (anchor.row.round() as usize).min(mask.height() - 1);
            let c = (anchor.col.round() as usize).min(mask.width() - 1);
            if mask.get(r, c) == 1 {
                return 0;
            }
            let labeling = label_components(mask, false, Connectivity::Eight);
            labeling.area(labeling.label_at(r, c))
        })
        .collect()
}

/// Size-based baseline: ED is the frame with the largest anchor cavity, ES the
/// smallest; the earliest frame wins ties.
pub fn size_based_detect(masks: &[BinaryMask], anchors: &AnchorSet) -> Result<PhaseResult> {
    if masks.len() < 3 {
        return input(format!("need at least 3 masks, got {}", masks.len()));
    }
    let areas = anchor_component_areas(masks, anchors.primary());
    let max = *areas.iter().max().unwrap();
    let min = *areas.iter().min().unwrap();
    if max == min {
        return Ok(PhaseResult { t_ed: 1, t_es: 2, objective: 0.0, degenerate: true, i0: 1, j0: 2 });
    }
    let ed = areas.iter().position(|&a| a == max).unwrap() + 1;
    let es = areas.iter().position(|&a| a == min).unwrap() + 1;
    let spread = (max - min) as f64;
    let objective = if ed < es { spread } else { -spread };
    Ok(PhaseResult::from_pair(ed.min(es), ed.max(es), objective))
}

/// A sequence with a reversed stretch and its remapped labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spliced<F> {
    pub frames: Vec<F>,
    pub labels: Vec<usize>,
    /// Reversed span, 1-based inclusive.
    pub u: usize,
    pub v: usize,
}

/// Reverses frames `u..=v` (1-based) and maps labels inside the span to `u + v - g`.
pub fn splice_flip_at<F: Clone>(frames: &[F], labels: &[usize], u: usize, v: usize) -> Result<Spliced<F>> {
    if !(1 <= u && u < v && v <= frames.len()) {
        return input(format!("invalid splice span {u}..={v} for {} frames", frames.len()));
    }
    let mut out = frames.to_vec();
    out[u - 1..v].reverse();
    let labels = labels.iter().map(|&g| if (u..=v).contains(&g) { u + v - g } else { g }).collect();
    Ok(Spliced { frames: out, labels, u, v })
}

/// Draws `u < v` with `v - u >= 2` uniformly from the seed and applies
/// [`splice_flip_at`].
pub fn splice_flip<F: Clone>(frames: &[F], labels: &[usize], seed: u64) -> Result<Spliced<F>> {
    let t = frames.len();
    if t < 4 {
        return input(format!("splicing needs at least 4 frames, got {t}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let u = rng.random_range(1..=t);
        let v = rng.random_range(1..=t);
        if u < v && v - u >= 2 {
            return splice_flip_at(frames, labels, u, v);
        }
    }
}

/// One ground-truth row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sequence_id: String,
    pub t_ed: usize,
    pub t_es: usize,
}

/// A predicted pair, as read back from a detection result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sequence_id: String,
    pub t_ed: usize,
    pub t_es: usize,
    pub degenerate: bool,
}

/// Frames plus annotation, ready to run.
#[derive(Debug, Clone)]
pub struct AnnotatedSequence {
    pub id: String,
    pub frames: Vec<GrayFrame>,
    pub gt_ed: usize,
    pub gt_es: usize,
}

impl AnnotatedSequence {
    pub fn new(id: impl Into<String>, frames: Vec<GrayFrame>, gt_ed: usize, gt_es: usize) -> Result<Self> {
        let id = id.into();
        let t = frames.len();
        if !(1..=t).contains(&gt_ed) || !(1..=t).contains(&gt_es) || gt_ed == gt_es {
            return input(format!("{id}: labels ({gt_ed}, {gt_es}) invalid for {t} frames"));
        }
        Ok(Self { id, frames, gt_ed, gt_es })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sequence_id: String,
    pub pred_ed: Option<usize>,
    pub pred_es: Option<usize>,
    pub gt_ed: usize,
    pub gt_es: usize,
    pub degenerate: bool,
    /// Set when the pipeline failed on this sequence.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when every sequence was degenerate or failed.
    pub mu_ed: Option<f64>,
    pub mu_es: Option<f64>,
    /// Sequences entering the means.
    pub n: usize,
    /// Degenerate or failed sequences, excluded from the means.
    pub degenerate: usize,
    pub residuals: Vec<Residual>,
    pub config: Config,
}

impl EvalReport {
    /// Builds a report; degenerate and failed rows are counted, not averaged.
    pub fn from_residuals(residuals: Vec<Residual>, config: Config) -> Self {
        let mut ed = Vec::new();
        let mut es = Vec::new();
        for r in residuals.iter().filter(|r| !r.degenerate && r.error.is_none()) {
            if let (Some(pe), Some(ps)) = (r.pred_ed, r.pred_es) {
                ed.push((pe, r.gt_ed));
                es.push((ps, r.gt_es));
            }
        }
        let n = ed.len();
        Self { mu_ed: mae(&ed).ok(), mu_es: mae(&es).ok(), n, degenerate: residuals.len() - n, residuals, config }
    }

    /// One-line summary, e.g. `mu_ed=2.27 mu_es=1.29 n=50 degenerate=0`.
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        format!("mu_ed={} mu_es={} n={} degenerate={}", fmt(self.mu_ed), fmt(self.mu_es), self.n, self.degenerate)
    }
}

/// Pairs predictions with annotations by sequence id.
///
/// Every prediction must have an annotation; the error lists the missing ids.
pub fn evaluate(predictions: &[Prediction], truth: &[Annotation], config: Config) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &Annotation> = truth.iter().map(|a| (a.sequence_id.as_str(), a)).collect();
    let missing: Vec<&str> =
        predictions.iter().map(|p| p.sequence_id.as_str()).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return input(format!("no ground truth for: {}", missing.join(", ")));
    }
    let residuals = predictions
        .iter()
        .map(|p| {
            let gt = by_id[p.sequence_id.as_str()];
            Residual {
                sequence_id: p.sequence_id.clone(),
                pred_ed: Some(p.t_ed),
                pred_es: Some(p.t_es),
                gt_ed: gt.t_ed,
                gt_es: gt.t_es,
                degenerate: p.degenerate,
                error: None,
            }
        })
        .collect();
    Ok(EvalReport::from_residuals(residuals, config))
}

/// Axes of a parameter sweep. Every combination is one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub alpha: Vec<Option<f64>>,
    pub t_a: Vec<usize>,
}

impl SweepGrid {
    /// Direction counts and thresholds of the published ablation.
    pub fn ablation() -> Self {
        Self { k: vec![72, 180, 360], alpha: vec![None, Some(5.0), Some(10.0), Some(15.0)], t_a: vec![3] }
    }

    fn cells(&self, base: &Config) -> Vec<Config> {
        let mut out = Vec::new();
        for &k in &self.k {
            for &alpha in &self.alpha {
                for &t_a in &self.t_a {
                    out.push(Config { k, alpha, t_a, ..base.clone() });
                }
            }
        }
        out
    }
}

/// Runs every grid cell over the dataset.
///
/// Segmentation depends on none of the swept parameters, so it runs once per
/// sequence; anchors run once per `t_a`. Failures are recorded per sequence
/// and never abort the sweep.
pub fn sweep(dataset: &[AnnotatedSequence], grid: &SweepGrid, base: &Config) -> Result<Vec<EvalReport>> {
    if grid.k.is_empty() || grid.alpha.is_empty() || grid.t_a.is_empty() {
        return input("sweep grid has an empty axis");
    }
    let cells = grid.cells(base);
    for cell in &cells {
        cell.validate()?;
    }

    // rows[seq][cell]
    let rows: Vec<Vec<Residual>> = dataset
        .par_iter()
        .map(|seq| {
            let residual = |outcome: Result<PhaseResult>| match outcome {
                Ok(p) => Residual {
                    sequence_id: seq.id.clone(),
                    pred_ed: Some(p.t_ed),
                    pred_es: Some(p.t_es),
                    gt_ed: seq.gt_ed,
                    gt_es: seq.gt_es,
                    degenerate: p.degenerate,
                    error: None,
                },
                Err(e) => Residual {
                    sequence_id: seq.id.clone(),
                    pred_ed: None,
                    pred_es: None,
                    gt_ed: seq.gt_ed,
                    gt_es: seq.gt_es,
                    degenerate: true,
                    error: Some(e.to_string()),
                },
            };
            let filtered = segment_frames(&seq.frames, base).map(|initial| filter_masks(&initial, base));
            let mut anchors_by_ta: BTreeMap<usize, Result<AnchorSet>> = BTreeMap::new();
            cells
                .iter()
                .map(|cell| {
                    let outcome = filtered.clone().and_then(|masks| {
                        let anchors = anchors_by_ta
                            .entry(cell.t_a)
                            .or_insert_with(|| pick_anchors(&masks, cell.percentile, cell.t_a))
                            .clone()?;
                        discriminate(&masks, &anchors, cell).map(|(_, phase)| phase)
                    });
                    residual(outcome)
                })
                .collect()
        })
        .collect();

    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(ci, cfg)| EvalReport::from_residuals(rows.iter().map(|r| r[ci].clone()).collect(), cfg))
        .collect())
}

/// Header of the machine-readable sweep table.
pub const REPORT_HEADER: &str = "k,alpha,t_a,mu_ed,mu_es,n,degenerate";

/// One sweep-table row matching [`REPORT_HEADER`].
pub fn report_row(report: &EvalReport) -> String {
    let alpha = report.config.alpha.map_or_else(|| "none".to_string(), |a| a.to_string());
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    format!(
        "{},{},{},{},{},{},{}",
        report.config.k,
        alpha,
        report.config.t_a,
        fmt(report.mu_ed),
        fmt(report.mu_es),
        report.n,
        report.degenerate
    )
}
