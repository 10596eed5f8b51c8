use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ddsb_core::eval::{evaluate, report_row, sweep, AnnotatedSequence, Prediction, SweepGrid, REPORT_HEADER};
use ddsb_core::phantom::{perturb_masks, render, PhantomSpec};
use ddsb_core::{detect_phases, Config, Detection};
use serde::{Deserialize, Serialize};

use crate::args::{DetectArgs, EvalArgs, PhantomArgs, SweepArgs};
use crate::io;
use crate::plot::render_svg;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_DEGENERATE: u8 = 2;

/// What `detect` writes as its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    pub sequence_id: String,
    pub t_ed: usize,
    pub t_es: usize,
    pub objective: f64,
    pub degenerate: bool,
    /// Every setting of the run, with the minimum area resolved to pixels.
    pub config: Config,
}

impl DetectOutput {
    pub fn new(sequence_id: String, det: &Detection, mut config: Config, pixel_count: usize) -> Self {
        config.min_area = Some(config.min_area_for(pixel_count));
        Self {
            sequence_id,
            t_ed: det.phase.t_ed,
            t_es: det.phase.t_es,
            objective: det.phase.objective,
            degenerate: det.phase.degenerate,
            config,
        }
    }
}

/// `frame,E,A,valid_count`. E and valid_count on row m describe the
/// transition from frame m to m+1, so they are blank on the last row.
pub fn curve_csv(det: &Detection) -> String {
    let curve = &det.curve;
    let mut out = String::from("frame,E,A,valid_count\n");
    for (i, a) in curve.cumulative.iter().enumerate() {
        match curve.rates.get(i) {
            Some(e) => {
                let valid = curve.valid_counts.get(i).map_or(String::new(), |v| v.to_string());
                let _ = writeln!(out, "{},{},{},{}", i + 1, e, a, valid);
            }
            None => {
                let _ = writeln!(out, "{},,{},", i + 1, a);
            }
        }
    }
    out
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn detect(args: &DetectArgs) -> Result<u8> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    let frames = io::read_frames(&args.frames_dir)?;
    let id = io::sequence_id(&args.frames_dir);
    let det =
        detect_phases(&frames, &cfg).with_context(|| format!("detection failed on {}", args.frames_dir.display()))?;
    let pixels = frames[0].height() * frames[0].width();
    let result = DetectOutput::new(id.clone(), &det, cfg, pixels);

    let mut json = serde_json::to_string_pretty(&result)?;
    json.push('\n');
    emit(args.out.as_ref(), &json)?;
    if let Some(path) = &args.curve {
        io::write_atomic(path, curve_csv(&det).as_bytes())?;
    }
    if let Some(path) = &args.plot {
        io::write_atomic(path, render_svg(&det.curve, &det.phase, &id).as_bytes())?;
    }
    if det.phase.degenerate {
        log::warn!("{id}: cumulative curve is flat, result is degenerate");
        return Ok(EXIT_DEGENERATE);
    }
    Ok(EXIT_OK)
}

pub fn phantom(args: &PhantomArgs) -> Result<u8> {
    let spec: PhantomSpec = args.spec();
    spec.validate()?;
    let mut masks: Vec<_> = (1..=spec.frame_count).map(|t| spec.cavity_mask(t)).collect();
    if spec.flip_prob > 0.0 {
        masks = perturb_masks(&masks, spec.flip_prob, spec.seed)?;
    }
    let seq = render(&spec, &masks)?;
    let width = seq.frames.len().to_string().len().max(4);
    for (i, frame) in seq.frames.iter().enumerate() {
        let path = args.out_dir.join(format!("frame_{:0width$}.pgm", i + 1));
        io::write_atomic(&path, &io::encode_pgm(frame)?)?;
    }
    let gt = ddsb_core::eval::Annotation { sequence_id: seq.id.clone(), t_ed: seq.ed_frame, t_es: seq.es_frame };
    io::write_atomic(&args.out_dir.join("ground_truth.csv"), io::ground_truth_csv(&[gt]).as_bytes())?;
    log::info!("wrote {} frames to {}", seq.frames.len(), args.out_dir.display());
    Ok(EXIT_OK)
}

/// Expands patterns; arguments that match nothing are taken as literal paths.
fn expand_patterns(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = BTreeSet::new();
    for pat in patterns {
        let mut hit = false;
        for entry in glob::glob(pat).with_context(|| format!("bad pattern `{pat}`"))? {
            out.insert(entry?);
            hit = true;
        }
        if !hit {
            let path = PathBuf::from(pat);
            if !path.is_file() {
                bail!("no prediction files match `{pat}`");
            }
            out.insert(path);
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Deserialize)]
struct PredictionFile {
    #[serde(flatten)]
    prediction: Prediction,
    config: Option<Config>,
}

pub fn eval(args: &EvalArgs) -> Result<u8> {
    let truth = io::read_ground_truth(&args.gt)?;
    let mut predictions = Vec::new();
    let mut config = None;
    for path in expand_patterns(&args.predictions)? {
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let file: PredictionFile =
            serde_json::from_str(&text).with_context(|| format!("{} is not a detection result", path.display()))?;
        if config.is_none() {
            config = file.config;
        }
        predictions.push(file.prediction);
    }
    let report = evaluate(&predictions, &truth, config.unwrap_or_default())?;
    println!("{}", report.summary());
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        io::write_atomic(path, json.as_bytes())?;
    }
    Ok(EXIT_OK)
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<u8> {
    let base = args.base.resolve()?;
    let truth = io::read_ground_truth(&args.gt)?;
    if truth.is_empty() {
        bail!("{} lists no sequences", args.gt.display());
    }
    let mut dataset = Vec::with_capacity(truth.len());
    for row in &truth {
        let dir = args.root.join(&row.sequence_id);
        let frames = io::read_frames(&dir)?;
        dataset.push(AnnotatedSequence::new(row.sequence_id.clone(), frames, row.t_ed, row.t_es)?);
    }
    let grid =
        SweepGrid { k: args.k.clone(), alpha: args.alpha.iter().map(|a| a.0).collect(), t_a: args.anchors.clone() };
    let reports = sweep(&dataset, &grid, &base)?;
    let mut table = format!("{REPORT_HEADER}\n");
    for r in &reports {
        table.push_str(&report_row(r));
        table.push('\n');
    }
    emit(args.out.as_ref(), &table)?;
    if let Some(path) = &args.reports {
        let mut json = serde_json::to_string_pretty(&reports)?;
        json.push('\n');
        io::write_atomic(path, json.as_bytes())?;
    }
    Ok(EXIT_OK)
}
