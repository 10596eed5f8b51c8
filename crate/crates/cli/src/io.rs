//! Frame folders in, result files out.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddsb_core::eval::Annotation;
use ddsb_core::GrayFrame;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

const FRAME_EXTENSIONS: [&str; 2] = ["pgm", "png"];

/// Image files of a frame folder, in lexicographic filename order.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read frame directory {}", dir.display()))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("cannot list {}", dir.display()))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)));
        if is_frame && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Reads one frame; colour images are converted to luma.
pub fn read_frame(path: &Path) -> Result<GrayFrame> {
    let img = image::open(path).with_context(|| format!("cannot decode frame {}", path.display()))?;
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    GrayFrame::new(h as usize, w as usize, luma.into_raw()).with_context(|| format!("bad frame {}", path.display()))
}

/// Loads every frame of a folder. All frames must share one size.
pub fn read_frames(dir: &Path) -> Result<Vec<GrayFrame>> {
    let paths = frame_paths(dir)?;
    if paths.len() < 3 {
        bail!("need at least 3 frames in {}, found {}", dir.display(), paths.len());
    }
    let mut frames: Vec<GrayFrame> = Vec::with_capacity(paths.len());
    for path in &paths {
        let frame = read_frame(path)?;
        if let Some(first) = frames.first() {
            if (frame.height(), frame.width()) != (first.height(), first.width()) {
                bail!(
                    "frame {} is {}x{} but {} is {}x{}",
                    path.display(),
                    frame.height(),
                    frame.width(),
                    paths[0].display(),
                    first.height(),
                    first.width()
                );
            }
        }
        frame.check_pipeline_size().with_context(|| format!("frame {}", path.display()))?;
        frames.push(frame);
    }
    log::info!("read {} frames from {}", frames.len(), dir.display());
    Ok(frames)
}

/// Name used for a frame folder in results: its last path component.
pub fn sequence_id(dir: &Path) -> String {
    let resolved = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
    resolved.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".to_string())
}

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .with_context(|| format!("cannot create a temp file in {}", parent.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Binary (P5) graymap bytes.
pub fn encode_pgm(frame: &GrayFrame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PnmEncoder::new(&mut out).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary)).write_image(
        frame.pixels(),
        frame.width() as u32,
        frame.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(out)
}

/// Reads a `sequence_id,t_ed,t_es` CSV. The header row is required.
pub fn read_ground_truth(path: &Path) -> Result<Vec<Annotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open ground truth {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected = ["sequence_id", "t_ed", "t_es"];
    if headers.iter().collect::<Vec<_>>() != expected {
        bail!(
            "{}: header must be `sequence_id,t_ed,t_es`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<Annotation>().enumerate() {
        let row = rec.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?;
        if row.t_ed == 0 || row.t_es == 0 || row.t_ed == row.t_es {
            bail!("{}: row {} has invalid frame indices ({}, {})", path.display(), i + 2, row.t_ed, row.t_es);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn ground_truth_csv(rows: &[Annotation]) -> String {
    let mut out = String::from("sequence_id,t_ed,t_es\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.sequence_id, r.t_ed, r.t_es));
    }
    out
}
