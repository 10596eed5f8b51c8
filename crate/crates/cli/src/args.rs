use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ddsb_core::config::parse_alpha;
use ddsb_core::phantom::PhantomSpec;
use ddsb_core::{Config, RateMode};

#[derive(Debug, Parser)]
#[command(name = "ddsb", version, about = "Training-free ED/ES frame detection for cardiac ultrasound frame folders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect the ED and ES frames of one frame folder.
    Detect(DetectArgs),
    /// Write a synthetic sequence with known ED/ES frames.
    Phantom(PhantomArgs),
    /// Score detection results against a ground-truth CSV.
    Eval(EvalArgs),
    /// Run a k / alpha / anchor-count grid over a dataset.
    Sweep(SweepArgs),
}

/// `--alpha` value: a number or `none`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(pub Option<f64>);

impl std::str::FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_alpha(s).map(Alpha)
    }
}

/// Settings shared by `detect` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct BaseConfigArgs {
    /// TOML file with config fields; command-line flags override it.
    #[arg(long, env = "DDSB_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Local-mean window side (odd) [default: 31]
    #[arg(long)]
    pub window: Option<usize>,
    /// Threshold offset below the local mean [default: 5]
    #[arg(long)]
    pub offset: Option<f64>,
    /// Minimum non-cavity component area in pixels [default: 0.5% of the frame]
    #[arg(long)]
    pub min_area: Option<usize>,
    /// Occupancy percentile for anchor candidates [default: 0.01]
    #[arg(long)]
    pub percentile: Option<f64>,
    /// counts | signed-mean [default: counts]
    #[arg(long)]
    pub rate_mode: Option<RateMode>,
    /// Recorded with the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

impl BaseConfigArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => Config::default(),
        };
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.offset {
            cfg.offset = v;
        }
        if let Some(v) = self.min_area {
            cfg.min_area = Some(v);
        }
        if let Some(v) = self.percentile {
            cfg.percentile = v;
        }
        if let Some(v) = self.rate_mode {
            cfg.rate_mode = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Folder of .pgm / .png frames, ordered by file name.
    pub frames_dir: PathBuf,
    #[command(flatten)]
    pub base: BaseConfigArgs,
    /// Number of anchor bands [default: 3]
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Ray directions per anchor [default: 72]
    #[arg(long)]
    pub k: Option<usize>,
    /// Change threshold, or `none` [default: 5]
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Result JSON path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Curve CSV path (`frame,E,A,valid_count`).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

impl DetectArgs {
    pub fn resolve(&self) -> Result<Config> {
        let mut cfg = self.base.resolve()?;
        if let Some(v) = self.anchors {
            cfg.t_a = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(Alpha(v)) = self.alpha {
            cfg.alpha = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Output folder for frames and ground_truth.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Frame count T.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub center_row: Option<f64>,
    #[arg(long)]
    pub center_col: Option<f64>,
    /// Base semi-axis along rows.
    #[arg(long)]
    pub semi_rows: Option<f64>,
    /// Base semi-axis along columns.
    #[arg(long)]
    pub semi_cols: Option<f64>,
    /// Pulsation depth m in [0, 1).
    #[arg(long)]
    pub depth: Option<f64>,
    /// 1-based ED frame.
    #[arg(long)]
    pub ed: Option<usize>,
    /// 1-based ES frame.
    #[arg(long)]
    pub es: Option<usize>,
    /// Tissue intensity.
    #[arg(long)]
    pub tissue: Option<f64>,
    /// Cavity intensity.
    #[arg(long)]
    pub cavity: Option<f64>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Probability of flipping each cavity/tissue pixel before rendering.
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PhantomArgs {
    pub fn spec(&self) -> PhantomSpec {
        let d = PhantomSpec::default();
        PhantomSpec {
            height: self.height.unwrap_or(d.height),
            width: self.width.unwrap_or(d.width),
            frame_count: self.frames.unwrap_or(d.frame_count),
            center: (self.center_row.unwrap_or(d.center.0), self.center_col.unwrap_or(d.center.1)),
            semi_axes: (self.semi_rows.unwrap_or(d.semi_axes.0), self.semi_cols.unwrap_or(d.semi_axes.1)),
            depth: self.depth.unwrap_or(d.depth),
            ed_frame: self.ed.unwrap_or(d.ed_frame),
            es_frame: self.es.unwrap_or(d.es_frame),
            tissue_intensity: self.tissue.unwrap_or(d.tissue_intensity),
            cavity_intensity: self.cavity.unwrap_or(d.cavity_intensity),
            noise_sigma: self.sigma.unwrap_or(d.noise_sigma),
            flip_prob: self.flip.unwrap_or(d.flip_prob),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detection result JSON files or glob patterns.
    #[arg(required = true)]
    pub predictions: Vec<String>,
    /// Ground-truth CSV with header `sequence_id,t_ed,t_es`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Ground-truth CSV; each id names a frame folder under `--root`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Folder holding one frame folder per sequence.
    #[arg(long)]
    pub root: PathBuf,
    #[command(flatten)]
    pub base: BaseConfigArgs,
    /// Direction counts to try.
    #[arg(long, value_delimiter = ',', default_values_t = [72usize, 180, 360])]
    pub k: Vec<usize>,
    /// Change thresholds to try; `none` disables the filter.
    #[arg(long, value_delimiter = ',', default_values = ["none", "5", "10", "15"])]
    pub alpha: Vec<Alpha>,
    /// Anchor band counts to try.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize])]
    pub anchors: Vec<usize>,
    /// Report CSV path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional JSON file with the full per-cell reports.
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "window = 21\nalpha = \"none\"\nk = 180\n").unwrap();
        let cli =
            Cli::try_parse_from(["ddsb", "detect", "frames", "--config", path.to_str().unwrap(), "--window", "15"])
                .unwrap();
        let Command::Detect(args) = cli.command else { panic!("expected detect") };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.window, 15);
        assert_eq!(cfg.alpha, None);
        assert_eq!(cfg.k, 180);
        assert_eq!(cfg.offset, 5.0);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "windw = 21\n").unwrap();
        assert!(load_config(&path).is_err());
    }

    #[test]
    fn sweep_grid_defaults_and_lists() {
        let cli = Cli::try_parse_from(["ddsb", "sweep", "--gt", "g.csv", "--root", "r"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!("expected sweep") };
        assert_eq!(args.k, [72, 180, 360]);
        assert_eq!(args.alpha, [Alpha(None), Alpha(Some(5.0)), Alpha(Some(10.0)), Alpha(Some(15.0))]);
        assert_eq!(args.anchors, [3]);
        let cli =
            Cli::try_parse_from(["ddsb", "sweep", "--gt", "g", "--root", "r", "--k", "90", "--alpha", "NONE,7.5"])
                .unwrap();
        let Command::Sweep(args) = cli.command else { panic!("expected sweep") };
        assert_eq!(args.k, [90]);
        assert_eq!(args.alpha, [Alpha(None), Alpha(Some(7.5))]);
    }
}
