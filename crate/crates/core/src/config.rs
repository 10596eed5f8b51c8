//! Tunables for the whole pipeline, gathered in one place.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Default minimum non-cavity component area, as a fraction of frame pixels.
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.005;

/// How a row of boundary-distance changes is reduced to one expansion rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// Count of expanding rays minus count of contracting rays, over valid rays.
    #[default]
    Counts,
    /// Mean of the valid signed changes, in pixels.
    SignedMean,
}

impl std::str::FromStr for RateMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "counts" => Ok(RateMode::Counts),
            "signed-mean" => Ok(RateMode::SignedMean),
            other => Err(format!("unknown rate mode `{other}` (expected counts|signed-mean)")),
        }
    }
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateMode::Counts => f.write_str("counts"),
            RateMode::SignedMean => f.write_str("signed-mean"),
        }
    }
}

/// Parses an alpha value: a number, or `none` to disable the filter.
pub fn parse_alpha(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| format!("alpha must be a number or `none`, got `{s}`"))
}

fn de_alpha<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) => Ok(Some(v)),
        Some(Raw::Text(t)) => parse_alpha(&t).map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Side of the square local-mean window (odd).
    pub window: usize,
    /// Intensity margin below the local mean for a pixel to count as cavity.
    pub offset: f64,
    /// Minimum area of a non-cavity component; `None` means 0.5% of the frame.
    pub min_area: Option<usize>,
    /// Occupancy percentile selecting always-cavity pixels.
    pub percentile: f64,
    /// Number of horizontal anchor bands.
    pub t_a: usize,
    /// Number of ray directions per anchor.
    pub k: usize,
    /// Validity threshold on |delta|; `None` keeps every finite change.
    /// Config files may spell it as a number or `"none"`.
    #[serde(deserialize_with = "de_alpha")]
    pub alpha: Option<f64>,
    pub rate_mode: RateMode,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            window: 31,
            offset: 5.0,
            min_area: None,
            percentile: 0.01,
            t_a: 3,
            k: 72,
            alpha: Some(5.0),
            rate_mode: RateMode::Counts,
            seed: 0,
        }
    }
}

impl Config {
    /// Resolves the minimum component area for frames of `pixel_count` pixels.
    pub fn min_area_for(&self, pixel_count: usize) -> usize {
        self.min_area.unwrap_or_else(|| (DEFAULT_MIN_AREA_FRACTION * pixel_count as f64).round() as usize)
    }

    /// Checks the ranges that do not depend on frame size.
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return param(format!("window must be odd and >= 3, got {}", self.window));
        }
        if !self.offset.is_finite() || self.offset < 0.0 {
            return param(format!("offset must be finite and >= 0, got {}", self.offset));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return param(format!("percentile must lie in (0, 1), got {}", self.percentile));
        }
        if self.t_a == 0 {
            return param("anchor band count must be >= 1");
        }
        if self.k < 4 {
            return param(format!("direction count k must be >= 4, got {}", self.k));
        }
        if let Some(alpha) = self.alpha {
            if alpha.is_nan() || alpha <= 0.0 {
                return param(format!("alpha must be > 0 when set, got {alpha}"));
            }
        }
        Ok(())
    }
}
