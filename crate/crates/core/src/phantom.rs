//! Synthetic echo-like sequences with a pulsating dark ellipse and known
//! ED/ES frames.
//!
//! The cavity scale follows a cosine between the two extremes and wraps around
//! the end of the sequence as one full cycle, so the largest cavity sits
//! exactly on `ed_frame` and the smallest on `es_frame`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::imgproc::{BinaryMask, GrayFrame};

/// Pixels kept between the largest cavity and the frame border.
pub const BORDER_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub frame_count: usize,
    /// Cavity center, `(row, col)`.
    pub center: (f64, f64),
    /// Base semi-axes `(rows, cols)` in pixels.
    pub semi_axes: (f64, f64),
    /// Relative pulsation depth; the scale swings over `1 -/+ depth`.
    pub depth: f64,
    pub ed_frame: usize,
    pub es_frame: usize,
    pub tissue_intensity: f64,
    pub cavity_intensity: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    /// Mask-level flip probability, applied by [`perturb_masks`] downstream.
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            frame_count: 30,
            center: (64.0, 64.0),
            semi_axes: (36.0, 10.0),
            depth: 0.4,
            ed_frame: 8,
            es_frame: 20,
            tissue_intensity: 160.0,
            cavity_intensity: 30.0,
            noise_sigma: 0.0,
            flip_prob: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn sequence_id(&self) -> String {
        format!("phantom-{}", self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.frame_count;
        if t < 2 {
            return param(format!("phantom needs at least 2 frames, got {t}"));
        }
        if !(1..=t).contains(&self.ed_frame) || !(1..=t).contains(&self.es_frame) {
            return param(format!("ED frame {} and ES frame {} must lie in 1..={t}", self.ed_frame, self.es_frame));
        }
        if self.ed_frame == self.es_frame {
            return param("ED and ES frames must differ");
        }
        if !(0.0..1.0).contains(&self.depth) {
            return param(format!("pulsation depth must lie in [0, 1), got {}", self.depth));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return param(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        let spread = 3.0 * self.noise_sigma;
        if self.cavity_intensity.is_nan()
            || self.tissue_intensity.is_nan()
            || self.cavity_intensity + spread >= self.tissue_intensity - spread
        {
            return param(format!(
                "cavity {} and tissue {} intensities are not separable at 3 sigma (sigma {})",
                self.cavity_intensity, self.tissue_intensity, self.noise_sigma
            ));
        }
        if !(0.0..=255.0).contains(&self.cavity_intensity) || !(0.0..=255.0).contains(&self.tissue_intensity) {
            return param("intensities must lie in 0..=255");
        }
        if !(0.0..0.5).contains(&self.flip_prob) {
            return param(format!("flip probability must lie in [0, 0.5), got {}", self.flip_prob));
        }
        let (a, b) = self.semi_axes;
        if !(a > 0.0 && b > 0.0) {
            return param("semi-axes must be positive");
        }
        let (reach_r, reach_c) = (a * (1.0 + self.depth), b * (1.0 + self.depth));
        let (cr, cc) = self.center;
        let fits =
            |c: f64, reach: f64, n: usize| c - reach >= BORDER_MARGIN && c + reach <= (n as f64 - 1.0) - BORDER_MARGIN;
        if !fits(cr, reach_r, self.height) || !fits(cc, reach_c, self.width) {
            return param(format!(
                "largest cavity ({reach_r:.1} x {reach_c:.1} around ({cr}, {cc})) does not fit a {}x{} frame with a {BORDER_MARGIN} px margin",
                self.height, self.width
            ));
        }
        Ok(())
    }

    /// Cavity scale at 1-based frame `t`: `1 + depth` at ED, `1 - depth` at ES.
    pub fn scale_at(&self, t: usize) -> f64 {
        let (ed, es, n) = (self.ed_frame as f64, self.es_frame as f64, self.frame_count as f64);
        let (first, second) = (ed.min(es), ed.max(es));
        let v_first = if self.ed_frame < self.es_frame { 1.0 } else { -1.0 };
        let t = t as f64;
        let ease = |phase: f64| (1.0 - (PI * phase).cos()) / 2.0;
        let level = if t >= first && t <= second {
            v_first + (-v_first - v_first) * ease((t - first) / (second - first))
        } else {
            let u = if t > second { t - second } else { t + n - second };
            -v_first + (v_first + v_first) * ease(u / (n - (second - first)))
        };
        1.0 + self.depth * level
    }

    #[inline]
    fn inside(&self, r: usize, c: usize, scale: f64) -> bool {
        let y = (r as f64 - self.center.0) / (self.semi_axes.0 * scale);
        let x = (c as f64 - self.center.1) / (self.semi_axes.1 * scale);
        y * y + x * x <= 1.0
    }

    /// Noiseless cavity (0) / tissue (1) mask of frame `t`.
    pub fn cavity_mask(&self, t: usize) -> BinaryMask {
        let scale = self.scale_at(t);
        BinaryMask::from_fn(self.height, self.width, |r, c| !self.inside(r, c, scale)).expect("non-empty spec")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSequence {
    pub id: String,
    pub frames: Vec<GrayFrame>,
    pub ed_frame: usize,
    pub es_frame: usize,
}

/// Per-frame generator: frame `t` draws from stream `t` of the seeded ChaCha.
fn frame_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

pub fn generate(spec: &PhantomSpec) -> Result<PhantomSequence> {
    spec.validate()?;
    let masks: Vec<BinaryMask> = (1..=spec.frame_count).map(|t| spec.cavity_mask(t)).collect();
    render(spec, &masks)
}

/// Draws cavity (0) pixels at the cavity intensity and the rest at the tissue
/// intensity, then adds the spec's noise. `masks[t - 1]` is frame `t`.
pub fn render(spec: &PhantomSpec, masks: &[BinaryMask]) -> Result<PhantomSequence> {
    spec.validate()?;
    if masks.len() != spec.frame_count {
        return param(format!("expected {} masks, got {}", spec.frame_count, masks.len()));
    }
    if masks.iter().any(|m| m.height() != spec.height || m.width() != spec.width) {
        return param(format!("masks must be {}x{}", spec.height, spec.width));
    }
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma checked"));
    let frames = masks
        .iter()
        .enumerate()
        .map(|(i, mask)| {
            let mut rng = frame_rng(spec.seed, i + 1);
            GrayFrame::from_fn(spec.height, spec.width, |r, c| {
                let base = if mask.get(r, c) == 0 { spec.cavity_intensity } else { spec.tissue_intensity };
                let value = match &noise {
                    Some(n) => base + n.sample(&mut rng),
                    None => base,
                };
                value.round().clamp(0.0, 255.0) as u8
            })
        })
        .collect::<Result<_>>()?;
    Ok(PhantomSequence { id: spec.sequence_id(), frames, ed_frame: spec.ed_frame, es_frame: spec.es_frame })
}

/// Flips every mask pixel independently with probability `flip_prob`.
pub fn perturb_masks(masks: &[BinaryMask], flip_prob: f64, seed: u64) -> Result<Vec<BinaryMask>> {
    if !(0.0..0.5).contains(&flip_prob) {
        return param(format!("flip probability must lie in [0, 0.5), got {flip_prob}"));
    }
    Ok(masks
        .iter()
        .enumerate()
        .map(|(i, mask)| {
            let mut out = mask.clone();
            if flip_prob > 0.0 {
                let mut rng = frame_rng(seed, i + 1);
                for v in out.values_mut() {
                    if rng.random::<f64>() < flip_prob {
                        *v ^= 1;
                    }
                }
            }
            out
        })
        .collect())
}

/// A seeded batch of noiseless phantoms for accuracy runs.
///
/// Frame counts are drawn from `20..=60`, both extrema stay within frames
/// `3..=T-2`, are at least `0.3 T` apart along the cycle and come in either
/// order. The tall narrow cavity keeps the per-frame boundary motion near the
/// extrema resolvable at pixel scale.
pub fn suite(count: usize, seed: u64) -> Vec<PhantomSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = rng.random_range(20..=60usize);
            let min_gap = 0.3 * t as f64;
            let (ed, es) = loop {
                let a = rng.random_range(3..=t - 2);
                let b = rng.random_range(3..=t - 2);
                let gap = a.abs_diff(b) as f64;
                if gap >= min_gap && t as f64 - gap >= min_gap {
                    break (a, b);
                }
            };
            PhantomSpec {
                frame_count: t,
                center: (64.0 + rng.random_range(-4.0..=4.0), 64.0 + rng.random_range(-8.0..=8.0)),
                depth: rng.random_range(0.35..=0.45),
                ed_frame: ed,
                es_frame: es,
                seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
                ..PhantomSpec::default()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent rasterization: count pixels inside the ellipse of frame `t`.
    fn oracle_area(spec: &PhantomSpec, t: usize) -> usize {
        let s = spec.scale_at(t);
        let (a, b) = (spec.semi_axes.0 * s, spec.semi_axes.1 * s);
        let mut n = 0;
        for r in 0..spec.height {
            for c in 0..spec.width {
                let (y, x) = (r as f64 - spec.center.0, c as f64 - spec.center.1);
                if (y / a).powi(2) + (x / b).powi(2) <= 1.0 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn static_noiseless_phantom_is_constant() {
        let spec = PhantomSpec { depth: 0.0, noise_sigma: 0.0, ..PhantomSpec::default() };
        let seq = generate(&spec).unwrap();
        assert!(seq.frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn area_curve_extrema_match_ground_truth() {
        let spec = PhantomSpec { frame_count: 20, ed_frame: 1, es_frame: 10, ..PhantomSpec::default() };
        let areas: Vec<usize> = (1..=20).map(|t| oracle_area(&spec, t)).collect();
        let max = *areas.iter().max().unwrap();
        let min = *areas.iter().min().unwrap();
        assert_eq!(areas.iter().position(|&a| a == max), Some(0));
        assert_eq!(areas.iter().position(|&a| a == min), Some(9));
        let seq = generate(&spec).unwrap();
        for (t, frame) in seq.frames.iter().enumerate() {
            let dark = frame.pixels().iter().filter(|&&p| p == 30).count();
            assert_eq!(dark, areas[t]);
        }
    }

    #[test]
    fn scale_extremes_are_unique() {
        for (t, ed, es) in [(20, 1, 10), (33, 30, 4), (21, 20, 1), (45, 7, 31), (5, 2, 3)] {
            let spec = PhantomSpec { frame_count: t, ed_frame: ed, es_frame: es, depth: 0.3, ..PhantomSpec::default() };
            let scales: Vec<f64> = (1..=t).map(|f| spec.scale_at(f)).collect();
            for (f, &s) in scales.iter().enumerate() {
                if f + 1 != ed {
                    assert!(s < 1.3 - 1e-12, "T={t} frame {} scale {s}", f + 1);
                }
                if f + 1 != es {
                    assert!(s > 0.7 + 1e-12, "T={t} frame {} scale {s}", f + 1);
                }
            }
            assert!((scales[ed - 1] - 1.3).abs() < 1e-12 && (scales[es - 1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_control_noise() {
        let spec = PhantomSpec { noise_sigma: 8.0, seed: 11, ..PhantomSpec::default() };
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        let b = generate(&PhantomSpec { seed: 12, ..spec.clone() }).unwrap();
        assert_ne!(a.frames[0], b.frames[0]);
        assert_eq!(a.id, "phantom-11");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = PhantomSpec::default();
        let bad = [
            PhantomSpec { ed_frame: 3, es_frame: 3, ..base.clone() },
            PhantomSpec { es_frame: 31, ..base.clone() },
            PhantomSpec { cavity_intensity: 200.0, tissue_intensity: 40.0, noise_sigma: 30.0, ..base.clone() },
            PhantomSpec { cavity_intensity: 100.0, tissue_intensity: 140.0, noise_sigma: 8.0, ..base.clone() },
            PhantomSpec { semi_axes: (50.0, 11.0), ..base.clone() },
            PhantomSpec { depth: 1.0, ..base.clone() },
            PhantomSpec { flip_prob: 0.5, ..base.clone() },
        ];
        for spec in bad {
            assert!(generate(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn zero_flip_probability_is_identity() {
        let spec = PhantomSpec::default();
        let masks: Vec<_> = (1..=4).map(|t| spec.cavity_mask(t)).collect();
        assert_eq!(perturb_masks(&masks, 0.0, 3).unwrap(), masks);
        assert!(perturb_masks(&masks, 0.6, 3).is_err());
    }

    #[test]
    fn tiny_flip_probability_is_almost_identity() {
        let masks = vec![BinaryMask::filled(16, 16, false).unwrap(); 10];
        let out = perturb_masks(&masks, 1e-9, 5).unwrap();
        assert_eq!(out, masks);
    }

    #[test]
    fn flip_count_matches_expectation() {
        let (h, w, t, rho) = (64, 64, 20, 0.05);
        let masks = vec![BinaryMask::filled(h, w, true).unwrap(); t];
        let out = perturb_masks(&masks, rho, 9).unwrap();
        let flipped: usize = out.iter().map(|m| h * w - m.count_ones()).sum();
        let mean = rho * (h * w * t) as f64;
        let sd = (mean * (1.0 - rho)).sqrt();
        assert!((flipped as f64 - mean).abs() < 4.0 * sd, "{flipped} vs {mean}");
        assert_eq!(out, perturb_masks(&masks, rho, 9).unwrap());
        assert_ne!(out, perturb_masks(&masks, rho, 10).unwrap());
    }

    #[test]
    fn suite_respects_its_bounds() {
        let specs = suite(200, 4);
        assert_eq!(specs, suite(200, 4));
        let mut es_first = 0;
        for s in &specs {
            s.validate().unwrap();
            let t = s.frame_count;
            assert!((20..=60).contains(&t));
            for f in [s.ed_frame, s.es_frame] {
                assert!(f >= 3 && f + 2 <= t);
            }
            let gap = s.ed_frame.abs_diff(s.es_frame) as f64;
            assert!(gap >= 0.3 * t as f64 && t as f64 - gap >= 0.3 * t as f64);
            es_first += usize::from(s.es_frame < s.ed_frame);
        }
        assert!(es_first > 50 && es_first < 150);
    }
}
