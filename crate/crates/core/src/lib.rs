//! Training-free detection of end-diastolic (ED) and end-systolic (ES) frames
//! in grayscale cardiac ultrasound sequences.
//!
//! The pipeline has three stages:
//!
//! 1. [`imgproc`]: per-frame adaptive thresholding into a cavity mask, followed
//!    by removal of small non-cavity specks.
//! 2. [`anchors`]: pixels that stay inside the cavity across the whole
//!    sequence are grouped, the cavity nearest the top center of the frame is
//!    kept, and it is cut into horizontal bands whose centroids become anchors.
//! 3. [`discriminator`]: rays are cast from each anchor in `k` directions, the
//!    frame-to-frame change of every ray length votes for expansion or
//!    contraction, and the cumulative vote curve is searched for the pair of
//!    frames that best explains one contraction and one expansion.
//!
//! [`phantom`] builds synthetic sequences with known ground truth and [`eval`]
//! holds the metric, the size-based baseline and the parameter sweep.
//!
//! Frame indices are 1-based in every public result.

pub mod anchors;
pub mod config;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod phantom;
pub mod pipeline;

pub use anchors::{AnchorSet, OccupancyMap, Point};
pub use config::{Config, RateMode};
pub use discriminator::{ExpansionCurve, PhaseResult};
pub use error::{DdsbError, Result};
pub use imgproc::{BinaryMask, ComponentLabeling, Connectivity, GrayFrame};
pub use pipeline::{detect_phases, Detection};
