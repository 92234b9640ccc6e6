//! Inverse perspective mapping for tunnel CCTV detection datasets.
//!
//! The crate covers the whole evaluation pipeline:
//!
//! * [`geometry`]: 4-point homography estimation, application and inversion.
//! * [`warp`]: ROI handling, case-1 crop-and-mask and case-2 warped images.
//! * [`dataset`]: manifests, box transformation, train/test split and
//!   distance-section binning.
//! * [`metrics`]: IoU, greedy matching and all-points average precision per
//!   section.
//! * [`synth`]: a pinhole road-scene generator with exact ground truth and a
//!   size-dependent simulated detector.
//! * [`cli`]: the `tunnel-ipm` command-line front end.

// `!(a < b)` is used on purpose so that NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod warp;

pub use dataset::{Annotation, BBox, Case, DatasetManifest, ImageRecord, SectionMap};
pub use error::{Error, Result};
pub use geometry::{Correspondences, Homography, Point2};
pub use metrics::EvalResult;
pub use raster::Raster;
pub use warp::{Roi, WarpPlan};
