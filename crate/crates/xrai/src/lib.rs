//! Region-based saliency attribution and its evaluation harness.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`image`]: raster types and deterministic primitives (blur, dilation,
//!   bokeh composition, compressed-size estimation, PNG/PPM I/O).
//! - [`model`]: the [`model::GradientOracle`] contract, a small trainable
//!   MLP, and the analytic two-feature grid functions used by the
//!   perturbation sanity check.
//! - [`attribution`]: Gradient, Gradient*Input, Integrated Gradients with
//!   single or multiple baselines, Sobel edges, and random baselines.
//! - [`segmentation`]: Felzenszwalb graph-based over-segmentation run at
//!   several scales, filtered and dilated into an overlapping segment pool.
//! - [`xrai`]: greedy region selection over an attribution map, producing
//!   a ranked saliency trajectory, heatmap, and area-thresholded masks.
//! - [`sanity`]: the perturbation axiom checker and the model
//!   randomization comparison.
//! - [`evaluation`]: performance information curves (AIC/SIC) and
//!   weakly supervised localization metrics.
//! - [`corpus`]: synthetic labeled corpus generation with ground-truth
//!   masks, sized so everything above runs in seconds.
//! - [`cli`]: the command-line front end (`attribute`, `evaluate`,
//!   `sanity`, `gen-corpus`).
//!
//! See the crate examples for one runnable program per capability.

pub mod attribution;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod model;
pub mod rng;
pub mod sanity;
pub mod segmentation;
mod svg;
#[cfg(test)]
mod testutil;
pub mod xrai;

pub use error::{Error, Result};
pub use image::{AttributionMap, CompressionEstimate, Image, PixelMask};
pub use model::{GradientOracle, GridFunction, TinyNet};
pub use segmentation::{Segment, SegmentSet};
pub use xrai::{GainMode, SaliencyTrajectory, XraiHeatmap};
