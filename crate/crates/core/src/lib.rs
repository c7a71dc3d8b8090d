//! Frame selection algorithms for semantic fast-forward first-person video.
//!
//! Given a long video, the goal is to pick a small subset of frames that plays
//! back at a required speed-up while keeping the relevant moments watchable and
//! the camera motion tolerable. The selection is driven by a weighted
//! locality-constrained sparse reconstruction of each video segment from its
//! own per-frame descriptors, followed by a transition-smoothing pass that
//! tops the selection up to the exact frame budget.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`flow`] / [`descriptor`] / [`motion`]: dense block-matching optical flow,
//!   the 446-dimensional per-frame descriptor, and cumulative displacement
//!   curves with abrupt-motion detection.
//! - [`semantics`]: per-frame semantic scores from object detections, profile
//!   segmentation, and per-segment speed-up allocation.
//! - [`sampler`]: the weighted sparse solver and the lambda search that hits a
//!   target frame count.
//! - [`sft`]: smoothing frame transitions by iterative insertion into the
//!   shakiest gaps, costed by Earth Mover's Distance between color histograms.
//! - [`metrics`]: instability, speed-up deviation, semantic retention, and the
//!   appearance-cost coefficient of variation.
//! - [`select`]: per-segment orchestration of sampling plus smoothing, and
//!   redistribution of frame deficits across segments.
//!
//! Everything here is pure computation over in-memory buffers; decoding,
//! file formats, and the command line live in the companion `semff` crate.
//! The crate is `no_std`-compatible (with `alloc`) when built without the
//! default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod descriptor;
pub mod detect;
pub mod error;
pub mod features;
pub mod flow;
pub mod frame;
mod math;
pub mod metrics;
pub mod motion;
pub mod params;
pub mod sampler;
pub mod select;
pub mod semantics;
pub mod sft;

pub use error::CoreError;
pub use params::Params;

/// Crate version, for run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
