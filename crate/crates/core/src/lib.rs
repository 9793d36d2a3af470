//! Numerical core for comparing explanation heatmaps against human gaze.
//!
//! Everything here is pure computation over in-memory buffers: heatmap
//! transforms, a small feed-forward CNN engine with layer-wise relevance
//! propagation, spectral-residual saliency, similarity metrics, object
//! emphasis and the nonparametric/ANOVA statistics used to summarise scores.
//! File formats, fixtures and orchestration live in the `salience-align`
//! crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used deliberately so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod emphasis;
mod error;
pub mod fft;
pub mod heatmap;
pub mod lrp;
pub mod metrics;
pub mod nn;
pub mod spectral;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use heatmap::Heatmap;
pub use tensor::{Activation, Shape, Tensor3};
