//! File formats, synthetic fixtures and the end-to-end pipeline for scoring
//! explanation heatmaps against human gaze.
//!
//! The numerical work lives in `salience-core`; this crate reads and writes
//! PGM/PPM images, CSV manifests and TOML model/config files, generates
//! seeded fixture datasets and runs the full comparison in parallel.

// `!(x > 0.0)` is used deliberately so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod model_io;
pub mod pgm;
pub mod pipeline;
pub mod records;
pub mod report;

pub use error::{Error, Result};
