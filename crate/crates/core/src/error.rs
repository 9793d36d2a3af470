use alloc::string::String;
use core::fmt;

use crate::tensor::Shape;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A width, height or channel count of zero.
    ZeroDimension,
    /// Buffer length disagrees with the declared dimensions.
    LengthMismatch { expected: usize, actual: usize },
    /// Two heatmaps (or vectors) that must agree in size do not.
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    NegativeValue { index: usize, value: f64 },
    NonFiniteValue { index: usize },
    /// `lo >= hi` for a clipping range.
    InvalidRange { lo: f64, hi: f64 },
    /// Cosine similarity of an all-zero vector is undefined.
    ZeroVector,
    /// Spearman correlation needs at least two distinct values per input.
    ZeroRankVariance,
    EmptyInput,
    ZeroDenominator,
    InvalidParameter(String),
    /// Layer shapes do not chain.
    ShapeChain { layer: usize, reason: String },
    ShapeMismatch { expected: Shape, actual: Shape },
    MaskLength { expected: usize, actual: usize },
    /// Relevance became NaN or infinite at the given layer index.
    NonFiniteRelevance { layer: usize },
    /// Heatmap has no mass to distribute.
    ZeroMass,
    /// Bounding box covers no pixel after clamping to the image.
    EmptyBox,
    /// Sum of squares are both zero; the F statistic is undefined.
    DegenerateAnova,
    /// The frame sets of two inputs differ.
    FrameSetMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroDimension => write!(f, "zero dimension"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::DimensionMismatch { left, right } => write!(
                f,
                "dimension mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NegativeValue { index, value } => {
                write!(f, "negative value {value} at index {index}")
            }
            Error::NonFiniteValue { index } => write!(f, "non-finite value at index {index}"),
            Error::InvalidRange { lo, hi } => write!(f, "invalid range: lo {lo} >= hi {hi}"),
            Error::ZeroVector => write!(f, "zero vector: cosine similarity undefined"),
            Error::ZeroRankVariance => write!(f, "zero rank variance"),
            Error::EmptyInput => write!(f, "empty input"),
            Error::ZeroDenominator => write!(f, "zero denominator"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeChain { layer, reason } => {
                write!(f, "shape chain broken at layer {layer}: {reason}")
            }
            Error::ShapeMismatch { expected, actual } => {
                write!(f, "shape mismatch: expected {expected}, got {actual}")
            }
            Error::MaskLength { expected, actual } => write!(
                f,
                "output mask length {actual} does not match model output {expected}"
            ),
            Error::NonFiniteRelevance { layer } => write!(
                f,
                "non-finite relevance at layer {layer} (epsilon too small?)"
            ),
            Error::ZeroMass => write!(f, "heatmap total mass is zero"),
            Error::EmptyBox => write!(f, "bounding box is empty after clamping"),
            Error::DegenerateAnova => {
                write!(f, "zero between-group and within-group variance")
            }
            Error::FrameSetMismatch(msg) => write!(f, "frame set mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
