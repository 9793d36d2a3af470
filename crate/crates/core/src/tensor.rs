//! Dense activation buffers shared by the network engine and LRP.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Shape of an activation: either a `(height, width, channels)` grid or a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial {
        height: usize,
        width: usize,
        channels: usize,
    },
    Vector(usize),
}

impl Shape {
    pub fn spatial(height: usize, width: usize, channels: usize) -> Self {
        Shape::Spatial {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Shape::Spatial {
                height,
                width,
                channels,
            } => height * width * channels,
            Shape::Vector(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Shape::Spatial { .. })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Spatial {
                height,
                width,
                channels,
            } => write!(f, "{height}x{width}x{channels}"),
            Shape::Vector(n) => write!(f, "{n}"),
        }
    }
}

/// Row-major `(h, w, c)` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::ZeroDimension);
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![0.0; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> Shape {
        Shape::spatial(self.height, self.width, self.channels)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.values[self.index(y, x, c)]
    }
}

/// One layer's activation (or relevance) tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Spatial(Tensor3),
    Vector(Vec<f64>),
}

impl Activation {
    pub fn shape(&self) -> Shape {
        match self {
            Activation::Spatial(t) => t.shape(),
            Activation::Vector(v) => Shape::Vector(v.len()),
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Activation::Spatial(t) => t.values(),
            Activation::Vector(v) => v,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Activation::Spatial(t) => t.values_mut(),
            Activation::Vector(v) => v,
        }
    }

    pub fn sum(&self) -> f64 {
        self.values().iter().sum()
    }

    /// Buffer of the given shape filled with `values`.
    pub fn with_shape(shape: Shape, values: Vec<f64>) -> Result<Self> {
        match shape {
            Shape::Spatial {
                height,
                width,
                channels,
            } => Tensor3::new(height, width, channels, values).map(Activation::Spatial),
            Shape::Vector(n) => {
                if values.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: values.len(),
                    });
                }
                Ok(Activation::Vector(values))
            }
        }
    }

    pub fn as_spatial(&self) -> Option<&Tensor3> {
        match self {
            Activation::Spatial(t) => Some(t),
            Activation::Vector(_) => None,
        }
    }
}
