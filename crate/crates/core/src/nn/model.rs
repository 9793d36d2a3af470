use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::Layer;
use crate::tensor::Shape;
use crate::{Error, Result};

/// Per-channel affine transform applied to the raw input: `v * scale[c] + offset[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocess {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Preprocess {
    pub fn identity(channels: usize) -> Self {
        Self {
            scale: alloc::vec![1.0; channels],
            offset: alloc::vec![0.0; channels],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0) && self.offset.iter().all(|&o| o == 0.0)
    }
}

/// A validated feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    name: String,
    input_shape: Shape,
    preprocess: Preprocess,
    layers: Vec<Layer>,
    shapes: Vec<Shape>,
}

impl ModelSpec {
    /// Builds a model, checking every layer and the shape chain from `input_shape`.
    ///
    /// `input_shape` must be spatial. At most one spatial-to-vector transition
    /// (flatten or global average pooling) may occur, and dense layers only
    /// accept vectors.
    pub fn new(
        name: impl Into<String>,
        input_shape: Shape,
        preprocess: Option<Preprocess>,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let channels = match input_shape {
            Shape::Spatial {
                height,
                width,
                channels,
            } if height > 0 && width > 0 && channels > 0 => channels,
            Shape::Spatial { .. } => return Err(Error::ZeroDimension),
            Shape::Vector(_) => {
                return Err(Error::ShapeChain {
                    layer: 0,
                    reason: "model input must be spatial (h, w, c)".into(),
                })
            }
        };
        let preprocess = preprocess.unwrap_or_else(|| Preprocess::identity(channels));
        if preprocess.scale.len() != channels || preprocess.offset.len() != channels {
            return Err(Error::InvalidParameter(alloc::format!(
                "preprocess needs {channels} scale and offset entries"
            )));
        }
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        shapes.push(input_shape);
        let mut current = input_shape;
        for (i, layer) in layers.iter().enumerate() {
            layer.validate(i + 1)?;
            current = layer.output_shape(i + 1, current)?;
            shapes.push(current);
        }
        Ok(Self {
            name: name.into(),
            input_shape,
            preprocess,
            layers,
            shapes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn preprocess(&self) -> &Preprocess {
        &self.preprocess
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Activation shapes: index 0 is the input, index `k` the output of layer `k`.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("shapes always holds the input")
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Copy with the final dense layer replaced. Fails if the last parametrised
    /// layer is not dense or the geometry differs.
    pub fn with_head(&self, head: super::Dense) -> Result<Self> {
        let idx = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Dense(_)))
            .ok_or_else(|| Error::InvalidParameter("model has no dense layer".into()))?;
        let mut layers = self.layers.clone();
        layers[idx] = Layer::Dense(head);
        Self::new(
            self.name.clone(),
            self.input_shape,
            Some(self.preprocess.clone()),
            layers,
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Glorot-uniform weights for every conv and dense layer, zero biases.
    ///
    /// Conv fans are `kh * kw * in_c` and `kh * kw * out_c`.
    pub fn with_random_weights(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for layer in &mut out.layers {
            match layer {
                Layer::Conv2d(c) => {
                    let area = (c.kernel_h * c.kernel_w) as f64;
                    let limit = glorot_limit(area * c.in_channels as f64, area * c.out_channels as f64);
                    c.weights.iter_mut().for_each(|w| *w = rng.gen_range(-limit..=limit));
                    c.bias.iter_mut().for_each(|b| *b = 0.0);
                }
                Layer::Dense(d) => {
                    *d = glorot_dense(d.in_features, d.out_features, &mut rng);
                }
                _ => {}
            }
        }
        out
    }

    /// Copy with every bias set to zero.
    pub fn without_bias(&self) -> Self {
        let mut out = self.clone();
        for layer in &mut out.layers {
            match layer {
                Layer::Conv2d(c) => c.bias.iter_mut().for_each(|b| *b = 0.0),
                Layer::Dense(d) => d.bias.iter_mut().for_each(|b| *b = 0.0),
                _ => {}
            }
        }
        out
    }
}

pub(crate) fn glorot_limit(fan_in: f64, fan_out: f64) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out))
}

/// Dense layer with weights uniform in `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))`, zero bias.
pub fn glorot_dense<R: Rng>(in_features: usize, out_features: usize, rng: &mut R) -> super::Dense {
    let limit = glorot_limit(in_features as f64, out_features as f64);
    let mut d = super::Dense::zeros(in_features, out_features);
    d.weights
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-limit..=limit));
    d
}
