use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::tensor::Shape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so that `out = ceil(in / stride)`.
    Same,
    /// No padding; `out = (in - kernel) / stride + 1`.
    Valid,
}

impl Padding {
    /// Output length and leading pad for one spatial axis.
    pub(crate) fn resolve(self, input: usize, kernel: usize, stride: usize) -> Option<(usize, usize)> {
        match self {
            Padding::Same => {
                let out = input.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(input);
                Some((out, total / 2))
            }
            Padding::Valid => {
                if input < kernel {
                    None
                } else {
                    Some(((input - kernel) / stride + 1, 0))
                }
            }
        }
    }
}

/// 2-D convolution. Weights are laid out `(kh, kw, in_c, out_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: Padding,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    /// Zero-initialised layer with the given geometry.
    pub fn zeros(
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
    ) -> Self {
        Self {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            stride,
            padding,
            weights: alloc::vec![0.0; kernel_h * kernel_w * in_channels * out_channels],
            bias: alloc::vec![0.0; out_channels],
        }
    }

    #[inline]
    pub fn weight_index(&self, ky: usize, kx: usize, ic: usize, oc: usize) -> usize {
        ((ky * self.kernel_w + kx) * self.in_channels + ic) * self.out_channels + oc
    }

    pub(crate) fn geometry(&self, height: usize, width: usize) -> Option<ConvGeometry> {
        let (out_h, pad_top) = self.padding.resolve(height, self.kernel_h, self.stride)?;
        let (out_w, pad_left) = self.padding.resolve(width, self.kernel_w, self.stride)?;
        Some(ConvGeometry {
            out_h,
            out_w,
            pad_top,
            pad_left,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

/// Max pooling over `size_h x size_w` windows without padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub size_h: usize,
    pub size_w: usize,
    pub stride: usize,
}

/// Affine layer. Weights are laid out `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weights: alloc::vec![0.0; in_features * out_features],
            bias: alloc::vec![0.0; out_features],
        }
    }

    /// Computes `x W + b`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, &a) in x.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.out_features..(i + 1) * self.out_features];
            for (o, w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LayerKind {
    Conv2d,
    Relu,
    MaxPool2d,
    GlobalAveragePool,
    Dropout,
    Dense,
    Flatten,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d => "maxpool2d",
            LayerKind::GlobalAveragePool => "global_average_pool",
            LayerKind::Dropout => "dropout",
            LayerKind::Dense => "dense",
            LayerKind::Flatten => "flatten",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "conv2d" => LayerKind::Conv2d,
            "relu" => LayerKind::Relu,
            "maxpool2d" => LayerKind::MaxPool2d,
            "global_average_pool" => LayerKind::GlobalAveragePool,
            "dropout" => LayerKind::Dropout,
            "dense" => LayerKind::Dense,
            "flatten" => LayerKind::Flatten,
            _ => return None,
        })
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    Relu,
    MaxPool2d(MaxPool2d),
    GlobalAveragePool,
    /// Identity at inference time.
    Dropout { rate: f64 },
    Dense(Dense),
    Flatten,
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::Relu => LayerKind::Relu,
            Layer::MaxPool2d(_) => LayerKind::MaxPool2d,
            Layer::GlobalAveragePool => LayerKind::GlobalAveragePool,
            Layer::Dropout { .. } => LayerKind::Dropout,
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Flatten => LayerKind::Flatten,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Conv2d(c) => c.weights.len() + c.bias.len(),
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            _ => 0,
        }
    }

    /// Parameters in blob order: weights then bias.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        let (w, b): (&[f64], &[f64]) = match self {
            Layer::Conv2d(c) => (&c.weights, &c.bias),
            Layer::Dense(d) => (&d.weights, &d.bias),
            _ => (&[], &[]),
        };
        w.iter().chain(b).copied()
    }

    /// Mutable parameter slices in blob order.
    pub fn parameters_mut(&mut self) -> [&mut [f64]; 2] {
        match self {
            Layer::Conv2d(c) => [&mut c.weights, &mut c.bias],
            Layer::Dense(d) => [&mut d.weights, &mut d.bias],
            _ => [&mut [], &mut []],
        }
    }

    /// Checks internal consistency (weight lengths, rates, positive sizes).
    pub fn validate(&self, index: usize) -> Result<()> {
        let fail = |reason: alloc::string::String| Err(Error::ShapeChain { layer: index, reason });
        match self {
            Layer::Conv2d(c) => {
                if c.kernel_h == 0 || c.kernel_w == 0 || c.in_channels == 0 || c.out_channels == 0 {
                    return fail("conv2d has a zero dimension".to_string());
                }
                if c.stride == 0 {
                    return fail("conv2d stride is zero".to_string());
                }
                let expected = c.kernel_h * c.kernel_w * c.in_channels * c.out_channels;
                if c.weights.len() != expected {
                    return fail(format!(
                        "conv2d weight length {} != {expected}",
                        c.weights.len()
                    ));
                }
                if c.bias.len() != c.out_channels {
                    return fail(format!(
                        "conv2d bias length {} != {}",
                        c.bias.len(),
                        c.out_channels
                    ));
                }
            }
            Layer::MaxPool2d(p) => {
                if p.size_h == 0 || p.size_w == 0 || p.stride == 0 {
                    return fail("maxpool2d has a zero size or stride".to_string());
                }
            }
            Layer::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return fail(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            Layer::Dense(d) => {
                if d.in_features == 0 || d.out_features == 0 {
                    return fail("dense has a zero dimension".to_string());
                }
                if d.weights.len() != d.in_features * d.out_features {
                    return fail(format!(
                        "dense weight length {} != {}",
                        d.weights.len(),
                        d.in_features * d.out_features
                    ));
                }
                if d.bias.len() != d.out_features {
                    return fail(format!(
                        "dense bias length {} != {}",
                        d.bias.len(),
                        d.out_features
                    ));
                }
            }
            Layer::Relu | Layer::GlobalAveragePool | Layer::Flatten => {}
        }
        Ok(())
    }

    /// Shape produced by this layer from `input`, or a shape-chain error.
    pub fn output_shape(&self, index: usize, input: Shape) -> Result<Shape> {
        let fail = |reason: alloc::string::String| Err(Error::ShapeChain { layer: index, reason });
        match (self, input) {
            (Layer::Relu | Layer::Dropout { .. }, s) => Ok(s),
            (
                Layer::Conv2d(c),
                Shape::Spatial {
                    height,
                    width,
                    channels,
                },
            ) => {
                if channels != c.in_channels {
                    return fail(format!(
                        "conv2d expects {} input channels, got {channels}",
                        c.in_channels
                    ));
                }
                match c.geometry(height, width) {
                    Some(g) => Ok(Shape::spatial(g.out_h, g.out_w, c.out_channels)),
                    None => fail(format!(
                        "conv2d kernel {}x{} larger than input {height}x{width}",
                        c.kernel_h, c.kernel_w
                    )),
                }
            }
            (
                Layer::MaxPool2d(p),
                Shape::Spatial {
                    height,
                    width,
                    channels,
                },
            ) => {
                if height < p.size_h || width < p.size_w {
                    return fail(format!(
                        "maxpool2d window {}x{} larger than input {height}x{width}",
                        p.size_h, p.size_w
                    ));
                }
                Ok(Shape::spatial(
                    (height - p.size_h) / p.stride + 1,
                    (width - p.size_w) / p.stride + 1,
                    channels,
                ))
            }
            (Layer::GlobalAveragePool, Shape::Spatial { channels, .. }) => {
                Ok(Shape::Vector(channels))
            }
            (Layer::Flatten, s @ Shape::Spatial { .. }) => Ok(Shape::Vector(s.len())),
            (Layer::Dense(d), Shape::Vector(n)) => {
                if n != d.in_features {
                    return fail(format!(
                        "dense expects {} inputs, got {n}",
                        d.in_features
                    ));
                }
                Ok(Shape::Vector(d.out_features))
            }
            (Layer::Dense(_), s) => fail(format!(
                "dense layer applied to spatial input {s}; flatten or pool first"
            )),
            (layer, s) => fail(format!(
                "{} cannot follow vector output of size {}",
                layer.kind(),
                s.len()
            )),
        }
    }
}
