//! Layer-wise relevance propagation.
//!
//! Relevance starts at the output as `mask ⊙ output` and is pushed back one
//! layer at a time. Linear layers (dense, conv, global average pooling) use
//!
//! ```text
//! R_i = Σ_j  a_i w_ij / (z_j + ε·sign(z_j)) · R_j,    z_j = Σ_i a_i w_ij + b_j
//! ```
//!
//! with `ε = 0` for the z-rule and `sign(0) = +1`. ReLU, dropout and flatten
//! pass relevance through unchanged; max pooling routes each output's
//! relevance to the winning input (first in scan order).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::heatmap::Heatmap;
use crate::nn::{forward, maxpool_argmax, Conv2d, Dense, Layer, ModelSpec};
use crate::tensor::{Activation, Tensor3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Plain proportional redistribution; exactly conservative without biases.
    Z,
    /// Denominator stabilised by `ε·sign(z)`.
    Epsilon(f64),
}

impl Default for Rule {
    fn default() -> Self {
        Rule::Epsilon(1e-7)
    }
}

impl Rule {
    fn epsilon(self) -> f64 {
        match self {
            Rule::Z => 0.0,
            Rule::Epsilon(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    /// Mirrors `forward` output: index 0 is the input layer.
    pub per_layer: Vec<Activation>,
    /// Channel-summed input relevance, negatives clamped, max-normalized to 255.
    pub input_heatmap: Heatmap,
    pub rule: Rule,
    pub output_mask: Vec<f64>,
}

impl RelevanceMap {
    pub fn seed(&self) -> &Activation {
        self.per_layer.last().expect("relevance holds at least the input")
    }

    pub fn input_relevance(&self) -> &Activation {
        &self.per_layer[0]
    }
}

/// Relevance of every layer for `input` under `rule`, seeded with `output_mask ⊙ output`.
pub fn lrp(
    model: &ModelSpec,
    input: &Tensor3,
    output_mask: &[f64],
    rule: Rule,
) -> Result<RelevanceMap> {
    let eps = rule.epsilon();
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "epsilon must be finite and >= 0, got {eps}"
        )));
    }
    if output_mask.len() != model.output_len() {
        return Err(Error::MaskLength {
            expected: model.output_len(),
            actual: output_mask.len(),
        });
    }
    let acts = forward(model, input)?;
    let layers = model.layers();

    let output = acts.last().expect("forward returns the input at least");
    let seed: Vec<f64> = output
        .values()
        .iter()
        .zip(output_mask)
        .map(|(a, m)| a * m)
        .collect();
    let mut per_layer: Vec<Activation> = Vec::with_capacity(acts.len());
    per_layer.push(Activation::with_shape(output.shape(), seed)?);

    for k in (0..layers.len()).rev() {
        let upper = per_layer.last().expect("seeded above");
        let lower = propagate(&layers[k], &acts[k], &acts[k + 1], upper.values(), eps)
            .map_err(|e| match e {
                Error::NonFiniteRelevance { .. } => Error::NonFiniteRelevance { layer: k + 1 },
                other => other,
            })?;
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRelevance { layer: k + 1 });
        }
        per_layer.push(Activation::with_shape(acts[k].shape(), lower)?);
    }
    per_layer.reverse();

    let input_heatmap = collapse_to_heatmap(&per_layer[0])?;
    Ok(RelevanceMap {
        per_layer,
        input_heatmap,
        rule,
        output_mask: output_mask.to_vec(),
    })
}

/// Same input explained under several named weight regimes.
pub fn heatmap_for_regimes<S: AsRef<str>>(
    variants: &[(S, &ModelSpec)],
    input: &Tensor3,
    output_mask: &[f64],
    rule: Rule,
) -> Result<Vec<(String, Heatmap)>> {
    if let Some((_, first)) = variants.first() {
        if let Some((_, bad)) = variants
            .iter()
            .find(|(_, m)| m.input_shape() != first.input_shape())
        {
            return Err(Error::ShapeMismatch {
                expected: first.input_shape(),
                actual: bad.input_shape(),
            });
        }
    }
    variants
        .iter()
        .map(|(name, model)| {
            lrp(model, input, output_mask, rule).map(|r| (String::from(name.as_ref()), r.input_heatmap))
        })
        .collect()
}

/// Sums relevance over channels, clamps negatives, normalizes to a 0-255 peak.
pub fn collapse_to_heatmap(relevance: &Activation) -> Result<Heatmap> {
    let t = relevance
        .as_spatial()
        .ok_or_else(|| Error::InvalidParameter("input relevance is not spatial".into()))?;
    let c = t.channels();
    let values = t
        .values()
        .chunks(c)
        .map(|px| px.iter().sum::<f64>().max(0.0))
        .collect();
    Heatmap::new(t.width(), t.height(), values)?.normalize_max()
}

#[inline]
fn stabilize(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

/// Relevance per output neuron divided by its stabilised pre-activation.
fn ratios(z: &[f64], r: &[f64], eps: f64) -> Result<Vec<f64>> {
    z.iter()
        .zip(r)
        .map(|(&z, &r)| {
            if r == 0.0 {
                return Ok(0.0);
            }
            let s = r / stabilize(z, eps);
            if s.is_finite() {
                Ok(s)
            } else {
                Err(Error::NonFiniteRelevance { layer: 0 })
            }
        })
        .collect()
}

fn propagate(
    layer: &Layer,
    input: &Activation,
    output: &Activation,
    upper: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    match layer {
        Layer::Relu | Layer::Dropout { .. } | Layer::Flatten => Ok(upper.to_vec()),
        Layer::Dense(d) => dense_relevance(d, input.values(), output.values(), upper, eps),
        Layer::Conv2d(c) => {
            let x = input.as_spatial().ok_or(Error::ZeroDimension)?;
            let z = output.as_spatial().ok_or(Error::ZeroDimension)?;
            conv_relevance(c, x, z, upper, eps)
        }
        Layer::MaxPool2d(p) => {
            let x = input.as_spatial().ok_or(Error::ZeroDimension)?;
            let (_, winners) = maxpool_argmax(p, x);
            let mut lower = vec![0.0; x.values().len()];
            for (&w, &r) in winners.iter().zip(upper) {
                lower[w] += r;
            }
            Ok(lower)
        }
        Layer::GlobalAveragePool => {
            let x = input.as_spatial().ok_or(Error::ZeroDimension)?;
            let ch = x.channels();
            let n = (x.height() * x.width()) as f64;
            let s = ratios(output.values(), upper, eps)?;
            Ok(x
                .values()
                .iter()
                .enumerate()
                .map(|(i, &a)| a / n * s[i % ch])
                .collect())
        }
    }
}

fn dense_relevance(d: &Dense, a: &[f64], z: &[f64], upper: &[f64], eps: f64) -> Result<Vec<f64>> {
    let s = ratios(z, upper, eps)?;
    Ok(a.iter()
        .enumerate()
        .map(|(i, &ai)| {
            let row = &d.weights[i * d.out_features..(i + 1) * d.out_features];
            ai * row.iter().zip(&s).map(|(w, s)| w * s).sum::<f64>()
        })
        .collect())
}

fn conv_relevance(
    c: &Conv2d,
    x: &Tensor3,
    z: &Tensor3,
    upper: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    let g = c.geometry(x.height(), x.width()).ok_or(Error::ZeroDimension)?;
    let s = ratios(z.values(), upper, eps)?;
    let oc = c.out_channels;
    let mut lower = vec![0.0; x.values().len()];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let sj = &s[(oy * g.out_w + ox) * oc..(oy * g.out_w + ox + 1) * oc];
            if sj.iter().all(|&v| v == 0.0) {
                continue;
            }
            for ky in 0..c.kernel_h {
                let Some(iy) = (oy * c.stride + ky).checked_sub(g.pad_top) else {
                    continue;
                };
                if iy >= x.height() {
                    continue;
                }
                for kx in 0..c.kernel_w {
                    let Some(ix) = (ox * c.stride + kx).checked_sub(g.pad_left) else {
                        continue;
                    };
                    if ix >= x.width() {
                        continue;
                    }
                    for ic in 0..c.in_channels {
                        let idx = x.index(iy, ix, ic);
                        let a = x.values()[idx];
                        if a == 0.0 {
                            continue;
                        }
                        let w0 = c.weight_index(ky, kx, ic, 0);
                        let dot: f64 = c.weights[w0..w0 + oc]
                            .iter()
                            .zip(sj)
                            .map(|(w, s)| w * s)
                            .sum();
                        lower[idx] += a * dot;
                    }
                }
            }
        }
    }
    Ok(lower)
}
