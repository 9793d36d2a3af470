use alloc::vec;
use alloc::vec::Vec;

use super::layer::{Conv2d, Layer, MaxPool2d};
use super::model::ModelSpec;
use crate::tensor::{Activation, Tensor3};
use crate::{Error, Result};

/// Runs the network and returns every activation.
///
/// Index 0 holds the preprocessed input; index `k` holds the output of layer `k`.
/// Dropout is the identity here.
pub fn forward(model: &ModelSpec, input: &Tensor3) -> Result<Vec<Activation>> {
    if input.shape() != model.input_shape() {
        return Err(Error::ShapeMismatch {
            expected: model.input_shape(),
            actual: input.shape(),
        });
    }
    let mut acts = Vec::with_capacity(model.layers().len() + 1);
    acts.push(Activation::Spatial(preprocess(model, input)));
    for (i, layer) in model.layers().iter().enumerate() {
        let next = apply_layer(layer, &acts[i])?;
        let expected = model.shapes()[i + 1];
        if next.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: next.shape(),
            });
        }
        acts.push(next);
    }
    Ok(acts)
}

/// Output vector of the network (the last activation, flattened).
pub fn predict(model: &ModelSpec, input: &Tensor3) -> Result<Vec<f64>> {
    let mut acts = forward(model, input)?;
    Ok(match acts.pop().expect("forward returns the input at least") {
        Activation::Spatial(t) => t.into_values(),
        Activation::Vector(v) => v,
    })
}

fn preprocess(model: &ModelSpec, input: &Tensor3) -> Tensor3 {
    let pre = model.preprocess();
    if pre.is_identity() {
        return input.clone();
    }
    let c = input.channels();
    let mut out = input.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let ch = i % c;
        *v = *v * pre.scale[ch] + pre.offset[ch];
    }
    out
}

pub(crate) fn apply_layer(layer: &Layer, input: &Activation) -> Result<Activation> {
    let mismatch = || Error::ShapeChain {
        layer: 0,
        reason: alloc::format!("{} cannot consume {}", layer.kind(), input.shape()),
    };
    Ok(match (layer, input) {
        (Layer::Relu, a) => {
            let mut out = a.clone();
            out.values_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            out
        }
        (Layer::Dropout { .. }, a) => a.clone(),
        (Layer::Conv2d(c), Activation::Spatial(t)) => Activation::Spatial(conv2d(c, t)?),
        (Layer::MaxPool2d(p), Activation::Spatial(t)) => Activation::Spatial(maxpool(p, t)?),
        (Layer::GlobalAveragePool, Activation::Spatial(t)) => {
            Activation::Vector(global_average_pool(t))
        }
        (Layer::Flatten, Activation::Spatial(t)) => Activation::Vector(t.values().to_vec()),
        (Layer::Dense(d), Activation::Vector(v)) => {
            if v.len() != d.in_features {
                return Err(mismatch());
            }
            Activation::Vector(d.apply(v))
        }
        _ => return Err(mismatch()),
    })
}

fn conv2d(c: &Conv2d, input: &Tensor3) -> Result<Tensor3> {
    let g = c
        .geometry(input.height(), input.width())
        .ok_or(Error::ZeroDimension)?;
    let mut out = Tensor3::zeros(g.out_h, g.out_w, c.out_channels)?;
    let oc = c.out_channels;
    let ic_n = c.in_channels;
    let out_vals = out.values_mut();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let base = (oy * g.out_w + ox) * oc;
            let acc = &mut out_vals[base..base + oc];
            acc.copy_from_slice(&c.bias);
            for ky in 0..c.kernel_h {
                let Some(iy) = (oy * c.stride + ky).checked_sub(g.pad_top) else {
                    continue;
                };
                if iy >= input.height() {
                    continue;
                }
                for kx in 0..c.kernel_w {
                    let Some(ix) = (ox * c.stride + kx).checked_sub(g.pad_left) else {
                        continue;
                    };
                    if ix >= input.width() {
                        continue;
                    }
                    for ic in 0..ic_n {
                        let a = input.get(iy, ix, ic);
                        if a == 0.0 {
                            continue;
                        }
                        let w0 = c.weight_index(ky, kx, ic, 0);
                        for (o, w) in acc.iter_mut().zip(&c.weights[w0..w0 + oc]) {
                            *o += a * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Index into `input` of the winning element for every pooled output, first index on ties.
pub(crate) fn maxpool_argmax(p: &MaxPool2d, input: &Tensor3) -> (Tensor3, Vec<usize>) {
    let out_h = (input.height() - p.size_h) / p.stride + 1;
    let out_w = (input.width() - p.size_w) / p.stride + 1;
    let ch = input.channels();
    let mut out = vec![0.0; out_h * out_w * ch];
    let mut winners = vec![0usize; out_h * out_w * ch];
    for oy in 0..out_h {
        for ox in 0..out_w {
            for c in 0..ch {
                let mut best = input.index(oy * p.stride, ox * p.stride, c);
                for ky in 0..p.size_h {
                    for kx in 0..p.size_w {
                        let idx = input.index(oy * p.stride + ky, ox * p.stride + kx, c);
                        if input.values()[idx] > input.values()[best] {
                            best = idx;
                        }
                    }
                }
                let o = (oy * out_w + ox) * ch + c;
                out[o] = input.values()[best];
                winners[o] = best;
            }
        }
    }
    let t = Tensor3::new(out_h, out_w, ch, out).expect("pooled dims are positive");
    (t, winners)
}

fn maxpool(p: &MaxPool2d, input: &Tensor3) -> Result<Tensor3> {
    if input.height() < p.size_h || input.width() < p.size_w {
        return Err(Error::ZeroDimension);
    }
    Ok(maxpool_argmax(p, input).0)
}

fn global_average_pool(t: &Tensor3) -> Vec<f64> {
    let ch = t.channels();
    let mut sums = vec![0.0; ch];
    for (i, v) in t.values().iter().enumerate() {
        sums[i % ch] += v;
    }
    let n = (t.height() * t.width()) as f64;
    sums.iter().map(|s| s / n).collect()
}
