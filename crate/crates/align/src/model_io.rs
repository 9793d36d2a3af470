//! Model files: a TOML architecture manifest plus a raw little-endian `f32`
//! weight blob.
//!
//! ```toml
//! name = "toy"
//! input_shape = [64, 96, 3]      # height, width, channels
//! weights = "toy.bin"            # default: manifest stem + ".bin"
//!
//! [preprocess]                   # optional, per channel: x * scale + offset
//! scale = [0.0039, 0.0039, 0.0039]
//! offset = [0.0, 0.0, 0.0]
//!
//! [[layers]]
//! kind = "conv2d"
//! kernel = [3, 3]
//! out_channels = 8
//! stride = 1                     # default 1
//! padding = "same"               # "same" (default) or "valid"
//!
//! [[layers]]
//! kind = "maxpool2d"
//! size = [2, 2]
//! stride = 2                     # default: size
//! ```
//!
//! Other kinds: `relu`, `global_average_pool`, `flatten`, `dropout` (`rate`)
//! and `dense` (`units`). Input channels and dense input widths follow from the
//! shape chain. Each layer may also state `params` and `output_shape`; when
//! present they are checked. The blob holds, layer by layer, the weights then
//! the bias, conv weights in `(kh, kw, in_c, out_c)` order and dense weights
//! in `(in, out)` order.

use std::fs;
use std::path::{Path, PathBuf};

use salience_core::nn::{Conv2d, Dense, Layer, LayerKind, MaxPool2d, ModelSpec, Padding, Preprocess};
use salience_core::Shape;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Pair {
    Square(usize),
    Rect([usize; 2]),
}

impl Pair {
    fn dims(self) -> (usize, usize) {
        match self {
            Pair::Square(k) => (k, k),
            Pair::Rect([h, w]) => (h, w),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<Pair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    padding: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<Pair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    units: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_shape: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreprocessEntry {
    scale: Vec<f64>,
    offset: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    name: String,
    input_shape: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preprocess: Option<PreprocessEntry>,
    layers: Vec<LayerEntry>,
}

fn shape_vec(s: Shape) -> Vec<usize> {
    match s {
        Shape::Spatial { height, width, channels } => vec![height, width, channels],
        Shape::Vector(n) => vec![n],
    }
}

fn build_layer(path: &Path, index: usize, e: &LayerEntry, input: Shape) -> Result<Layer> {
    let at = |msg: String| Error::parse(path, format!("layer {index}: {msg}"));
    let need = |v: Option<usize>, field: &str| v.ok_or_else(|| at(format!("{} needs `{field}`", e.kind)));
    let kind = LayerKind::from_name(&e.kind).ok_or_else(|| at(format!("unknown layer kind {:?}", e.kind)))?;
    let layer = match kind {
        LayerKind::Conv2d => {
            let (kh, kw) = e.kernel.ok_or_else(|| at("conv2d needs `kernel`".into()))?.dims();
            let padding = match e.padding.as_deref() {
                None | Some("same") => Padding::Same,
                Some("valid") => Padding::Valid,
                Some(other) => return Err(at(format!("unknown padding {other:?}"))),
            };
            let in_c = match input {
                Shape::Spatial { channels, .. } => channels,
                Shape::Vector(_) => return Err(at("conv2d after the spatial part of the network (shape chain)".into())),
            };
            Layer::Conv2d(Conv2d::zeros(kh, kw, in_c, need(e.out_channels, "out_channels")?, e.stride.unwrap_or(1), padding))
        }
        LayerKind::MaxPool2d => {
            let (size_h, size_w) = e.size.ok_or_else(|| at("maxpool2d needs `size`".into()))?.dims();
            Layer::MaxPool2d(MaxPool2d {
                size_h,
                size_w,
                stride: e.stride.unwrap_or(size_h),
            })
        }
        LayerKind::Dense => {
            let in_features = match input {
                Shape::Vector(n) => n,
                Shape::Spatial { .. } => {
                    return Err(at("dense applied to spatial input; add flatten or pooling first (shape chain)".into()))
                }
            };
            Layer::Dense(Dense::zeros(in_features, need(e.units, "units")?))
        }
        LayerKind::Dropout => Layer::Dropout {
            rate: e.rate.ok_or_else(|| at("dropout needs `rate`".into()))?,
        },
        LayerKind::Relu => Layer::Relu,
        LayerKind::GlobalAveragePool => Layer::GlobalAveragePool,
        LayerKind::Flatten => Layer::Flatten,
    };
    if let Some(p) = e.params {
        if p != layer.parameter_count() {
            return Err(at(format!("declares {p} parameters, geometry gives {}", layer.parameter_count())));
        }
    }
    Ok(layer)
}

fn manifest_to_model(path: &Path, m: &Manifest) -> Result<ModelSpec> {
    let [h, w, c] = m.input_shape;
    let input = Shape::spatial(h, w, c);
    let mut current = input;
    let mut layers = Vec::with_capacity(m.layers.len());
    for (i, entry) in m.layers.iter().enumerate() {
        let layer = build_layer(path, i + 1, entry, current)?;
        layer.validate(i + 1)?;
        current = layer.output_shape(i + 1, current)?;
        if let Some(declared) = &entry.output_shape {
            if *declared != shape_vec(current) {
                return Err(Error::parse(
                    path,
                    format!("layer {}: declared output shape {declared:?}, chain gives {current}", i + 1),
                ));
            }
        }
        layers.push(layer);
    }
    let preprocess = m.preprocess.as_ref().map(|p| Preprocess {
        scale: p.scale.clone(),
        offset: p.offset.clone(),
    });
    Ok(ModelSpec::new(m.name.clone(), input, preprocess, layers)?)
}

/// Builds the architecture from manifest text with all parameters zero.
pub fn parse_manifest(text: &str, path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let manifest: Manifest = toml::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
    manifest_to_model(path, &manifest)
}

fn blob_path(manifest_path: &Path, declared: Option<&str>) -> PathBuf {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    match declared {
        Some(name) => dir.join(name),
        None => manifest_path.with_extension("bin"),
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    let model = manifest_to_model(path, &manifest)?;
    let blob = blob_path(path, manifest.weights.as_deref());
    let bytes = fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    let expected = model.parameter_count();
    if bytes.len() % 4 != 0 || bytes.len() / 4 != expected {
        return Err(Error::BlobLength {
            path: blob,
            expected,
            actual: bytes.len() / 4,
        });
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
    let mut layers = model.layers().to_vec();
    for layer in &mut layers {
        for part in layer.parameters_mut() {
            for slot in part.iter_mut() {
                *slot = values.next().expect("length checked above");
            }
        }
    }
    Ok(ModelSpec::new(
        model.name(),
        model.input_shape(),
        Some(model.preprocess().clone()),
        layers,
    )?)
}

fn to_manifest(model: &ModelSpec, weights: &str) -> Manifest {
    let shapes = model.shapes();
    let layers = model
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let mut e = LayerEntry {
                kind: layer.kind().name().to_string(),
                params: Some(layer.parameter_count()).filter(|&p| p > 0),
                output_shape: Some(shape_vec(shapes[i + 1])),
                ..LayerEntry::default()
            };
            match layer {
                Layer::Conv2d(c) => {
                    e.kernel = Some(Pair::Rect([c.kernel_h, c.kernel_w]));
                    e.out_channels = Some(c.out_channels);
                    e.stride = Some(c.stride);
                    e.padding = Some(match c.padding {
                        Padding::Same => "same".into(),
                        Padding::Valid => "valid".into(),
                    });
                }
                Layer::MaxPool2d(p) => {
                    e.size = Some(Pair::Rect([p.size_h, p.size_w]));
                    e.stride = Some(p.stride);
                }
                Layer::Dropout { rate } => e.rate = Some(*rate),
                Layer::Dense(d) => e.units = Some(d.out_features),
                Layer::Relu | Layer::GlobalAveragePool | Layer::Flatten => {}
            }
            e
        })
        .collect();
    let Shape::Spatial { height, width, channels } = model.input_shape() else {
        unreachable!("models always take spatial input")
    };
    let pre = model.preprocess();
    Manifest {
        name: model.name().to_string(),
        input_shape: [height, width, channels],
        weights: Some(weights.to_string()),
        preprocess: (!pre.is_identity()).then(|| PreprocessEntry {
            scale: pre.scale.clone(),
            offset: pre.offset.clone(),
        }),
        layers,
    }
}

/// Writes `path` (manifest) and a sibling `.bin` blob. Parameters are stored as `f32`.
pub fn save_model(model: &ModelSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let blob = path.with_extension("bin");
    let blob_name = blob
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("unusable model path {}", path.display())))?
        .to_string();
    let text = toml::to_string(&to_manifest(model, &blob_name)).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::with_capacity(model.parameter_count() * 4);
    for layer in model.layers() {
        for v in layer.parameters() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(&blob, bytes).map_err(|e| Error::io(&blob, e))
}
