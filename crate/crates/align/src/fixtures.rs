//! Seeded synthetic driving scenes standing in for a recorded gaze dataset.
//!
//! Each frame shows a low-contrast textured background, a few flat
//! high-contrast distractors ("car", "person", "stop sign") and one task
//! object ("traffic light") carrying a fine checkerboard texture. The task
//! object's position and size set the frame's driving label; gaze sits on the
//! task object for attentive frames and on a random distractor otherwise.
//!
//! Two backbones come with the data, sharing one architecture. Both centre
//! the input on zero before the first convolution.
//! * `random`: every weight Glorot-random.
//! * `imagenet`: a fixed, hand-set filter bank (checker detector, signed
//!   edges, brightness) read out by an objectness head that sums every
//!   channel except the checker detector. It plays the role of a generic
//!   pretrained extractor that responds to any salient object.
//!
//! The written `fixture.cfg` trains the `driving` head on the imagenet
//! backbone and scores all three regimes plus spectral residual.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salience_core::nn::{Conv2d, Dense, Layer, MaxPool2d, ModelSpec, Padding, Preprocess};
use salience_core::stats::Attention;
use salience_core::{Heatmap, Shape, Tensor3};
use serde::{Deserialize, Serialize};

use crate::config::{
    EmergentConfig, EmphasisConfig, FilterPolicy, LrpConfig, MethodsConfig, PipelineConfig, ResolutionConfig,
    TrainSection,
};
use crate::error::{Error, Result};
use crate::model_io::save_model;
use crate::pgm::{save_grayscale, save_rgb};
use crate::pipeline::split_train_test;
use crate::records::{frame_id, save_detections, save_labels, save_manifest, DetectionRow, FrameRecord, LabelRow};

pub const TASK_CLASS: &str = "traffic light";
pub const DISTRACTOR_CLASSES: [&str; 3] = ["car", "person", "stop sign"];
const BACKGROUND: f64 = 128.0;
/// Brightness multiplier for nighttime runs.
const NIGHT_GAIN: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSpec {
    pub frames: usize,
    pub runs: usize,
    pub width: usize,
    pub height: usize,
    /// Upper bound; each frame draws between 1 and this many.
    pub distractors: usize,
    pub attentive_fraction: f64,
    pub trivial_fraction: f64,
    /// The last `night_runs` runs are nighttime.
    pub night_runs: usize,
    pub split_ratio: f64,
    pub gaze_sigma: f64,
    pub object_min: usize,
    pub object_max: usize,
    pub checker_amplitude: f64,
    pub background_noise: f64,
    /// Chance per frame of one extra low-confidence detection.
    pub false_positive_rate: f64,
    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_learning_rate: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            frames: 1200,
            runs: 5,
            width: 96,
            height: 64,
            distractors: 4,
            attentive_fraction: 0.7,
            trivial_fraction: 0.1,
            night_runs: 1,
            split_ratio: 0.5,
            gaze_sigma: 5.0,
            object_min: 8,
            object_max: 16,
            checker_amplitude: 30.0,
            background_noise: 4.0,
            false_positive_rate: 0.2,
            train_epochs: 200,
            train_batch_size: 16,
            train_learning_rate: 0.05,
        }
    }
}

impl FixtureSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: FixtureSpec = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("fixture spec: {m}")));
        if self.frames == 0 || self.runs == 0 || self.runs > self.frames {
            return fail("need frames >= runs >= 1");
        }
        if !self.width.is_multiple_of(8) || !self.height.is_multiple_of(8) || self.width < 32 || self.height < 32 {
            return fail("width and height must be multiples of 8, at least 32");
        }
        if self.object_min < 2 || self.object_min > self.object_max || self.object_max + 4 > self.height.min(self.width) {
            return fail("object size range does not fit the frame");
        }
        for (name, v) in [
            ("attentive_fraction", self.attentive_fraction),
            ("trivial_fraction", self.trivial_fraction),
            ("false_positive_rate", self.false_positive_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(&format!("{name} outside [0, 1]"));
            }
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail("split_ratio outside (0, 1)");
        }
        if self.night_runs > self.runs {
            return fail("night_runs exceeds runs");
        }
        if !(self.gaze_sigma > 0.0) {
            return fail("gaze_sigma must be positive");
        }
        Ok(())
    }
}

/// Attentive under an even interleaving: exactly `floor(n * fraction)` of the first `n` frames.
pub fn is_attentive(index: usize, fraction: f64) -> bool {
    ((index + 1) as f64 * fraction).floor() > (index as f64 * fraction).floor()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn centre(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    fn overlaps(&self, o: &Rect, gap: usize) -> bool {
        self.x < o.x + o.w + gap && o.x < self.x + self.w + gap && self.y < o.y + o.h + gap && o.y < self.y + self.h + gap
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        (self.x..self.x + self.w).contains(&x) && (self.y..self.y + self.h).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Tensor3,
    pub gaze: Heatmap,
    pub task: Rect,
    pub distractors: Vec<(&'static str, Rect)>,
    pub yaw: f64,
    pub translation: f64,
}

/// Gaussian blob peaking at 255, evaluated at pixel centres.
pub fn gaze_blob(width: usize, height: usize, centre: (f64, f64), sigma: f64) -> Result<Heatmap> {
    let two_s2 = 2.0 * sigma * sigma;
    Ok(Heatmap::from_fn(width, height, |x, y| {
        let dx = x as f64 + 0.5 - centre.0;
        let dy = y as f64 + 0.5 - centre.1;
        255.0 * (-(dx * dx + dy * dy) / two_s2).exp()
    })?)
}

fn distractor_size(class: &str, rng: &mut ChaCha8Rng) -> (usize, usize) {
    match class {
        "car" => (rng.gen_range(10..=16), rng.gen_range(6..=9)),
        "person" => (rng.gen_range(4..=7), rng.gen_range(10..=16)),
        _ => {
            let s = rng.gen_range(7..=10);
            (s, s)
        }
    }
}

/// One frame. `attentive` picks the gaze target; `night` darkens the image.
pub fn render_scene(spec: &FixtureSpec, attentive: bool, night: bool, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let (w, h) = (spec.width, spec.height);
    // One draw sets both position and size: objects further right are smaller.
    let u: f64 = rng.gen();
    let span = (spec.object_max - spec.object_min) as f64;
    let jitter = rng.gen_range(-1i64..=1);
    let side = ((spec.object_max as f64 - span * u).round() as i64 + jitter)
        .clamp(spec.object_min as i64, spec.object_max as i64) as usize;
    let x = 2 + (u * (w - side - 4) as f64).round() as usize;
    let y = rng.gen_range(2..=h - side - 2);
    let task = Rect { x, y, w: side, h: side };

    // A varying count keeps total distractor mass from standing in for a constant.
    let count = if spec.distractors == 0 { 0 } else { rng.gen_range(1..=spec.distractors) };
    let mut distractors: Vec<(&'static str, Rect)> = Vec::new();
    for k in 0..count {
        let class = DISTRACTOR_CLASSES[k % DISTRACTOR_CLASSES.len()];
        let (dw, dh) = distractor_size(class, rng);
        for _ in 0..100 {
            let r = Rect {
                x: rng.gen_range(1..=w - dw - 1),
                y: rng.gen_range(1..=h - dh - 1),
                w: dw,
                h: dh,
            };
            if !r.overlaps(&task, 2) && distractors.iter().all(|(_, o)| !r.overlaps(o, 2)) {
                distractors.push((class, r));
                break;
            }
        }
    }
    let tones: Vec<f64> = distractors
        .iter()
        .map(|_| {
            if rng.gen_bool(0.5) {
                rng.gen_range(215.0..=240.0)
            } else {
                rng.gen_range(15.0..=40.0)
            }
        })
        .collect();

    let gain = if night { NIGHT_GAIN } else { 1.0 };
    let mut values = Vec::with_capacity(w * h * 3);
    for py in 0..h {
        for px in 0..w {
            let noise = if spec.background_noise > 0.0 {
                rng.gen_range(-spec.background_noise..=spec.background_noise)
            } else {
                0.0
            };
            let mut v = BACKGROUND + noise;
            if task.contains(px, py) {
                let sign = if (px + py) % 2 == 0 { 1.0 } else { -1.0 };
                v = BACKGROUND + sign * spec.checker_amplitude + noise;
            }
            for ((_, r), &tone) in distractors.iter().zip(&tones) {
                if r.contains(px, py) {
                    v = tone;
                }
            }
            let v = (v * gain).clamp(0.0, 255.0).round();
            values.extend_from_slice(&[v, v, v]);
        }
    }
    let image = Tensor3::new(h, w, 3, values)?;

    let target = if attentive || distractors.is_empty() {
        task
    } else {
        distractors[rng.gen_range(0..distractors.len())].1
    };
    let gaze = gaze_blob(w, h, target.centre(), spec.gaze_sigma)?;
    Ok(Scene {
        image,
        gaze,
        task,
        distractors,
        yaw: task.centre().0 / w as f64,
        translation: side as f64,
    })
}

fn conv_same(in_c: usize, out_c: usize) -> Conv2d {
    Conv2d::zeros(3, 3, in_c, out_c, 1, Padding::Same)
}

/// Shared architecture: two 3x3 conv/ReLU stages, three 2x2 pools, flatten, dense to 2 outputs.
pub fn architecture(width: usize, height: usize) -> Result<ModelSpec> {
    let pool = Layer::MaxPool2d(MaxPool2d { size_h: 2, size_w: 2, stride: 2 });
    let features = (height / 8) * (width / 8) * FEATURE_CHANNELS;
    let layers = vec![
        Layer::Conv2d(conv_same(3, FEATURE_CHANNELS)),
        Layer::Relu,
        pool.clone(),
        Layer::Conv2d(conv_same(FEATURE_CHANNELS, FEATURE_CHANNELS)),
        Layer::Relu,
        pool.clone(),
        pool,
        Layer::Flatten,
        Layer::Dense(Dense::zeros(features, 2)),
    ];
    let preprocess = Preprocess {
        scale: vec![1.0 / 255.0; 3],
        offset: vec![-0.5; 3],
    };
    Ok(ModelSpec::new("fixture", Shape::spatial(height, width, 3), Some(preprocess), layers)?)
}

pub const FEATURE_CHANNELS: usize = 6;
const CHECKER: usize = 0;
const BRIGHT: usize = 5;

/// Hand-set first stage: checker detector, signed horizontal/vertical edges, brightness.
// indexed loops: the vertical kernels read the sobel table transposed
#[allow(clippy::needless_range_loop)]
fn filter_bank() -> Conv2d {
    let mut c = conv_same(3, FEATURE_CHANNELS);
    let sobel = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    for ic in 0..3 {
        let mut set = |ky: usize, kx: usize, oc: usize, v: f64| {
            let i = c.weight_index(ky, kx, ic, oc);
            c.weights[i] = v / 3.0;
        };
        // 2x2 checker in the lower-right of the window; zero response to straight edges.
        for (ky, kx, v) in [(1, 1, 1.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)] {
            set(ky, kx, CHECKER, v);
        }
        for ky in 0..3 {
            for kx in 0..3 {
                set(ky, kx, 1, sobel[ky][kx] / 4.0);
                set(ky, kx, 2, -sobel[ky][kx] / 4.0);
                set(ky, kx, 3, sobel[kx][ky] / 4.0);
                set(ky, kx, 4, -sobel[kx][ky] / 4.0);
            }
        }
        set(1, 1, BRIGHT, 1.0);
    }
    c.bias[CHECKER] = -0.15;
    for edge in 1..BRIGHT {
        c.bias[edge] = -0.05;
    }
    c.bias[BRIGHT] = -0.2;
    c
}

/// Per-channel 3x3 box blur.
fn smoothing() -> Conv2d {
    let mut c = conv_same(FEATURE_CHANNELS, FEATURE_CHANNELS);
    for ky in 0..3 {
        for kx in 0..3 {
            for ch in 0..FEATURE_CHANNELS {
                let i = c.weight_index(ky, kx, ch, ch);
                c.weights[i] = 1.0 / 9.0;
            }
        }
    }
    c
}

/// Generic readout: responds to edges and brightness anywhere, ignores the
/// checker channel. Small seeded jitter keeps the two outputs distinct.
fn objectness_head(in_features: usize, seed: u64) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = in_features / FEATURE_CHANNELS;
    let mut d = Dense::zeros(in_features, 2);
    for i in 0..in_features {
        if i % FEATURE_CHANNELS == CHECKER {
            continue;
        }
        for o in 0..2 {
            d.weights[i * 2 + o] = (1.0 + rng.gen_range(-0.25..0.25)) / cells as f64;
        }
    }
    d
}

pub fn random_backbone(width: usize, height: usize, seed: u64) -> Result<ModelSpec> {
    Ok(architecture(width, height)?.with_random_weights(seed).with_name("random"))
}

pub fn imagenet_backbone(width: usize, height: usize, seed: u64) -> Result<ModelSpec> {
    let arch = architecture(width, height)?;
    let mut layers = arch.layers().to_vec();
    layers[0] = Layer::Conv2d(filter_bank());
    layers[3] = Layer::Conv2d(smoothing());
    let Layer::Dense(d) = &layers[8] else {
        return Err(Error::Internal("fixture architecture lost its head".into()));
    };
    layers[8] = Layer::Dense(objectness_head(d.in_features, seed));
    Ok(ModelSpec::new(
        "imagenet",
        arch.input_shape(),
        Some(arch.preprocess().clone()),
        layers,
    )?)
}

/// What `generate_fixtures` wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSummary {
    pub frames: usize,
    pub attentive: usize,
    pub config: std::path::PathBuf,
}

/// Writes frames, gaze maps, manifest, labels, detections, both backbones
/// and a runnable `fixture.cfg` under `out`.
pub fn generate_fixtures(spec: &FixtureSpec, seed: u64, out: impl AsRef<Path>) -> Result<FixtureSummary> {
    spec.validate()?;
    let out = out.as_ref();
    for sub in ["frames", "gaze", "models"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(spec.frames);
    let mut labels = Vec::with_capacity(spec.frames);
    let mut detections = Vec::new();
    let mut attentive_count = 0;
    let per_run = spec.frames.div_ceil(spec.runs);
    for i in 0..spec.frames {
        let run = i / per_run;
        let run_id = format!("run{:02}", run + 1);
        let frame_idx = (i - run * per_run) as u32;
        let id = frame_id(&run_id, frame_idx);
        let attentive = is_attentive(i, spec.attentive_fraction);
        attentive_count += attentive as usize;
        let night = run >= spec.runs - spec.night_runs;
        let trivial = rng.gen_bool(spec.trivial_fraction);
        let scene = render_scene(spec, attentive, night, &mut rng)?;

        let image_rel = format!("frames/{id}.ppm");
        let gaze_rel = format!("gaze/{id}.pgm");
        save_rgb(&scene.image, out.join(&image_rel))?;
        save_grayscale(&scene.gaze, out.join(&gaze_rel))?;

        let det = |class: &str, r: &Rect, confidence: f64| DetectionRow {
            frame_id: id.clone(),
            class_name: class.into(),
            confidence,
            x: r.x as f64,
            y: r.y as f64,
            w: r.w as f64,
            h: r.h as f64,
        };
        detections.push(det(TASK_CLASS, &scene.task, rng.gen_range(0.6..1.0)));
        for (class, r) in &scene.distractors {
            detections.push(det(class, r, rng.gen_range(0.5..1.0)));
        }
        if rng.gen_bool(spec.false_positive_rate) {
            let class = DISTRACTOR_CLASSES[rng.gen_range(0..DISTRACTOR_CLASSES.len())];
            let r = Rect {
                x: rng.gen_range(0..spec.width - 8),
                y: rng.gen_range(0..spec.height - 8),
                w: 8,
                h: 8,
            };
            detections.push(det(class, &r, rng.gen_range(0.05..0.25)));
        }
        labels.push(LabelRow {
            frame_id: id.clone(),
            yaw: scene.yaw,
            translation: scene.translation,
        });
        records.push(FrameRecord {
            run_id,
            frame_idx,
            attention: if attentive { Attention::Attentive } else { Attention::Inattentive },
            trivial,
            daytime: !night,
            split: None,
            image: image_rel.into(),
            gaze: gaze_rel.into(),
            detections: Some("detections.csv".into()),
        });
    }
    split_train_test(&mut records, spec.split_ratio, seed)?;
    save_manifest(&records, out.join("manifest.csv"))?;
    save_labels(&labels, out.join("labels.csv"))?;
    save_detections(&detections, out.join("detections.csv"))?;

    save_model(&random_backbone(spec.width, spec.height, seed.wrapping_add(1))?, out.join("models/random.toml"))?;
    save_model(&imagenet_backbone(spec.width, spec.height, seed.wrapping_add(2))?, out.join("models/imagenet.toml"))?;

    let config = fixture_config(spec, seed);
    let text = toml::to_string(&config).map_err(|e| Error::Internal(e.to_string()))?;
    let config_path = out.join("fixture.cfg");
    fs::write(&config_path, text).map_err(|e| Error::io(&config_path, e))?;
    let spec_path = out.join("fixture-spec.toml");
    let spec_text = toml::to_string(spec).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&spec_path, spec_text).map_err(|e| Error::io(&spec_path, e))?;

    Ok(FixtureSummary {
        frames: spec.frames,
        attentive: attentive_count,
        config: config_path,
    })
}

/// Pipeline config for a generated fixture; paths are relative to the fixture directory.
pub fn fixture_config(spec: &FixtureSpec, seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed,
        manifest: "manifest.csv".into(),
        labels: Some("labels.csv".into()),
        output_dir: "report".into(),
        filter: FilterPolicy::Ratio,
        split_ratio: spec.split_ratio,
        methods: MethodsConfig {
            spectral: true,
            lrp: vec!["random".into(), "imagenet".into(), "driving".into()],
            gaze: false,
            external: Vec::new(),
        },
        models: [
            ("random".to_string(), "models/random.toml".into()),
            ("imagenet".to_string(), "models/imagenet.toml".into()),
        ]
        .into_iter()
        .collect(),
        train: Some(TrainSection {
            base: "imagenet".into(),
            epochs: spec.train_epochs,
            batch_size: spec.train_batch_size,
            learning_rate: spec.train_learning_rate,
            dropout: None,
        }),
        lrp: LrpConfig::default(),
        resolution: ResolutionConfig::default(),
        emphasis: EmphasisConfig::default(),
        emergent: EmergentConfig::default(),
    }
}
