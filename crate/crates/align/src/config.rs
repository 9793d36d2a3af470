//! Pipeline configuration (TOML). Relative paths resolve against the config
//! file's directory.
//!
//! ```toml
//! seed = 7
//! manifest = "manifest.csv"
//! labels = "labels.csv"          # needed when a head is trained
//! output_dir = "report"
//! filter = "ratio"               # or "headline"
//! split_ratio = 0.8              # only used for frames without a split
//!
//! [methods]
//! spectral = true
//! lrp = ["random", "imagenet", "driving"]
//! gaze = false                   # gaze scored against itself (upper bound)
//! external = [{ name = "deepgaze", dir = "deepgaze" }]   # <frame_id>.pgm
//!
//! [models]
//! random = "models/random.toml"
//! imagenet = "models/imagenet.toml"
//!
//! [train]                        # builds the "driving" regime
//! base = "imagenet"
//! epochs = 5
//! batch_size = 8
//! learning_rate = 1e-3
//!
//! [lrp]
//! rule = "epsilon"               # or "z"
//! epsilon = 1e-7
//! mask = [1.0, 1.0]              # default: all ones
//!
//! [resolution]
//! downsample = 1                 # extra factor after aligning to gaze size
//!
//! [emphasis]
//! pairs = [["lrp_driving", "lrp_imagenet"], ["lrp_imagenet", "lrp_random"]]
//! min_confidence = 0.3
//!
//! [emergent]
//! minuend = "lrp_driving"
//! subtrahend = "lrp_imagenet"
//! max_frames = 8
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use salience_core::emphasis::DEFAULT_MIN_CONFIDENCE;
use salience_core::lrp::Rule;
use salience_core::nn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regime whose model may be produced by training instead of loading.
pub const TRAINED_REGIME: &str = "driving";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterPolicy {
    /// Non-trivial, daytime, test split; both attention classes kept for the ratio analysis.
    #[default]
    Ratio,
    /// Additionally attentive only.
    Headline,
}

impl FilterPolicy {
    pub fn describe(self) -> &'static str {
        match self {
            FilterPolicy::Ratio => "trivial == false && daytime == true && split == test",
            FilterPolicy::Headline => {
                "trivial == false && daytime == true && split == test && attention == attentive"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalMethod {
    pub name: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    #[serde(default)]
    pub spectral: bool,
    #[serde(default)]
    pub lrp: Vec<String>,
    #[serde(default)]
    pub gaze: bool,
    #[serde(default)]
    pub external: Vec<ExternalMethod>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    #[default]
    Epsilon,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrpConfig {
    #[serde(default)]
    pub rule: RuleName,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub mask: Option<Vec<f64>>,
}

fn default_epsilon() -> f64 {
    1e-7
}

impl Default for LrpConfig {
    fn default() -> Self {
        Self {
            rule: RuleName::Epsilon,
            epsilon: default_epsilon(),
            mask: None,
        }
    }
}

impl LrpConfig {
    pub fn rule(&self) -> Rule {
        match self.rule {
            RuleName::Epsilon => Rule::Epsilon(self.epsilon),
            RuleName::Z => Rule::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_base")]
    pub base: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    pub dropout: Option<f64>,
}

fn default_base() -> String {
    "imagenet".into()
}
fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_batch() -> usize {
    TrainConfig::default().batch_size
}
fn default_lr() -> f64 {
    TrainConfig::default().learning_rate
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    #[serde(default = "one")]
    pub downsample: usize,
}

fn one() -> usize {
    1
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self { downsample: 1 }
    }
}

impl ResolutionConfig {
    pub fn describe(&self) -> String {
        format!(
            "method heatmaps resized (bilinear, pixel centres) to gaze resolution; downsample factor {}",
            self.downsample
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmphasisConfig {
    #[serde(default = "default_pairs")]
    pub pairs: Vec<[String; 2]>,
    #[serde(default = "default_min_confidence")]
    pub min_confidence: f64,
}

fn default_pairs() -> Vec<[String; 2]> {
    vec![
        ["lrp_driving".into(), "lrp_imagenet".into()],
        ["lrp_imagenet".into(), "lrp_random".into()],
    ]
}

fn default_min_confidence() -> f64 {
    DEFAULT_MIN_CONFIDENCE
}

impl Default for EmphasisConfig {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergentConfig {
    #[serde(default = "default_minuend")]
    pub minuend: String,
    #[serde(default = "default_subtrahend")]
    pub subtrahend: String,
    #[serde(default = "default_max_frames")]
    pub max_frames: usize,
}

fn default_minuend() -> String {
    "lrp_driving".into()
}
fn default_subtrahend() -> String {
    "lrp_imagenet".into()
}
fn default_max_frames() -> usize {
    8
}

impl Default for EmergentConfig {
    fn default() -> Self {
        Self {
            minuend: default_minuend(),
            subtrahend: default_subtrahend(),
            max_frames: default_max_frames(),
        }
    }
}

fn default_split() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub manifest: PathBuf,
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub filter: FilterPolicy,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    pub methods: MethodsConfig,
    #[serde(default)]
    pub models: BTreeMap<String, PathBuf>,
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub lrp: LrpConfig,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub emphasis: EmphasisConfig,
    #[serde(default)]
    pub emergent: EmergentConfig,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.output_dir);
        if let Some(l) = &mut self.labels {
            fix(l);
        }
        self.models.values_mut().for_each(fix);
        self.methods.external.iter_mut().for_each(|m| fix(&mut m.dir));
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        if self.resolution.downsample == 0 {
            return fail("resolution.downsample must be >= 1".into());
        }
        for regime in &self.methods.lrp {
            let trained = regime == TRAINED_REGIME && self.train.is_some();
            if !self.models.contains_key(regime) && !trained {
                return fail(format!("LRP regime {regime:?} has no model path"));
            }
        }
        if let Some(t) = &self.train {
            if !self.models.contains_key(&t.base) {
                return fail(format!("train.base {:?} has no model path", t.base));
            }
            if self.labels.is_none() {
                return fail("training a head needs `labels`".into());
            }
        }
        let names = self.method_names();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return fail(format!("method {n:?} listed twice"));
            }
        }
        if names.is_empty() {
            return fail("no methods enabled".into());
        }
        Ok(())
    }

    /// Enabled methods in report order.
    pub fn method_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.methods.spectral {
            out.push("spectral".to_string());
        }
        out.extend(self.methods.lrp.iter().map(|r| format!("lrp_{r}")));
        if self.methods.gaze {
            out.push("gaze".to_string());
        }
        out.extend(self.methods.external.iter().map(|m| m.name.clone()));
        out
    }
}
