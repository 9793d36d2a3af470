//! End-to-end run: filter frames, build every method's heatmap, score it
//! against gaze, and summarise.
//!
//! Frames are processed in parallel but every result is collected in
//! manifest order, and all randomness comes from the config seed, so the
//! output does not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use salience_core::emphasis::{emergent_feature_map, Detection, EmphasisAccumulator, EmphasisReport};
use salience_core::lrp::lrp;
use salience_core::metrics::{cosine_similarity, spearman};
use salience_core::nn::{forward, train_head, DriveLabel, Layer, ModelSpec};
use salience_core::spectral::{spectral_residual, SpectralParams};
use salience_core::stats::{anova_oneway, attn_ratio, mann_whitney_two_sided, median, Attention};
use salience_core::{Heatmap, Tensor3};
use serde::Serialize;

use crate::config::{FilterPolicy, PipelineConfig, TRAINED_REGIME};
use crate::error::{Error, Result};
use crate::model_io::load_model;
use crate::pgm::{load_grayscale, load_image};
use crate::records::{load_detections, load_labels, load_manifest, FrameRecord, ScoreRow, Split};

/// Whether a record survives `policy`. Frames without a split never do.
pub fn passes_filter(record: &FrameRecord, policy: FilterPolicy) -> bool {
    let base = !record.trivial && record.daytime && record.split == Some(Split::Test);
    match policy {
        FilterPolicy::Ratio => base,
        FilterPolicy::Headline => base && record.attention == Attention::Attentive,
    }
}

pub fn filter_frames(records: &[FrameRecord], policy: FilterPolicy) -> Vec<FrameRecord> {
    records
        .iter()
        .filter(|r| passes_filter(r, policy))
        .cloned()
        .collect()
}

/// Seeded shuffle; the first `floor(ratio * n)` shuffled records become
/// train, the rest test. Record order is left unchanged.
pub fn split_train_test(records: &mut [FrameRecord], ratio: f64, seed: u64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * records.len() as f64).floor() as usize;
    for (rank, &i) in order.iter().enumerate() {
        records[i].split = Some(if rank < n_train { Split::Train } else { Split::Test });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRow {
    pub all: Option<f64>,
    pub attentive: Option<f64>,
    pub inattentive: Option<f64>,
    /// `attentive / inattentive`, absent when either median is missing or the denominator is not positive.
    pub ratio: Option<f64>,
}

impl MedianRow {
    fn from_scores(attentive: &[f64], inattentive: &[f64]) -> Self {
        let all: Vec<f64> = attentive.iter().chain(inattentive).copied().collect();
        let a = median(attentive).ok();
        let i = median(inattentive).ok();
        Self {
            all: median(&all).ok(),
            attentive: a,
            inattentive: i,
            ratio: a.zip(i).and_then(|(a, i)| attn_ratio(a, i).ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTest {
    pub u_attentive: f64,
    pub u_inattentive: f64,
    pub p_value: f64,
    pub computation: &'static str,
}

/// Two-sided Mann–Whitney on natural-log cosine scores, attentive vs inattentive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogCosineTest {
    pub n_attentive: usize,
    pub n_inattentive: usize,
    /// Scores `<= 0` have no logarithm and are left out.
    pub excluded_non_positive: usize,
    pub result: Option<RankTest>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_all: usize,
    pub n_attentive: usize,
    pub n_inattentive: usize,
    pub cosine: MedianRow,
    pub spearman: MedianRow,
    pub mann_whitney: LogCosineTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaSummary {
    pub metric: &'static str,
    pub f: Option<f64>,
    pub p_value: Option<f64>,
    pub df_between: Option<usize>,
    pub df_within: Option<usize>,
    pub note: Option<String>,
}

fn log_cosine_test(attentive: &[f64], inattentive: &[f64]) -> LogCosineTest {
    let logs = |v: &[f64]| -> Vec<f64> { v.iter().filter(|&&c| c > 0.0).map(|c| c.ln()).collect() };
    let (la, li) = (logs(attentive), logs(inattentive));
    let excluded = attentive.len() + inattentive.len() - la.len() - li.len();
    let (result, note) = match mann_whitney_two_sided(&la, &li) {
        Ok(mw) => (
            Some(RankTest {
                u_attentive: mw.u_x,
                u_inattentive: mw.u_y,
                p_value: mw.test.p_value,
                computation: mw.test.method.name(),
            }),
            None,
        ),
        Err(e) => (None, Some(format!("not computed: {e}"))),
    };
    LogCosineTest {
        n_attentive: la.len(),
        n_inattentive: li.len(),
        excluded_non_positive: excluded,
        result,
        note,
    }
}

fn anova_summary(metric: &'static str, groups: &[Vec<f64>]) -> AnovaSummary {
    match anova_oneway(groups) {
        Ok(r) => AnovaSummary {
            metric,
            f: Some(r.test.statistic),
            p_value: Some(r.test.p_value),
            df_between: Some(r.df_between),
            df_within: Some(r.df_within),
            note: None,
        },
        Err(e) => AnovaSummary {
            metric,
            f: None,
            p_value: None,
            df_between: None,
            df_within: None,
            note: Some(format!("not computed: {e}")),
        },
    }
}

/// Medians, ratios and tests for a score log. Methods appear in the order given.
pub fn summarise(scores: &[ScoreRow], methods: &[String]) -> (Vec<MethodSummary>, Vec<AnovaSummary>) {
    let mut summaries = Vec::with_capacity(methods.len());
    let mut cos_groups = Vec::with_capacity(methods.len());
    let mut sp_groups = Vec::with_capacity(methods.len());
    for m in methods {
        let rows: Vec<&ScoreRow> = scores.iter().filter(|r| &r.method == m).collect();
        let pick = |att: &str, f: fn(&ScoreRow) -> f64| -> Vec<f64> {
            rows.iter().filter(|r| r.attention == att).map(|r| f(r)).collect()
        };
        let (ca, ci) = (pick("attentive", |r| r.cosine), pick("inattentive", |r| r.cosine));
        let (sa, si) = (pick("attentive", |r| r.spearman), pick("inattentive", |r| r.spearman));
        summaries.push(MethodSummary {
            method: m.clone(),
            n_all: rows.len(),
            n_attentive: ca.len(),
            n_inattentive: ci.len(),
            cosine: MedianRow::from_scores(&ca, &ci),
            spearman: MedianRow::from_scores(&sa, &si),
            mann_whitney: log_cosine_test(&ca, &ci),
        });
        cos_groups.push(rows.iter().map(|r| r.cosine).collect::<Vec<_>>());
        sp_groups.push(rows.iter().map(|r| r.spearman).collect::<Vec<_>>());
    }
    let anova = vec![
        anova_summary("cosine", &cos_groups),
        anova_summary("spearman", &sp_groups),
    ];
    (summaries, anova)
}

/// Method names in order of first appearance in a score log.
pub fn methods_in_log(scores: &[ScoreRow]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    scores
        .iter()
        .filter(|r| seen.insert(r.method.clone()))
        .map(|r| r.method.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipRow {
    pub frame_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub class_name: String,
    pub mean_diff: f64,
    pub n_observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmphasisSummary {
    pub minuend: String,
    pub subtrahend: String,
    pub classes: Vec<ClassRow>,
    pub skipped_low_confidence: usize,
    pub skipped_empty_box: usize,
    pub skipped_zero_mass_frames: usize,
}

impl EmphasisSummary {
    fn new(minuend: &str, subtrahend: &str, report: EmphasisReport) -> Self {
        Self {
            minuend: minuend.into(),
            subtrahend: subtrahend.into(),
            classes: report
                .classes
                .into_iter()
                .map(|c| ClassRow {
                    class_name: c.class_name,
                    mean_diff: c.mean_diff,
                    n_observations: c.n_observations,
                })
                .collect(),
            skipped_low_confidence: report.skips.low_confidence,
            skipped_empty_box: report.skips.empty_box,
            skipped_zero_mass_frames: report.skips.zero_mass_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub base: String,
    pub n_frames: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutput {
    pub seed: u64,
    pub filter: FilterPolicy,
    pub predicate: &'static str,
    pub resolution: String,
    pub lrp_rule: String,
    pub methods: Vec<String>,
    pub n_records: usize,
    pub n_filtered: usize,
    pub n_scored: usize,
    pub skipped: Vec<SkipRow>,
    pub summaries: Vec<MethodSummary>,
    pub anova: Vec<AnovaSummary>,
    pub emphasis: Vec<EmphasisSummary>,
    pub training: Option<TrainingSummary>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub scores: Vec<ScoreRow>,
    /// `(frame_id, map)` for the first few scored frames.
    #[serde(skip)]
    pub emergent: Vec<(String, Heatmap)>,
    #[serde(skip)]
    pub trained_model: Option<ModelSpec>,
}

enum Source {
    Spectral,
    Lrp(ModelSpec),
    Gaze,
    External(PathBuf),
}

struct Method {
    name: String,
    source: Source,
}

struct FrameOutcome {
    frame_id: String,
    attention: Attention,
    /// Per method: `(cosine, spearman)` or the failure message.
    results: Vec<std::result::Result<(f64, f64), String>>,
    /// Native-resolution maps of the methods used by emphasis/emergent analysis.
    kept: BTreeMap<String, Heatmap>,
}

struct Context<'a> {
    config: &'a PipelineConfig,
    methods: Vec<Method>,
    mask: Vec<f64>,
    keep: BTreeSet<String>,
    spectral: SpectralParams,
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Resizes the method map onto the gaze grid, then applies the extra downsample to both.
fn align(map: &Heatmap, gaze: &Heatmap, downsample: usize) -> salience_core::Result<(Heatmap, Heatmap)> {
    let map = if map.dims() == gaze.dims() {
        map.clone()
    } else {
        map.resize_bilinear(gaze.width(), gaze.height())?
    };
    if downsample <= 1 {
        return Ok((map, gaze.clone()));
    }
    let w = (gaze.width() / downsample).max(1);
    let h = (gaze.height() / downsample).max(1);
    Ok((map.resize_bilinear(w, h)?, gaze.resize_bilinear(w, h)?))
}

fn method_map(
    ctx: &Context,
    method: &Method,
    record: &FrameRecord,
    image: &std::result::Result<Tensor3, String>,
    gaze: &Heatmap,
) -> std::result::Result<Heatmap, String> {
    let image = || image.as_ref().map_err(|e| format!("image: {e}"));
    match &method.source {
        Source::Spectral => spectral_residual(image()?, &ctx.spectral).map_err(text),
        Source::Lrp(model) => lrp(model, image()?, &ctx.mask, ctx.config.lrp.rule())
            .map(|r| r.input_heatmap)
            .map_err(text),
        Source::Gaze => Ok(gaze.clone()),
        Source::External(dir) => load_grayscale(dir.join(format!("{}.pgm", record.id()))).map_err(text),
    }
}

fn process_frame(ctx: &Context, record: &FrameRecord) -> FrameOutcome {
    let needs_image = ctx
        .methods
        .iter()
        .any(|m| matches!(m.source, Source::Spectral | Source::Lrp(_)));
    let image = if needs_image {
        load_image(&record.image).map_err(text)
    } else {
        Err("not loaded".into())
    };
    let gaze = load_grayscale(&record.gaze).map_err(text);
    let mut kept = BTreeMap::new();
    let results = ctx
        .methods
        .iter()
        .map(|m| {
            let gaze = gaze.as_ref().map_err(|e| format!("gaze: {e}"))?;
            let map = method_map(ctx, m, record, &image, gaze)?;
            let (a, b) = align(&map, gaze, ctx.config.resolution.downsample).map_err(text)?;
            let c = cosine_similarity(&a, &b).map_err(text)?;
            let s = spearman(&a, &b).map_err(text)?;
            if ctx.keep.contains(&m.name) {
                kept.insert(m.name.clone(), map);
            }
            Ok((c, s))
        })
        .collect();
    FrameOutcome {
        frame_id: record.id(),
        attention: record.attention,
        results,
        kept,
    }
}

fn penultimate_features(model: &ModelSpec, image: &Tensor3) -> Result<Vec<f64>> {
    let acts = forward(model, image)?;
    Ok(acts[acts.len() - 2].values().to_vec())
}

fn train_driving(
    config: &PipelineConfig,
    records: &[FrameRecord],
    models: &BTreeMap<String, ModelSpec>,
) -> Result<Option<(ModelSpec, TrainingSummary)>> {
    let Some(train) = &config.train else {
        return Ok(None);
    };
    let base = &models[&train.base];
    if !matches!(base.layers().last(), Some(Layer::Dense(_))) {
        return Err(Error::Config(format!("model {:?} does not end in a dense layer", train.base)));
    }
    let labels_path = config.labels.as_ref().expect("validated");
    let labels = load_labels(labels_path)?;
    let frames: Vec<&FrameRecord> = records.iter().filter(|r| r.split == Some(Split::Train)).collect();
    if frames.is_empty() {
        return Err(Error::Config("no training frames".into()));
    }
    let mut raw = Vec::with_capacity(frames.len());
    for f in &frames {
        let id = f.id();
        let l = labels
            .get(&id)
            .ok_or_else(|| Error::parse(labels_path, format!("no label for training frame {id}")))?;
        raw.push(*l);
    }
    let targets = DriveLabel::rescale(&raw)?;
    let features = frames
        .par_iter()
        .map(|f| penultimate_features(base, &load_image(&f.image)?))
        .collect::<Result<Vec<_>>>()?;
    let tc = train.train_config(config.seed);
    let outcome = train_head(&features, &targets, &tc)?;
    let model = base.with_head(outcome.head)?.with_name(TRAINED_REGIME);
    let summary = TrainingSummary {
        base: train.base.clone(),
        n_frames: frames.len(),
        epochs: tc.epochs,
        batch_size: tc.batch_size,
        learning_rate: tc.learning_rate,
        loss_trace: outcome.loss_trace,
    };
    Ok(Some((model, summary)))
}

/// Runs the configured analysis on a worker pool of `threads` (0 = one per core).
pub fn run_pipeline(config: &PipelineConfig, threads: usize) -> Result<PipelineOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| run_inner(config))
}

fn run_inner(config: &PipelineConfig) -> Result<PipelineOutput> {
    let mut records = load_manifest(&config.manifest)?;
    let mut notes = Vec::new();

    let unsplit: Vec<usize> = (0..records.len()).filter(|&i| records[i].split.is_none()).collect();
    if !unsplit.is_empty() {
        let mut pending: Vec<FrameRecord> = unsplit.iter().map(|&i| records[i].clone()).collect();
        split_train_test(&mut pending, config.split_ratio, config.seed)?;
        for (&i, r) in unsplit.iter().zip(pending) {
            records[i] = r;
        }
        notes.push(format!(
            "{} frames had no split; assigned with ratio {} and seed {}",
            unsplit.len(),
            config.split_ratio,
            config.seed
        ));
    }

    let mut models = BTreeMap::new();
    for (regime, path) in &config.models {
        models.insert(regime.clone(), load_model(path)?);
    }
    let trained = train_driving(config, &records, &models)?;
    let (trained_model, training) = match trained {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    if let Some(m) = &trained_model {
        if !config.models.contains_key(TRAINED_REGIME) {
            models.insert(TRAINED_REGIME.to_string(), m.clone());
        } else {
            notes.push(format!(
                "a {TRAINED_REGIME:?} model path is configured; the freshly trained head is saved but not scored"
            ));
        }
    }

    let mut methods = Vec::new();
    let mut output_len = None;
    if config.methods.spectral {
        methods.push(Method { name: "spectral".into(), source: Source::Spectral });
    }
    for regime in &config.methods.lrp {
        let model = models[regime].clone();
        match output_len {
            None => output_len = Some(model.output_len()),
            Some(n) if n != model.output_len() => {
                return Err(Error::Config(format!(
                    "LRP models disagree on output size ({n} vs {} for {regime:?})",
                    model.output_len()
                )))
            }
            _ => {}
        }
        methods.push(Method { name: format!("lrp_{regime}"), source: Source::Lrp(model) });
    }
    if config.methods.gaze {
        methods.push(Method { name: "gaze".into(), source: Source::Gaze });
    }
    for ext in &config.methods.external {
        methods.push(Method { name: ext.name.clone(), source: Source::External(ext.dir.clone()) });
    }
    let mask = match (&config.lrp.mask, output_len) {
        (Some(m), Some(n)) if m.len() != n => {
            return Err(Error::Config(format!("lrp.mask has {} entries, models output {n}", m.len())))
        }
        (Some(m), _) => m.clone(),
        (None, n) => vec![1.0; n.unwrap_or(0)],
    };
    let names: Vec<String> = methods.iter().map(|m| m.name.clone()).collect();

    let mut pairs = Vec::new();
    for [a, b] in &config.emphasis.pairs {
        if names.contains(a) && names.contains(b) {
            pairs.push((a.clone(), b.clone()));
        } else {
            notes.push(format!("emphasis pair {a} - {b} skipped: method not enabled"));
        }
    }
    let emergent_enabled = config.emergent.max_frames > 0
        && names.contains(&config.emergent.minuend)
        && names.contains(&config.emergent.subtrahend);
    let mut keep: BTreeSet<String> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    if emergent_enabled {
        keep.insert(config.emergent.minuend.clone());
        keep.insert(config.emergent.subtrahend.clone());
    }

    let filtered = filter_frames(&records, config.filter);
    let ctx = Context {
        config,
        methods,
        mask,
        keep,
        spectral: SpectralParams::default(),
    };
    let outcomes: Vec<FrameOutcome> = filtered.par_iter().map(|r| process_frame(&ctx, r)).collect();

    for (i, name) in names.iter().enumerate() {
        let failures: Vec<&String> = outcomes.iter().filter_map(|o| o.results[i].as_ref().err()).collect();
        if failures.len() * 2 > outcomes.len() {
            return Err(Error::MethodFailed {
                method: name.clone(),
                failed: failures.len(),
                total: outcomes.len(),
                first: failures[0].clone(),
            });
        }
    }

    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    let mut scored = Vec::new();
    for o in &outcomes {
        let errors: Vec<String> = names
            .iter()
            .zip(&o.results)
            .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
            .collect();
        if !errors.is_empty() {
            skipped.push(SkipRow { frame_id: o.frame_id.clone(), reason: errors.join("; ") });
            continue;
        }
        for (n, r) in names.iter().zip(&o.results) {
            let (cosine, spearman) = *r.as_ref().expect("checked above");
            scores.push(ScoreRow {
                frame_id: o.frame_id.clone(),
                method: n.clone(),
                cosine,
                spearman,
                attention: o.attention.name().into(),
            });
        }
        scored.push(o);
    }
    if filtered.is_empty() {
        notes.push("no frames passed the filter".into());
    }

    let (summaries, anova) = summarise(&scores, &names);

    let mut emphasis = Vec::new();
    if !pairs.is_empty() {
        let detections = load_frame_detections(&filtered)?;
        let empty = Vec::new();
        for (a, b) in &pairs {
            let mut acc = EmphasisAccumulator::new(config.emphasis.min_confidence);
            for o in &scored {
                let dets = detections.get(&o.frame_id).unwrap_or(&empty);
                acc.add_frame(&o.kept[a], &o.kept[b], dets)?;
            }
            emphasis.push(EmphasisSummary::new(a, b, acc.finish()));
        }
    }

    let mut emergent = Vec::new();
    if emergent_enabled {
        let (m, s) = (&config.emergent.minuend, &config.emergent.subtrahend);
        for o in scored.iter().take(config.emergent.max_frames) {
            emergent.push((o.frame_id.clone(), emergent_feature_map(&o.kept[m], &o.kept[s])?));
        }
    }

    Ok(PipelineOutput {
        seed: config.seed,
        filter: config.filter,
        predicate: config.filter.describe(),
        resolution: config.resolution.describe(),
        lrp_rule: format!("{:?}", config.lrp.rule()),
        methods: names,
        n_records: records.len(),
        n_filtered: filtered.len(),
        n_scored: scored.len(),
        skipped,
        summaries,
        anova,
        emphasis,
        training,
        notes,
        scores,
        emergent,
        trained_model,
    })
}

/// Detections for the given frames; each distinct file is read once.
fn load_frame_detections(records: &[FrameRecord]) -> Result<BTreeMap<String, Vec<Detection>>> {
    let mut files: BTreeMap<&PathBuf, BTreeMap<String, Vec<Detection>>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for r in records {
        let Some(path) = &r.detections else { continue };
        if !files.contains_key(path) {
            files.insert(path, load_detections(path)?);
        }
        if let Some(d) = files[path].get(&r.id()) {
            out.insert(r.id(), d.clone());
        }
    }
    Ok(out)
}
