//! CSV records: the frame manifest, driving labels, detections and the
//! per-frame score log.
//!
//! | file        | columns                                                                          |
//! |-------------|----------------------------------------------------------------------------------|
//! | manifest    | `run_id, frame_idx, attention, trivial, daytime, split, image, gaze, detections` |
//! | labels      | `frame_id, yaw, translation`                                                     |
//! | detections  | `frame_id, class_name, confidence, x, y, w, h`                                   |
//! | score log   | `frame_id, method, cosine, spearman, attention`                                  |
//!
//! Manifest paths are relative to the manifest's directory. `split` may be
//! empty, in which case the pipeline assigns it. A frame's id is
//! `<run_id>-<frame_idx, six digits>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use salience_core::emphasis::{BBox, Detection};
use salience_core::stats::Attention;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub run_id: String,
    pub frame_idx: u32,
    pub attention: Attention,
    pub trivial: bool,
    pub daytime: bool,
    pub split: Option<Split>,
    pub image: PathBuf,
    pub gaze: PathBuf,
    pub detections: Option<PathBuf>,
}

pub fn frame_id(run_id: &str, frame_idx: u32) -> String {
    format!("{run_id}-{frame_idx:06}")
}

impl FrameRecord {
    pub fn id(&self) -> String {
        frame_id(&self.run_id, self.frame_idx)
    }
}

pub fn parse_attention(s: &str) -> Option<Attention> {
    match s {
        "attentive" => Some(Attention::Attentive),
        "inattentive" => Some(Attention::Inattentive),
        _ => None,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    run_id: String,
    frame_idx: u32,
    attention: String,
    trivial: bool,
    daytime: bool,
    split: Option<Split>,
    image: String,
    gaze: String,
    detections: Option<String>,
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn row_error(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(path, format!("line {line}: {e}"))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates a manifest; every referenced file must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut reader = open(path)?;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let headers = reader.headers().map_err(|e| row_error(path, &e))?.clone();
    let mut raw = csv::StringRecord::new();
    while reader.read_record(&mut raw).map_err(|e| row_error(path, &e))? {
        let line = raw.position().map(|p| p.line()).unwrap_or(0);
        let row: ManifestRow = raw.deserialize(Some(&headers)).map_err(|e| row_error(path, &e))?;
        let attention = parse_attention(&row.attention).ok_or_else(|| {
            Error::parse(path, format!("line {line}: attention must be attentive or inattentive, got {:?}", row.attention))
        })?;
        let record = FrameRecord {
            attention,
            trivial: row.trivial,
            daytime: row.daytime,
            split: row.split,
            image: base.join(&row.image),
            gaze: base.join(&row.gaze),
            detections: row.detections.filter(|d| !d.is_empty()).map(|d| base.join(d)),
            run_id: row.run_id,
            frame_idx: row.frame_idx,
        };
        if !seen.insert((record.run_id.clone(), record.frame_idx)) {
            return Err(Error::parse(path, format!("line {line}: duplicate frame {}", record.id())));
        }
        records.push(record);
    }
    let mut missing: Vec<PathBuf> = records
        .iter()
        .flat_map(|r| [Some(&r.image), Some(&r.gaze), r.detections.as_ref()])
        .flatten()
        .filter(|p| !p.exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingFiles(missing));
    }
    Ok(records)
}

/// Writes records with their paths as given (callers pass manifest-relative paths).
pub fn save_manifest(records: &[FrameRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in records {
        let row = ManifestRow {
            run_id: r.run_id.clone(),
            frame_idx: r.frame_idx,
            attention: r.attention.name().to_string(),
            trivial: r.trivial,
            daytime: r.daytime,
            split: r.split,
            image: r.image.display().to_string(),
            gaze: r.gaze.display().to_string(),
            detections: r.detections.as_ref().map(|d| d.display().to_string()),
        };
        w.serialize(row).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    finish(path, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub frame_id: String,
    pub yaw: f64,
    pub translation: f64,
}

/// Raw (unscaled) labels keyed by frame id.
pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, (f64, f64)>> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    let mut reader = open(path)?;
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| row_error(path, &e))?;
        if out.insert(row.frame_id.clone(), (row.yaw, row.translation)).is_some() {
            return Err(Error::parse(path, format!("duplicate label for frame {}", row.frame_id)));
        }
    }
    Ok(out)
}

pub fn save_labels(rows: &[LabelRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    finish(path, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub frame_id: String,
    pub class_name: String,
    pub confidence: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl DetectionRow {
    pub fn detection(&self) -> Detection {
        Detection {
            class_name: self.class_name.clone(),
            bbox: BBox::new(self.x, self.y, self.w, self.h),
            confidence: self.confidence,
        }
    }
}

/// Detections grouped by frame id, in file order within each frame.
pub fn load_detections(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Detection>>> {
    let path = path.as_ref();
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    let mut reader = open(path)?;
    for row in reader.deserialize::<DetectionRow>() {
        let row = row.map_err(|e| row_error(path, &e))?;
        out.entry(row.frame_id.clone()).or_default().push(row.detection());
    }
    Ok(out)
}

pub fn save_detections(rows: &[DetectionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    finish(path, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub frame_id: String,
    pub method: String,
    pub cosine: f64,
    pub spearman: f64,
    pub attention: String,
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<ScoreRow>() {
        let row = row.map_err(|e| row_error(path, &e))?;
        if parse_attention(&row.attention).is_none() {
            return Err(Error::parse(path, format!("frame {}: bad attention {:?}", row.frame_id, row.attention)));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn save_scores(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    finish(path, w)
}
