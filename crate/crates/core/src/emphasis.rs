//! Object-level emphasis: how much of a heatmap's mass falls inside detected
//! boxes, how that differs between two methods per object class, and the
//! subtractive map that isolates what one method highlights over another.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::heatmap::Heatmap;
use crate::{Error, Result};

/// Default minimum detector confidence.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.3;

/// Upper bound applied to both normalized maps before subtraction.
pub const EMERGENT_CLIP_MAX: f64 = 100.0;

/// Axis-aligned box in pixel coordinates; pixel `(i, j)` is inside when its
/// centre `(i + 0.5, j + 0.5)` lies in `[x, x + w) x [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Covered pixel ranges `(x0..x1, y0..y1)` after clamping to the image.
    pub fn pixel_span(&self, width: usize, height: usize) -> Option<(core::ops::Range<usize>, core::ops::Range<usize>)> {
        if !(self.w > 0.0 && self.h > 0.0) {
            return None;
        }
        let span = |start: f64, len: f64, limit: usize| {
            // first index with centre >= start, first index with centre >= start + len
            let lo = libm::ceil(start - 0.5).max(0.0);
            let hi = libm::ceil(start + len - 0.5).max(0.0);
            let lo = (lo as usize).min(limit);
            let hi = (hi as usize).min(limit);
            lo..hi
        };
        let xs = span(self.x, self.w, width);
        let ys = span(self.y, self.h, height);
        if xs.is_empty() || ys.is_empty() {
            None
        } else {
            Some((xs, ys))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_name: String,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Share of the heatmap's total mass inside `bbox`.
pub fn emphasis_proportion(hm: &Heatmap, bbox: &BBox) -> Result<f64> {
    let total = hm.sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    let (xs, ys) = bbox
        .pixel_span(hm.width(), hm.height())
        .ok_or(Error::EmptyBox)?;
    let inside: f64 = ys
        .map(|y| hm.values()[y * hm.width() + xs.start..y * hm.width() + xs.end].iter().sum::<f64>())
        .sum();
    Ok((inside / total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmphasisDiff {
    pub class_name: String,
    pub mean_diff: f64,
    pub n_observations: usize,
}

/// Why detections or frames did not contribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmphasisSkips {
    pub low_confidence: usize,
    pub empty_box: usize,
    pub zero_mass_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmphasisReport {
    /// Sorted by `mean_diff` descending, then class name.
    pub classes: Vec<ClassEmphasisDiff>,
    pub skips: EmphasisSkips,
}

/// Running per-class sums of `proportion(a) - proportion(b)`.
///
/// Frames must be added in a fixed order for bit-reproducible means.
#[derive(Debug, Clone, Default)]
pub struct EmphasisAccumulator {
    min_confidence: f64,
    sums: BTreeMap<String, (f64, usize)>,
    skips: EmphasisSkips,
}

impl EmphasisAccumulator {
    pub fn new(min_confidence: f64) -> Self {
        Self {
            min_confidence,
            ..Self::default()
        }
    }

    /// Adds one frame's detections; returns how many contributed.
    pub fn add_frame(&mut self, map_a: &Heatmap, map_b: &Heatmap, detections: &[Detection]) -> Result<usize> {
        if map_a.dims() != map_b.dims() {
            return Err(Error::DimensionMismatch {
                left: map_a.dims(),
                right: map_b.dims(),
            });
        }
        if !(map_a.sum() > 0.0) || !(map_b.sum() > 0.0) {
            self.skips.zero_mass_frames += 1;
            return Ok(0);
        }
        let mut used = 0;
        for det in detections {
            if det.confidence < self.min_confidence {
                self.skips.low_confidence += 1;
                continue;
            }
            let diff = match (emphasis_proportion(map_a, &det.bbox), emphasis_proportion(map_b, &det.bbox)) {
                (Ok(pa), Ok(pb)) => pa - pb,
                (Err(Error::EmptyBox), _) | (_, Err(Error::EmptyBox)) => {
                    self.skips.empty_box += 1;
                    continue;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let entry = self.sums.entry(det.class_name.clone()).or_insert((0.0, 0));
            entry.0 += diff;
            entry.1 += 1;
            used += 1;
        }
        Ok(used)
    }

    pub fn skips(&self) -> EmphasisSkips {
        self.skips
    }

    pub fn finish(self) -> EmphasisReport {
        let mut classes: Vec<ClassEmphasisDiff> = self
            .sums
            .into_iter()
            .map(|(class_name, (sum, n))| ClassEmphasisDiff {
                class_name,
                mean_diff: sum / n as f64,
                n_observations: n,
            })
            .collect();
        classes.sort_by(|a, b| {
            b.mean_diff
                .total_cmp(&a.mean_diff)
                .then_with(|| a.class_name.cmp(&b.class_name))
        });
        EmphasisReport {
            classes,
            skips: self.skips,
        }
    }
}

/// Mean per-class emphasis difference (A minus B) over every detection of every frame.
///
/// `maps_a` and `maps_b` must cover the same frames; detections may cover a subset.
pub fn class_emphasis_diff(
    maps_a: &BTreeMap<String, Heatmap>,
    maps_b: &BTreeMap<String, Heatmap>,
    detections: &BTreeMap<String, Vec<Detection>>,
    min_confidence: f64,
) -> Result<EmphasisReport> {
    if maps_a.len() != maps_b.len() || maps_a.keys().zip(maps_b.keys()).any(|(a, b)| a != b) {
        let missing = maps_a
            .keys()
            .find(|k| !maps_b.contains_key(*k))
            .or_else(|| maps_b.keys().find(|k| !maps_a.contains_key(*k)));
        return Err(Error::FrameSetMismatch(alloc::format!(
            "frame {} present in only one map set",
            missing.map(String::as_str).unwrap_or("?")
        )));
    }
    if let Some(extra) = detections.keys().find(|k| !maps_a.contains_key(*k)) {
        return Err(Error::FrameSetMismatch(alloc::format!(
            "detections reference unknown frame {extra}"
        )));
    }
    let mut acc = EmphasisAccumulator::new(min_confidence);
    for (frame, dets) in detections {
        acc.add_frame(&maps_a[frame], &maps_b[frame], dets)?;
    }
    Ok(acc.finish())
}

/// Where `driving` emphasises more than `imagenet`.
///
/// Both maps are max-normalized, clipped to `[0, 100]`, subtracted
/// (`driving - imagenet`) and negatives set to zero.
pub fn emergent_feature_map(driving: &Heatmap, imagenet: &Heatmap) -> Result<Heatmap> {
    if driving.dims() != imagenet.dims() {
        return Err(Error::DimensionMismatch {
            left: driving.dims(),
            right: imagenet.dims(),
        });
    }
    let d = driving.normalize_max()?.clip(0.0, EMERGENT_CLIP_MAX)?;
    let i = imagenet.normalize_max()?.clip(0.0, EMERGENT_CLIP_MAX)?;
    d.subtract(&i)?.clamp_negative()
}
