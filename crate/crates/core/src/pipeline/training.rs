use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{extract_features_with, FeatureVector};
use crate::manifest::load_manifest;
use crate::mask::SegmentMask;
use crate::registration::{estimate_flow, FlowParams};
use crate::scene::{Label, LabelsFile};
use crate::segmentation::{segment_all, Prompter, SegmentationBackend};

use super::LoadedScene;

/// Minimum IoU for carrying a manifest label over to a segment produced by a
/// different backend.
pub const MATCH_IOU: f64 = 0.5;

/// A registered pair and the labels of its query scene.
#[derive(Debug, Clone, Copy)]
pub struct LabeledPair<'a> {
    pub reference: &'a LoadedScene,
    pub query: &'a LoadedScene,
    pub labels: &'a LabelsFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub scene_id: String,
    pub reference_id: String,
    /// Manifest id the label was given to.
    pub segment_id: String,
    /// Id of the backend segment whose features were extracted.
    pub matched_id: String,
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<TrainingRow>,
    /// Labeled `(scene, segment)` ids that no backend segment matched.
    pub unmatched: Vec<(String, String)>,
}

impl TrainingSet {
    pub fn features(&self) -> Vec<[f64; crate::features::FEATURE_COUNT]> {
        self.rows.iter().map(|r| r.features.as_array()).collect()
    }

    pub fn targets(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label.as_target()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

fn iou(a: &SegmentMask, abits: &[bool], b: &SegmentMask) -> f64 {
    let (ab, bb) = (a.bbox, b.bbox);
    if ab.x >= bb.x + bb.w || bb.x >= ab.x + ab.w || ab.y >= bb.y + bb.h || bb.y >= ab.y + ab.h {
        return 0.0;
    }
    let inter = b.pixels().into_iter().filter(|&(x, y)| abits[y * a.width + x]).count();
    inter as f64 / (a.area + b.area - inter) as f64
}

/// For each target, the index and IoU of the best-overlapping candidate with
/// IoU at least [`MATCH_IOU`]; ties go to the lower index.
pub fn match_segments(targets: &[SegmentMask], candidates: &[SegmentMask]) -> Result<Vec<Option<(usize, f64)>>> {
    targets
        .iter()
        .map(|t| {
            let bits = t.decode()?;
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in candidates.iter().enumerate() {
                if c.width != t.width || c.height != t.height {
                    return Err(Error::DimensionMismatch(c.width, c.height, t.width, t.height));
                }
                let score = iou(t, &bits, c);
                if score >= MATCH_IOU && best.is_none_or(|(_, s)| score > s) {
                    best = Some((i, score));
                }
            }
            Ok(best)
        })
        .collect()
}

fn pair_rows(pair: &LabeledPair<'_>, manifests: &Path, backend: &SegmentationBackend, params: &FlowParams) -> Result<TrainingSet> {
    let LabeledPair { reference, query, labels } = *pair;
    if labels.scene_id != query.scene.id {
        return Err(Error::UnknownScene(format!("labels for `{}` paired with `{}`", labels.scene_id, query.scene.id)));
    }
    let manifest = load_manifest(&manifests.join(format!("{}.json", query.scene.id))).map_err(|e| match e {
        Error::ManifestNotFound(_) => Error::MissingManifest(query.scene.id.clone()),
        other => other,
    })?;
    let (w, h) = (query.gray.width(), query.gray.height());
    let mut targets = Vec::with_capacity(labels.labels.len());
    for rec in &labels.labels {
        let seg = manifest.segment(&rec.segment_id).ok_or_else(|| Error::DanglingLabel {
            scene_id: labels.scene_id.clone(),
            segment_id: rec.segment_id.clone(),
        })?;
        targets.push(seg.resample(w, h));
    }
    if labels.labels.is_empty() {
        return Ok(TrainingSet::default());
    }

    let flow = estimate_flow(&query.gray, &reference.gray, params)?;
    let prompter = Prompter::new(backend, reference.as_ref());
    let candidates: Vec<Option<SegmentMask>> = match backend {
        SegmentationBackend::Manifest { .. } => targets,
        _ => {
            let found = segment_all(backend, &query.as_ref())?;
            let present: Vec<SegmentMask> = targets.iter().flatten().cloned().collect();
            let mut matches = match_segments(&present, &found)?.into_iter();
            targets
                .iter()
                .map(|t| t.as_ref().and_then(|_| matches.next().flatten()).map(|(i, _)| found[i].clone()))
                .collect()
        }
    };

    let mut set = TrainingSet::default();
    for (rec, cand) in labels.labels.iter().zip(candidates) {
        let Some(mask) = cand else {
            set.unmatched.push((labels.scene_id.clone(), rec.segment_id.clone()));
            continue;
        };
        let features = extract_features_with(&query.gray, &reference.gray, &mask, &flow, &prompter)?;
        set.rows.push(TrainingRow {
            scene_id: labels.scene_id.clone(),
            reference_id: reference.scene.id.clone(),
            segment_id: rec.segment_id.clone(),
            matched_id: mask.id,
            features,
            label: rec.label,
        });
    }
    Ok(set)
}

/// One row per labeled segment, featurized the same way as detection.
///
/// Labels are keyed by the ids in each query scene's manifest under
/// `manifests`. With the manifest backend those masks are used directly;
/// other backends segment the query and each label moves to the segment it
/// overlaps with IoU of at least [`MATCH_IOU`]. Pairs run concurrently.
pub fn build_training_set(
    pairs: &[LabeledPair<'_>],
    manifests: &Path,
    backend: &SegmentationBackend,
    params: &FlowParams,
) -> Result<TrainingSet> {
    let results: Vec<Result<TrainingSet>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            pairs.iter().map(|p| s.spawn(move || pair_rows(p, manifests, backend, params))).collect();
        handles.into_iter().map(|h| h.join().expect("pair worker panicked")).collect()
    });
    let mut out = TrainingSet::default();
    for r in results {
        let set = r?;
        out.rows.extend(set.rows);
        out.unmatched.extend(set.unmatched);
    }
    Ok(out)
}
