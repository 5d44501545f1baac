//! End-to-end scene-pair processing: register, segment, featurize,
//! classify and report.

mod overlay;
mod synth;
mod training;

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classifier::GbdtModel;
use crate::error::{Error, Result};
use crate::features::{extract_features_with, FeatureVector};
use crate::image::{to_grayscale, working_size, GrayImage, RgbImage};
use crate::mask::{BBox, SegmentMask};
use crate::registration::{estimate_flow, FlowField, FlowParams};
use crate::scene::{Label, Scene};
use crate::segmentation::{segment_all, Prompter, SceneRef, SegmentationBackend};

pub use overlay::{render_overlay, OVERLAY_ALPHA, OVERLAY_COLOR};
pub use synth::{synth_generate, Range, SynthConfig, SynthPair};
pub use training::{build_training_set, match_segments, LabeledPair, TrainingRow, TrainingSet, MATCH_IOU};

pub const REPORT_SCHEMA: &str = "scenewatch-report/1";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A scene decoded at working resolution.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: Scene,
    pub path: std::path::PathBuf,
    pub rgb: RgbImage,
    pub gray: GrayImage,
    /// Working size over original size.
    pub scale: f64,
}

impl LoadedScene {
    /// Decodes `scene.image_path`, resolved against `root` when relative.
    pub fn load(scene: &Scene, root: &Path) -> Result<Self> {
        let path = root.join(&scene.image_path);
        let rgb = RgbImage::open(&path)?;
        Ok(Self::from_rgb(scene.clone(), path, rgb))
    }

    pub fn from_rgb(scene: Scene, path: std::path::PathBuf, rgb: RgbImage) -> Self {
        let (w, h, scale) = working_size(rgb.width(), rgb.height());
        let rgb = if scale < 1.0 { rgb.resize_bilinear(w, h) } else { rgb };
        let gray = to_grayscale(&rgb);
        Self { scene, path, rgb, gray, scale }
    }

    pub fn as_ref(&self) -> SceneRef<'_> {
        SceneRef { id: &self.scene.id, image_path: &self.path, gray: &self.gray, scale: self.scale }
    }
}

/// Flow, query segmentation and per-segment features for one pair.
#[derive(Debug, Clone)]
pub struct PairAnalysis {
    pub flow: FlowField,
    pub segments: Vec<(SegmentMask, FeatureVector)>,
}

pub fn analyze_pair(
    reference: &LoadedScene,
    query: &LoadedScene,
    backend: &SegmentationBackend,
    params: &FlowParams,
) -> Result<PairAnalysis> {
    let flow = estimate_flow(&query.gray, &reference.gray, params)?;
    let masks = segment_all(backend, &query.as_ref())?;
    let prompter = Prompter::new(backend, reference.as_ref());
    let segments = masks
        .into_iter()
        .map(|m| {
            let fv = extract_features_with(&query.gray, &reference.gray, &m, &flow, &prompter)?;
            Ok((m, fv))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairAnalysis { flow, segments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub segment_id: String,
    pub features: FeatureVector,
    pub probability: f64,
    pub decision: Label,
    pub low_confidence: bool,
    pub bbox: [usize; 4],
    pub area: usize,
    pub rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub schema: String,
    pub query_scene_id: String,
    pub reference_scene_id: String,
    /// The query's capture time, so reports are reproducible.
    pub created_at: DateTime<Utc>,
    pub working_scale: f64,
    pub width: usize,
    pub height: usize,
    pub threshold: f64,
    pub entries: Vec<ReportEntry>,
}

impl AnomalyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::ReportMismatch(format!("expected schema `{REPORT_SCHEMA}`, found `{}`", report.schema)));
        }
        Ok(report)
    }

    pub fn anomalies(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.decision == Label::Anomaly)
    }

    /// Masks rebuilt from the embedded geometry.
    pub fn masks(&self) -> Vec<SegmentMask> {
        self.entries
            .iter()
            .map(|e| {
                let bbox = BBox { x: e.bbox[0], y: e.bbox[1], w: e.bbox[2], h: e.bbox[3] };
                SegmentMask {
                    id: e.segment_id.clone(),
                    width: self.width,
                    height: self.height,
                    rle: e.rle.clone(),
                    center: bbox.center(),
                    bbox,
                    area: e.area,
                }
            })
            .collect()
    }
}

pub fn decide(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Anomaly
    } else {
        Label::Normal
    }
}

/// Scores every query segment. Pure in its inputs: identical inputs give
/// byte-identical report JSON.
pub fn detect(
    reference: &LoadedScene,
    query: &LoadedScene,
    backend: &SegmentationBackend,
    model: &GbdtModel,
    threshold: f64,
    params: &FlowParams,
) -> Result<AnomalyReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidHyperparams(format!("threshold {threshold} is outside [0, 1]")));
    }
    if model.n_features != crate::features::FEATURE_COUNT {
        return Err(Error::ModelSchemaError(format!("model expects {} features", model.n_features)));
    }
    let analysis = analyze_pair(reference, query, backend, params)?;
    let entries = analysis
        .segments
        .into_iter()
        .map(|(m, fv)| {
            let probability = model.predict_features(&fv);
            ReportEntry {
                segment_id: m.id,
                features: fv,
                probability,
                decision: decide(probability, threshold),
                low_confidence: fv.low_confidence,
                bbox: [m.bbox.x, m.bbox.y, m.bbox.w, m.bbox.h],
                area: m.area,
                rle: m.rle,
            }
        })
        .collect();
    Ok(AnomalyReport {
        schema: REPORT_SCHEMA.into(),
        query_scene_id: query.scene.id.clone(),
        reference_scene_id: reference.scene.id.clone(),
        created_at: query.scene.captured_at,
        working_scale: query.scale,
        width: query.gray.width(),
        height: query.gray.height(),
        threshold,
        entries,
    })
}
