//! Scenes, labels and the `scenewatch-labels/1` file.

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::write_atomic;

pub const LABELS_SCHEMA: &str = "scenewatch-labels/1";

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneRole {
    Reference,
    Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub image_path: String,
    pub captured_at: Timestamp,
    pub role: SceneRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Anomaly,
    Normal,
}

impl Label {
    pub fn as_target(self) -> u8 {
        match self {
            Label::Anomaly => 1,
            Label::Normal => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Anomaly => "anomaly",
            Label::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub segment_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_at: Option<Timestamp>,
}

impl LabelRecord {
    pub fn new(segment_id: impl Into<String>, label: Label) -> Self {
        Self { segment_id: segment_id.into(), label, labeled_by: None, labeled_at: None }
    }
}

/// All labels for the segments of one query scene against its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelsFile {
    pub scene_id: String,
    pub reference_id: String,
    pub labels: Vec<LabelRecord>,
}

#[derive(Serialize, Deserialize)]
struct WireLabels {
    schema: String,
    scene_id: String,
    reference_id: String,
    labels: Vec<LabelRecord>,
}

impl LabelsFile {
    pub fn new(scene_id: impl Into<String>, reference_id: impl Into<String>) -> Self {
        Self { scene_id: scene_id.into(), reference_id: reference_id.into(), labels: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::LabelsSchemaError { field: "$".into(), message: e.to_string() })?;
        Self::from_value(value)
    }

    /// Parses a labels document, reporting the first offending field.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let field_err = |field: String, message: String| Error::LabelsSchemaError { field, message };
        let obj = value.as_object().ok_or_else(|| field_err("$".into(), "expected an object".into()))?;
        match obj.get("schema").and_then(|v| v.as_str()) {
            Some(LABELS_SCHEMA) => {}
            Some(other) => return Err(field_err("schema".into(), format!("expected `{LABELS_SCHEMA}`, found `{other}`"))),
            None => return Err(field_err("schema".into(), "missing string field".into())),
        }
        for key in ["scene_id", "reference_id"] {
            if !obj.get(key).is_some_and(|v| v.is_string()) {
                return Err(field_err(key.into(), "missing string field".into()));
            }
        }
        let labels = obj
            .get("labels")
            .and_then(|v| v.as_array())
            .ok_or_else(|| field_err("labels".into(), "missing array field".into()))?;
        for (i, l) in labels.iter().enumerate() {
            if !l.get("segment_id").is_some_and(|v| v.is_string()) {
                return Err(field_err(format!("labels[{i}].segment_id"), "missing string field".into()));
            }
            match l.get("label").and_then(|v| v.as_str()) {
                Some("anomaly") | Some("normal") => {}
                _ => return Err(field_err(format!("labels[{i}].label"), "expected \"anomaly\" or \"normal\"".into())),
            }
        }
        let wire: WireLabels =
            serde_json::from_value(value).map_err(|e| field_err("$".into(), e.to_string()))?;
        Ok(Self { scene_id: wire.scene_id, reference_id: wire.reference_id, labels: wire.labels })
    }

    pub fn to_json(&self) -> String {
        let wire = WireLabels {
            schema: LABELS_SCHEMA.into(),
            scene_id: self.scene_id.clone(),
            reference_id: self.reference_id.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_string_pretty(&wire).expect("labels serialize")
    }

    /// Last write wins per segment id; order of first appearance is kept.
    pub fn merge(&mut self, incoming: impl IntoIterator<Item = LabelRecord>) {
        for rec in incoming {
            match self.labels.iter_mut().find(|l| l.segment_id == rec.segment_id) {
                Some(slot) => *slot = rec,
                None => self.labels.push(rec),
            }
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| l.label == label).count()
    }
}

pub fn load_labels(path: &Path) -> Result<LabelsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabelsFile::from_json(&text)
}

pub fn save_labels(path: &Path, labels: &LabelsFile) -> Result<()> {
    write_atomic(path, labels.to_json().as_bytes())
}
