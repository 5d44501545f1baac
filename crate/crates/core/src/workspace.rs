//! On-disk workspace: `workspace.json` plus the `scenes/`, `manifests/`,
//! `labels/`, `models/` and `reports/` directories.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{load_manifest, save_manifest, write_atomic, Manifest};
use crate::pipeline::{synth_generate, AnomalyReport, LoadedScene, SynthConfig};
use crate::scene::{load_labels, save_labels, LabelsFile, Scene};
use crate::segmentation::{BuiltinConfig, SegmentationBackend};

pub const WORKSPACE_SCHEMA: &str = "scenewatch-workspace/1";
pub const WORKSPACE_FILE: &str = "workspace.json";
pub const SUBDIRS: [&str; 5] = ["scenes", "manifests", "labels", "models", "reports"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDef {
    pub id: String,
    pub reference: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub schema: String,
    pub scenes: Vec<Scene>,
    pub pairs: Vec<PairDef>,
    pub backend: SegmentationBackend,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            schema: WORKSPACE_SCHEMA.into(),
            scenes: Vec::new(),
            pairs: Vec::new(),
            backend: SegmentationBackend::Builtin(BuiltinConfig::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    pub config: WorkspaceConfig,
}

fn ws_err(msg: impl Into<String>) -> Error {
    Error::Workspace(msg.into())
}

impl Workspace {
    /// Creates the directory layout and writes `config`.
    pub fn create(root: &Path, config: WorkspaceConfig) -> Result<Self> {
        for d in SUBDIRS {
            let p = root.join(d);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let ws = Self { root: root.to_path_buf(), config };
        ws.save()?;
        Ok(ws)
    }

    /// Loads and checks `workspace.json`: unique ids, pairs naming registered
    /// scenes, and scene images present.
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(WORKSPACE_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ws_err(format!("no {WORKSPACE_FILE} in {}", root.display())))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let config: WorkspaceConfig =
            serde_json::from_str(&text).map_err(|e| ws_err(format!("{WORKSPACE_FILE}: {e}")))?;
        if config.schema != WORKSPACE_SCHEMA {
            return Err(ws_err(format!("expected schema `{WORKSPACE_SCHEMA}`, found `{}`", config.schema)));
        }
        let ws = Self { root: root.to_path_buf(), config };
        ws.check()?;
        Ok(ws)
    }

    fn check(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for s in &self.config.scenes {
            if !ids.insert(s.id.as_str()) {
                return Err(ws_err(format!("duplicate scene id `{}`", s.id)));
            }
            let p = self.root.join(&s.image_path);
            if !p.is_file() {
                return Err(ws_err(format!("scene `{}` image {} does not exist", s.id, p.display())));
            }
        }
        let mut pair_ids = HashSet::new();
        for p in &self.config.pairs {
            if !pair_ids.insert(p.id.as_str()) {
                return Err(ws_err(format!("duplicate pair id `{}`", p.id)));
            }
            for s in [&p.reference, &p.query] {
                if !ids.contains(s.as_str()) {
                    return Err(ws_err(format!("pair `{}` names unregistered scene `{s}`", p.id)));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.config)?;
        text.push('\n');
        write_atomic(&self.root.join(WORKSPACE_FILE), text.as_bytes())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scene(&self, id: &str) -> Result<&Scene> {
        self.config.scenes.iter().find(|s| s.id == id).ok_or_else(|| Error::UnknownScene(id.into()))
    }

    pub fn pair(&self, id: &str) -> Option<&PairDef> {
        self.config.pairs.iter().find(|p| p.id == id)
    }

    pub fn pair_for_query(&self, query: &str) -> Option<&PairDef> {
        self.config.pairs.iter().find(|p| p.query == query)
    }

    pub fn load_scene(&self, id: &str) -> Result<LoadedScene> {
        LoadedScene::load(self.scene(id)?, &self.root)
    }

    /// The configured backend with relative manifest directories resolved
    /// against the root.
    pub fn backend(&self) -> SegmentationBackend {
        match &self.config.backend {
            SegmentationBackend::Manifest { dir } => SegmentationBackend::Manifest { dir: self.root.join(dir) },
            other => other.clone(),
        }
    }

    pub fn manifests_dir(&self) -> PathBuf {
        self.root.join("manifests")
    }

    pub fn manifest_path(&self, scene_id: &str) -> PathBuf {
        self.manifests_dir().join(format!("{scene_id}.json"))
    }

    pub fn labels_path(&self, scene_id: &str) -> PathBuf {
        self.root.join("labels").join(format!("{scene_id}.json"))
    }

    pub fn report_path(&self, pair_id: &str) -> PathBuf {
        self.root.join("reports").join(format!("{pair_id}.json"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn manifest(&self, scene_id: &str) -> Result<Manifest> {
        self.scene(scene_id)?;
        load_manifest(&self.manifest_path(scene_id))
    }

    /// Labels for a query scene, or `None` when none were saved yet.
    pub fn labels(&self, scene_id: &str) -> Result<Option<LabelsFile>> {
        let p = self.labels_path(scene_id);
        if !p.exists() {
            return Ok(None);
        }
        load_labels(&p).map(Some)
    }

    pub fn save_labels(&self, labels: &LabelsFile) -> Result<()> {
        save_labels(&self.labels_path(&labels.scene_id), labels)
    }

    pub fn report(&self, pair_id: &str) -> Result<Option<AnomalyReport>> {
        let p = self.report_path(pair_id);
        if !p.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        AnomalyReport::from_json(&text).map(Some)
    }

    pub fn save_report(&self, pair_id: &str, report: &AnomalyReport) -> Result<()> {
        write_atomic(&self.report_path(pair_id), report.to_json().as_bytes())
    }
}

/// Writes a synthetic benchmark of `n_pairs` pairs into `root`: images,
/// construction manifests for every scene, ground-truth labels for each
/// query, and a registry using the builtin backend.
pub fn synth_workspace(root: &Path, cfg: &SynthConfig, n_pairs: usize) -> Result<Workspace> {
    let mut config = WorkspaceConfig::default();
    let ws = Workspace::create(root, config.clone())?;
    for i in 0..n_pairs {
        let pair = synth_generate(cfg, i as u64)?;
        pair.reference_image.save_png(&root.join(&pair.reference.image_path))?;
        pair.query_image.save_png(&root.join(&pair.query.image_path))?;
        save_manifest(&ws.manifest_path(&pair.reference.id), &pair.reference_manifest)?;
        save_manifest(&ws.manifest_path(&pair.query.id), &pair.query_manifest)?;
        ws.save_labels(&pair.labels)?;
        config.pairs.push(PairDef {
            id: format!("p{i:02}"),
            reference: pair.reference.id.clone(),
            query: pair.query.id.clone(),
        });
        config.scenes.push(pair.reference);
        config.scenes.push(pair.query);
    }
    let ws = Workspace { root: root.to_path_buf(), config };
    ws.save()?;
    Ok(ws)
}
