//! Whole-scene and point-prompted segmentation behind interchangeable
//! backends.

pub mod builtin;
pub mod sidecar;

use std::cell::OnceCell;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::manifest::load_manifest;
use crate::mask::SegmentMask;

pub use builtin::{BuiltinConfig, Threshold};
pub use sidecar::SidecarConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SegmentationBackend {
    Builtin(BuiltinConfig),
    /// Reads `<dir>/<scene id>.json`.
    Manifest { dir: PathBuf },
    Sidecar(SidecarConfig),
}

/// What a backend needs to know about a scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneRef<'a> {
    pub id: &'a str,
    pub image_path: &'a Path,
    /// Working-resolution grayscale; masks are returned on this grid.
    pub gray: &'a GrayImage,
    /// Working size over the size of the file at `image_path`.
    pub scale: f64,
}

impl<'a> SceneRef<'a> {
    /// A scene whose file is already at working resolution.
    pub fn new(id: &'a str, image_path: &'a Path, gray: &'a GrayImage) -> Self {
        Self { id, image_path, gray, scale: 1.0 }
    }
}

fn fit_to_scene(masks: Vec<SegmentMask>, scene: &SceneRef<'_>) -> Vec<SegmentMask> {
    let (w, h) = (scene.gray.width(), scene.gray.height());
    masks.into_iter().filter_map(|m| m.resample(w, h)).collect()
}

/// Automatic whole-scene segmentation. Masks may overlap.
pub fn segment_all(backend: &SegmentationBackend, scene: &SceneRef<'_>) -> Result<Vec<SegmentMask>> {
    match backend {
        SegmentationBackend::Builtin(cfg) => Ok(builtin::segment(scene.gray, cfg)),
        SegmentationBackend::Manifest { dir } => {
            let manifest = load_manifest(&dir.join(format!("{}.json", scene.id)))?;
            Ok(fit_to_scene(manifest.segments, scene))
        }
        SegmentationBackend::Sidecar(cfg) => {
            let manifest = sidecar::run(cfg, scene, None)?;
            Ok(fit_to_scene(manifest.segments, scene))
        }
    }
}

/// Point-prompted segmentation.
///
/// The builtin backend returns the kept component containing the pixel
/// under the point. Manifest backends return the smallest containing mask,
/// ties broken by id. The sidecar returns its mask for the prompt.
pub fn segment_at(
    backend: &SegmentationBackend,
    scene: &SceneRef<'_>,
    point: (f64, f64),
) -> Result<Option<SegmentMask>> {
    Prompter::new(backend, *scene).prompt(point)
}

/// Repeated point prompts against one scene. Builtin and manifest masks are
/// computed once and reused across prompts.
pub struct Prompter<'a> {
    backend: &'a SegmentationBackend,
    scene: SceneRef<'a>,
    masks: OnceCell<Vec<SegmentMask>>,
}

impl<'a> Prompter<'a> {
    pub fn new(backend: &'a SegmentationBackend, scene: SceneRef<'a>) -> Self {
        Self { backend, scene, masks: OnceCell::new() }
    }

    pub fn prompt(&self, point: (f64, f64)) -> Result<Option<SegmentMask>> {
        let (w, h) = (self.scene.gray.width(), self.scene.gray.height());
        let (x, y) = point;
        if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
            return Err(Error::PointOutOfBounds { x, y, width: w, height: h });
        }
        let (px, py) = (x.round() as usize, y.round() as usize);
        match self.backend {
            SegmentationBackend::Builtin(_) | SegmentationBackend::Manifest { .. } => {
                let masks = match self.masks.get() {
                    Some(m) => m,
                    None => {
                        let computed = segment_all(self.backend, &self.scene)?;
                        self.masks.get_or_init(|| computed)
                    }
                };
                Ok(smallest_containing(masks, px, py).cloned())
            }
            SegmentationBackend::Sidecar(cfg) => {
                let manifest = sidecar::run(cfg, &self.scene, Some(&[(x, y)]))?;
                Ok(fit_to_scene(manifest.segments, &self.scene).into_iter().next())
            }
        }
    }
}

fn smallest_containing(masks: &[SegmentMask], x: usize, y: usize) -> Option<&SegmentMask> {
    masks
        .iter()
        .filter(|m| m.contains(x, y))
        .min_by(|a, b| a.area.cmp(&b.area).then_with(|| a.id.cmp(&b.id)))
}
