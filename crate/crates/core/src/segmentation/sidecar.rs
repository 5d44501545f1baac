//! External segmenter invoked as
//! `<command> [args..] --image <path> --out <manifest> [--points <file>]`.
//! Prompt points are written in the coordinates of the image file.

use std::process::Command;

use serde::{Deserialize, Serialize};

use super::SceneRef;
use crate::error::{Error, Result};
use crate::manifest::{load_manifest, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

pub(crate) fn run(cfg: &SidecarConfig, scene: &SceneRef<'_>, points: Option<&[(f64, f64)]>) -> Result<Manifest> {
    let dir = tempfile::tempdir().map_err(|e| Error::BackendUnavailable(format!("temp dir: {e}")))?;
    let out = dir.path().join(format!("{}.json", scene.id));
    let mut cmd = Command::new(&cfg.command);
    cmd.args(&cfg.args).arg("--image").arg(scene.image_path).arg("--out").arg(&out);
    if let Some(points) = points {
        let file = dir.path().join("points.json");
        let list: Vec<[f64; 2]> = points.iter().map(|&(x, y)| [x / scene.scale, y / scene.scale]).collect();
        std::fs::write(&file, serde_json::to_vec(&list)?).map_err(|e| Error::io(&file, e))?;
        cmd.arg("--points").arg(&file);
    }
    let output = cmd
        .output()
        .map_err(|e| Error::BackendUnavailable(format!("cannot run `{}`: {e}", cfg.command)))?;
    if !output.status.success() {
        return Err(Error::BackendUnavailable(format!(
            "`{}` exited with {}: {}",
            cfg.command,
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    match load_manifest(&out) {
        Err(Error::ManifestNotFound(_)) => {
            Err(Error::BackendUnavailable(format!("`{}` exited 0 but wrote no manifest", cfg.command)))
        }
        other => other,
    }
}
