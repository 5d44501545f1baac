#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use scenewatch_core::manifest::{load_manifest, save_manifest, Manifest};
use scenewatch_core::segmentation::{segment_all, segment_at, SceneRef, SegmentationBackend, SidecarConfig};
use scenewatch_core::{Error, GrayImage, SegmentMask};

/// A sidecar that records its argv and copies `$CANNED` to `--out`.
const SCRIPT: &str = r#"#!/bin/sh
log="$(dirname "$0")/argv.txt"
: > "$log"
out=""
points=""
while [ $# -gt 0 ]; do
  echo "$1" >> "$log"
  case "$1" in
    --out) out="$2"; echo "$2" >> "$log"; shift ;;
    --points) points="$2"; echo "$2" >> "$log"; cp "$2" "$(dirname "$0")/points.json"; shift ;;
    --image) echo "$2" >> "$log"; shift ;;
  esac
  shift
done
case "$MODE" in
  fail) echo "checkpoint missing" >&2; exit 3 ;;
  silent) exit 0 ;;
esac
cp "$CANNED" "$out"
"#;

fn setup(mode: &str, canned: &str) -> (tempfile::TempDir, SidecarConfig) {
    let dir = tempfile::tempdir().unwrap();
    let canned_path = dir.path().join("canned.json");
    std::fs::write(&canned_path, canned).unwrap();
    let script = dir.path().join("sidecar.sh");
    std::fs::write(&script, SCRIPT).unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let cfg = SidecarConfig {
        command: "/usr/bin/env".into(),
        args: vec![format!("MODE={mode}"), format!("CANNED={}", canned_path.display()), script.display().to_string()],
    };
    (dir, cfg)
}

fn square(id: &str, x0: usize, y0: usize, side: usize) -> SegmentMask {
    let px: Vec<(usize, usize)> = (y0..y0 + side).flat_map(|y| (x0..x0 + side).map(move |x| (x, y))).collect();
    SegmentMask::from_pixels(id, 32, 32, &px).unwrap()
}

fn canned_manifest() -> String {
    Manifest::new("scene.png", 32, 32, vec![square("s0", 4, 4, 8), square("s1", 18, 18, 10)]).to_json()
}

fn argv(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("argv.txt")).unwrap().lines().map(String::from).collect()
}

#[test]
fn auto_mode_manifest_is_validated_and_used() {
    let (dir, cfg) = setup("ok", &canned_manifest());
    let img = GrayImage::constant(32, 32, 0.0);
    let image_path = PathBuf::from("/data/scene.png");
    let scene = SceneRef::new("scene", &image_path, &img);
    let masks = segment_all(&SegmentationBackend::Sidecar(cfg), &scene).unwrap();
    assert_eq!(masks.len(), 2);
    assert_eq!(masks[1].area, 100);
    let args = argv(dir.path());
    let pos = |flag: &str| args.iter().position(|a| a == flag).unwrap();
    assert_eq!(args[pos("--image") + 1], "/data/scene.png");
    assert!(args[pos("--out") + 1].ends_with("scene.json"));
    assert!(!args.iter().any(|a| a == "--points"));
}

#[test]
fn points_mode_sends_the_prompt() {
    let one = Manifest::new("scene.png", 32, 32, vec![square("p0", 18, 18, 10)]).to_json();
    let (dir, cfg) = setup("ok", &one);
    let img = GrayImage::constant(32, 32, 0.0);
    let image_path = PathBuf::from("scene.png");
    let scene = SceneRef::new("scene", &image_path, &img);
    let hit = segment_at(&SegmentationBackend::Sidecar(cfg), &scene, (20.0, 21.0)).unwrap().unwrap();
    assert!(hit.contains(20, 21));
    let points: Vec<[f64; 2]> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("points.json")).unwrap()).unwrap();
    assert_eq!(points, vec![[20.0, 21.0]]);
}

#[test]
fn points_are_sent_in_file_coordinates() {
    let one = Manifest::new("scene.png", 64, 64, vec![]).to_json();
    let (dir, cfg) = setup("ok", &one);
    let img = GrayImage::constant(32, 32, 0.0);
    let image_path = PathBuf::from("scene.png");
    let scene = SceneRef { scale: 0.5, ..SceneRef::new("scene", &image_path, &img) };
    assert_eq!(segment_at(&SegmentationBackend::Sidecar(cfg), &scene, (10.0, 3.0)).unwrap(), None);
    let points: Vec<[f64; 2]> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("points.json")).unwrap()).unwrap();
    assert_eq!(points, vec![[20.0, 6.0]]);
}

#[test]
fn failures_surface_as_errors() {
    let img = GrayImage::constant(32, 32, 0.0);
    let image_path = PathBuf::from("scene.png");
    let scene = SceneRef::new("scene", &image_path, &img);

    let (_d, cfg) = setup("fail", &canned_manifest());
    match segment_all(&SegmentationBackend::Sidecar(cfg), &scene) {
        Err(Error::BackendUnavailable(msg)) => assert!(msg.contains("checkpoint missing"), "{msg}"),
        other => panic!("{other:?}"),
    }

    let (_d, cfg) = setup("silent", &canned_manifest());
    assert!(matches!(segment_all(&SegmentationBackend::Sidecar(cfg), &scene), Err(Error::BackendUnavailable(_))));

    let bad = canned_manifest().replacen("\"area\":64", "\"area\":65", 1);
    let (_d, cfg) = setup("ok", &bad);
    assert!(matches!(segment_all(&SegmentationBackend::Sidecar(cfg), &scene), Err(Error::ManifestSchemaError { .. })));

    let cfg = SidecarConfig { command: "/nonexistent/sidecar".into(), args: vec![] };
    assert!(matches!(segment_all(&SegmentationBackend::Sidecar(cfg), &scene), Err(Error::BackendUnavailable(_))));
}

#[test]
fn manifest_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let m = Manifest::from_json(&canned_manifest()).unwrap();
    save_manifest(&path, &m).unwrap();
    assert_eq!(load_manifest(&path).unwrap(), m);
    assert!(matches!(load_manifest(&dir.path().join("absent.json")), Err(Error::ManifestNotFound(_))));
}
