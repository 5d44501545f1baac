//! `scenewatch-manifest/1` files: the mask list for one scene.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, SegmentMask};

pub const MANIFEST_SCHEMA: &str = "scenewatch-manifest/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<SegmentMask>,
}

#[derive(Serialize, Deserialize)]
struct WireManifest {
    schema: String,
    image: String,
    width: usize,
    height: usize,
    segments: Vec<WireSegment>,
}

#[derive(Serialize, Deserialize)]
struct WireSegment {
    id: String,
    bbox: [usize; 4],
    area: usize,
    center: [f64; 2],
    rle: Vec<u32>,
}

impl Manifest {
    pub fn new(image: impl Into<String>, width: usize, height: usize, segments: Vec<SegmentMask>) -> Self {
        Self { image: image.into(), width, height, segments }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireManifest = serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
        if wire.schema != MANIFEST_SCHEMA {
            return Err(Error::schema("schema", format!("expected `{MANIFEST_SCHEMA}`, found `{}`", wire.schema)));
        }
        if wire.width == 0 || wire.height == 0 {
            return Err(Error::schema("width", "dimensions must be positive"));
        }
        let mut seen = HashSet::new();
        let mut segments = Vec::with_capacity(wire.segments.len());
        for (i, s) in wire.segments.into_iter().enumerate() {
            if !seen.insert(s.id.clone()) {
                return Err(Error::schema(format!("segments[{i}].id"), format!("duplicate segment id `{}`", s.id)));
            }
            let total: usize = s.rle.iter().map(|&r| r as usize).sum();
            if total != wire.width * wire.height {
                return Err(Error::schema(
                    format!("segments[{i}].rle"),
                    format!("runs sum to {total}, expected {}", wire.width * wire.height),
                ));
            }
            if s.area == 0 {
                return Err(Error::schema(format!("segments[{i}].area"), "area must be at least 1"));
            }
            let bbox = BBox { x: s.bbox[0], y: s.bbox[1], w: s.bbox[2], h: s.bbox[3] };
            if !bbox.contains(s.center[0], s.center[1]) {
                return Err(Error::schema(format!("segments[{i}].center"), "centre lies outside the bbox"));
            }
            let mask = SegmentMask {
                id: s.id,
                width: wire.width,
                height: wire.height,
                rle: s.rle,
                center: bbox.center(),
                bbox,
                area: s.area,
            };
            mask.validate().map_err(|e| match e {
                Error::ManifestSchemaError { message, .. } => {
                    Error::schema(format!("segments[{i}]"), message)
                }
                other => other,
            })?;
            segments.push(mask);
        }
        Ok(Self { image: wire.image, width: wire.width, height: wire.height, segments })
    }

    pub fn to_json(&self) -> String {
        let wire = WireManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            image: self.image.clone(),
            width: self.width,
            height: self.height,
            segments: self
                .segments
                .iter()
                .map(|m| WireSegment {
                    id: m.id.clone(),
                    bbox: [m.bbox.x, m.bbox.y, m.bbox.w, m.bbox.h],
                    area: m.area,
                    center: [m.center.0, m.center.1],
                    rle: m.rle.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&wire).expect("manifest serializes")
    }

    pub fn segment(&self, id: &str) -> Option<&SegmentMask> {
        self.segments.iter().find(|m| m.id == id)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::ManifestNotFound(path.to_path_buf())),
        Err(e) => return Err(Error::io(path, e)),
    };
    Manifest::from_json(&text)
}

/// Writes the manifest atomically.
pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_atomic(path, manifest.to_json().as_bytes())
}

/// Replaces `path` by writing a temp file in the same directory and renaming
/// it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        let a = SegmentMask::from_pixels("s0", 8, 8, &[(1, 1), (2, 1), (1, 2)]).unwrap();
        let b = SegmentMask::from_pixels("s1", 8, 8, &[(6, 6)]).unwrap();
        Manifest::new("scenes/q.png", 8, 8, vec![a, b])
    }

    #[test]
    fn save_then_load_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = sample();
        save_manifest(&path, &m).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), m);
        let first = std::fs::read(&path).unwrap();
        save_manifest(&path, &load_manifest(&path).unwrap()).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn missing_file_is_not_found() {
        assert!(matches!(load_manifest(Path::new("/nonexistent/x.json")), Err(Error::ManifestNotFound(_))));
    }

    #[test]
    fn run_sum_violation_is_schema_error() {
        let text = r#"{"schema":"scenewatch-manifest/1","image":"a.png","width":2,"height":2,
            "segments":[{"id":"s0","bbox":[0,0,1,1],"area":1,"center":[0,0],"rle":[0,1,4]}]}"#;
        let err = Manifest::from_json(text).unwrap_err();
        assert!(matches!(&err, Error::ManifestSchemaError { field, .. } if field == "segments[0].rle"), "{err}");
    }

    #[test]
    fn duplicate_ids_are_schema_error() {
        let text = r#"{"schema":"scenewatch-manifest/1","image":"a.png","width":2,"height":1,
            "segments":[{"id":"s0","bbox":[0,0,1,1],"area":1,"center":[0,0],"rle":[0,1,1]},
                        {"id":"s0","bbox":[1,0,1,1],"area":1,"center":[1,0],"rle":[1,1]}]}"#;
        let err = Manifest::from_json(text).unwrap_err();
        assert!(matches!(&err, Error::ManifestSchemaError { field, .. } if field == "segments[1].id"), "{err}");
    }

    #[test]
    fn wrong_schema_and_bad_bbox() {
        let text = r#"{"schema":"other/1","image":"a.png","width":1,"height":1,"segments":[]}"#;
        assert!(matches!(Manifest::from_json(text), Err(Error::ManifestSchemaError { .. })));
        let text = r#"{"schema":"scenewatch-manifest/1","image":"a.png","width":2,"height":1,
            "segments":[{"id":"s0","bbox":[0,0,2,1],"area":1,"center":[0,0],"rle":[0,1,1]}]}"#;
        assert!(matches!(Manifest::from_json(text), Err(Error::ManifestSchemaError { .. })));
        assert!(matches!(Manifest::from_json("{\"schema\":"), Err(Error::ManifestSchemaError { .. })));
    }
}
