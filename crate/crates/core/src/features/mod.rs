//! Per-segment change features computed on a registered scene pair.

mod cosine;
mod procrustes;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::SegmentMask;
use crate::registration::{map_point, sample_reference, FlowField};
use crate::scene::Label;
use crate::segmentation::{Prompter, SceneRef, SegmentationBackend};

pub use cosine::cosine_intensity_distance;
pub use procrustes::{procrustes_disparity, Disparity};

/// Upper bound on the number of points fed to the Procrustes fit.
pub const MAX_SHAPE_POINTS: usize = 2048;

/// Fraction of clamped correspondences above which a segment is flagged.
pub const LOW_CONFIDENCE_FRACTION: f64 = 0.2;

pub const FEATURE_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cosine: f64,
    pub disparity: f64,
    pub area_diff: f64,
    pub low_confidence: bool,
}

impl FeatureVector {
    pub fn new(cosine: f64, disparity: f64, area_diff: f64) -> Self {
        Self { cosine, disparity, area_diff, low_confidence: false }
    }

    /// Classifier input order: cosine, disparity, area_diff.
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [self.cosine, self.disparity, self.area_diff]
    }
}

/// Mask pixels in row-major order, stride-subsampled to at most
/// [`MAX_SHAPE_POINTS`], paired index-wise with their flow-displaced
/// positions.
pub fn segment_shape_points(
    mask: &SegmentMask,
    flow: &FlowField,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    if mask.width != flow.width || mask.height != flow.height {
        return Err(Error::DimensionMismatch(mask.width, mask.height, flow.width, flow.height));
    }
    let pixels = mask.pixels();
    let stride = pixels.len().div_ceil(MAX_SHAPE_POINTS).max(1);
    let original: Vec<(f64, f64)> = pixels.iter().step_by(stride).map(|&(x, y)| (x as f64, y as f64)).collect();
    let warped = pixels
        .iter()
        .step_by(stride)
        .map(|&(x, y)| {
            let (u, v) = flow.at(x, y);
            (x as f64 + u as f64, y as f64 + v as f64)
        })
        .collect();
    Ok((original, warped))
}

/// `|a_q - a_r| / max(a_q, a_r)`, or 1 when the reference prompt found
/// nothing.
pub fn area_signature_diff(area_q: usize, area_r: Option<usize>) -> f64 {
    match area_r {
        None => 1.0,
        Some(area_r) => {
            let max = area_q.max(area_r);
            if max == 0 {
                0.0
            } else {
                area_q.abs_diff(area_r) as f64 / max as f64
            }
        }
    }
}

pub fn extract_features(
    query: &GrayImage,
    reference: &SceneRef<'_>,
    mask: &SegmentMask,
    flow: &FlowField,
    backend: &SegmentationBackend,
) -> Result<FeatureVector> {
    extract_features_with(query, reference.gray, mask, flow, &Prompter::new(backend, *reference))
}

/// As [`extract_features`], prompting the reference through a shared
/// [`Prompter`].
pub fn extract_features_with(
    query: &GrayImage,
    refimg: &GrayImage,
    mask: &SegmentMask,
    flow: &FlowField,
    reference: &Prompter<'_>,
) -> Result<FeatureVector> {
    if !query.same_size(refimg) {
        return Err(Error::DimensionMismatch(query.width(), query.height(), refimg.width(), refimg.height()));
    }
    if mask.width != query.width() || mask.height != query.height() {
        return Err(Error::DimensionMismatch(mask.width, mask.height, query.width(), query.height()));
    }
    if flow.width != query.width() || flow.height != query.height() {
        return Err(Error::DimensionMismatch(flow.width, flow.height, query.width(), query.height()));
    }

    let pixels = mask.pixels();
    let query_vals: Vec<f64> = pixels.iter().map(|&(x, y)| query.get(x, y) as f64).collect();
    let mapped: Vec<(f64, f64)> = pixels
        .iter()
        .map(|&(x, y)| {
            let (u, v) = flow.at(x, y);
            (x as f64 + u as f64, y as f64 + v as f64)
        })
        .collect();
    let samples = sample_reference(refimg, &mapped);
    let clamped = samples.iter().filter(|(_, valid)| !valid).count();
    let ref_vals: Vec<f64> = samples.iter().map(|&(v, _)| v as f64).collect();
    let cosine = cosine_intensity_distance(&query_vals, &ref_vals)?;

    let (original, warped) = segment_shape_points(mask, flow)?;
    let disparity = procrustes_disparity(&original, &warped)?.value;

    let center = map_point(mask.center, flow)?;
    let ref_area = reference.prompt((center.x, center.y))?.map(|m| m.area);
    let area_diff = area_signature_diff(mask.area, ref_area);

    Ok(FeatureVector {
        cosine,
        disparity,
        area_diff,
        low_confidence: clamped as f64 > LOW_CONFIDENCE_FRACTION * pixels.len() as f64,
    })
}

/// One line of the feature export.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub scene_id: String,
    pub segment_id: String,
    pub features: FeatureVector,
    pub label: Option<Label>,
}

pub const CSV_HEADER: &str = "scene_id,segment_id,cosine,disparity,area_diff,low_confidence,label";

fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

pub fn write_features_csv<W: Write>(mut out: W, rows: &[FeatureRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let f = &r.features;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.scene_id),
            csv_field(&r.segment_id),
            f.cosine,
            f.disparity,
            f.area_diff,
            f.low_confidence,
            r.label.map(Label::as_str).unwrap_or("")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::BuiltinConfig;
    use std::path::Path;

    fn square_mask(x0: usize, y0: usize, side: usize, w: usize, h: usize) -> SegmentMask {
        let px: Vec<_> = (y0..y0 + side).flat_map(|y| (x0..x0 + side).map(move |x| (x, y))).collect();
        SegmentMask::from_pixels("s", w, h, &px).unwrap()
    }

    #[test]
    fn area_diff_examples() {
        assert_eq!(area_signature_diff(100, Some(100)), 0.0);
        assert_eq!(area_signature_diff(50, Some(100)), 0.5);
        assert_eq!(area_signature_diff(100, Some(50)), 0.5);
        assert_eq!(area_signature_diff(100, None), 1.0);
    }

    #[test]
    fn shape_points_under_zero_and_constant_flow() {
        let mask = square_mask(4, 4, 6, 20, 20);
        let (o, w) = segment_shape_points(&mask, &FlowField::zeros(20, 20)).unwrap();
        assert_eq!(o, w);
        assert_eq!(o.len(), 36);
        assert!(procrustes_disparity(&o, &w).unwrap().value < 1e-12);
        let (o, w) = segment_shape_points(&mask, &FlowField::constant(20, 20, 1.5, -2.0)).unwrap();
        assert!(o.iter().zip(&w).all(|(a, b)| b.0 - a.0 == 1.5 && b.1 - a.1 == -2.0));
        assert!(procrustes_disparity(&o, &w).unwrap().value < 1e-12);
        assert!(segment_shape_points(&mask, &FlowField::zeros(10, 20)).is_err());
    }

    #[test]
    fn shape_points_are_subsampled() {
        let mask = square_mask(0, 0, 60, 64, 64);
        let (o, _) = segment_shape_points(&mask, &FlowField::zeros(64, 64)).unwrap();
        assert!(o.len() <= MAX_SHAPE_POINTS);
        assert_eq!(o.len(), 1800);
        let mask = square_mask(0, 0, 50, 64, 64);
        let (o, _) = segment_shape_points(&mask, &FlowField::zeros(64, 64)).unwrap();
        assert_eq!(o.len(), 1250);
    }

    // Oracle: scipy.spatial.procrustes on the 5x4 pixel grid x in 10..15,
    // y in 20..24 against x' = x + 0.5 (x - 12).
    #[test]
    fn stretching_flow_gives_positive_disparity() {
        let px: Vec<_> = (20..24).flat_map(|y| (10..15).map(move |x| (x, y))).collect();
        let mask = SegmentMask::from_pixels("s", 32, 32, &px).unwrap();
        let flow = FlowField::from_fn(32, 32, |x, _| (0.5 * (x as f32 - 12.0), 0.0));
        let (o, w) = segment_shape_points(&mask, &flow).unwrap();
        let d = procrustes_disparity(&o, &w).unwrap().value;
        assert!((d - 0.0334448160535117).abs() < 1e-12, "{d}");
    }

    fn scene_with(squares: &[(usize, usize, usize)], bg: f32) -> GrayImage {
        GrayImage::from_fn(64, 64, |x, y| {
            let inside = squares.iter().any(|&(sx, sy, s)| (sx..sx + s).contains(&x) && (sy..sy + s).contains(&y));
            if inside {
                0.6 + 0.3 * (((x * 7 + y * 3) % 5) as f32 / 4.0)
            } else {
                bg
            }
        })
    }

    #[test]
    fn identical_scenes_give_null_features() {
        let img = scene_with(&[(10, 10, 12), (40, 30, 10)], 0.1);
        let backend = SegmentationBackend::Builtin(BuiltinConfig::default());
        let reference = SceneRef::new("r", Path::new("r.png"), &img);
        let flow = FlowField::zeros(64, 64);
        let masks = crate::segmentation::segment_all(&backend, &reference).unwrap();
        assert_eq!(masks.len(), 2);
        for m in &masks {
            let fv = extract_features(&img, &reference, m, &flow, &backend).unwrap();
            assert!(fv.cosine < 1e-9, "{fv:?}");
            assert!(fv.disparity < 1e-12);
            assert_eq!(fv.area_diff, 0.0);
            assert!(!fv.low_confidence);
        }
    }

    #[test]
    fn inserted_square_on_dark_background() {
        let reference_img = scene_with(&[], 0.0);
        let query = scene_with(&[(20, 20, 12)], 0.0);
        let backend = SegmentationBackend::Builtin(BuiltinConfig::default());
        let reference = SceneRef::new("r", Path::new("r.png"), &reference_img);
        let query_ref = SceneRef::new("q", Path::new("q.png"), &query);
        let masks = crate::segmentation::segment_all(&backend, &query_ref).unwrap();
        assert_eq!(masks.len(), 1);
        let fv = extract_features(&query, &reference, &masks[0], &FlowField::zeros(64, 64), &backend).unwrap();
        // Reference values under the mask are all zero: one-zero-norm convention.
        assert_eq!(fv.cosine, 1.0);
        assert!(fv.cosine > 0.3);
        assert_eq!(fv.area_diff, 1.0);
    }

    #[test]
    fn clamped_correspondences_flag_low_confidence() {
        let img = scene_with(&[(50, 10, 10)], 0.1);
        let backend = SegmentationBackend::Builtin(BuiltinConfig::default());
        let reference = SceneRef::new("r", Path::new("r.png"), &img);
        let m = square_mask(50, 10, 10, 64, 64);
        let fv = extract_features(&img, &reference, &m, &FlowField::constant(64, 64, 8.0, 0.0), &backend).unwrap();
        assert!(fv.low_confidence);
    }

    #[test]
    fn csv_export_has_header_and_blank_labels() {
        let rows = vec![
            FeatureRow { scene_id: "q".into(), segment_id: "s0".into(), features: FeatureVector::new(0.5, 0.25, 1.0), label: Some(Label::Anomaly) },
            FeatureRow { scene_id: "q".into(), segment_id: "a,b".into(), features: FeatureVector::new(0.0, 0.0, 0.0), label: None },
        ];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "q,s0,0.5,0.25,1,false,anomaly");
        assert_eq!(lines[2], "q,\"a,b\",0,0,0,false,");
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
