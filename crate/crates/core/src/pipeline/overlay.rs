use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::mask::SegmentMask;
use crate::scene::Label;

use super::AnomalyReport;

pub const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];
pub const OVERLAY_ALPHA: f64 = 0.5;

/// Tints anomaly-decided masks red over the query image. `masks` must cover
/// exactly the report's segments.
pub fn render_overlay(query: &RgbImage, report: &AnomalyReport, masks: &[SegmentMask]) -> Result<RgbImage> {
    let decisions: HashMap<&str, Label> = report.entries.iter().map(|e| (e.segment_id.as_str(), e.decision)).collect();
    if masks.len() != decisions.len() {
        return Err(Error::ReportMismatch(format!(
            "{} masks for {} report entries",
            masks.len(),
            decisions.len()
        )));
    }
    let mut out = query.clone();
    for m in masks {
        let decision = *decisions
            .get(m.id.as_str())
            .ok_or_else(|| Error::ReportMismatch(format!("mask `{}` is not in the report", m.id)))?;
        if m.width != query.width() || m.height != query.height() {
            return Err(Error::DimensionMismatch(m.width, m.height, query.width(), query.height()));
        }
        if decision != Label::Anomaly {
            continue;
        }
        for (x, y) in m.pixels() {
            let px = out.pixel(x, y);
            let mut blended = [0u8; 3];
            for c in 0..3 {
                let v = OVERLAY_ALPHA * OVERLAY_COLOR[c] as f64 + (1.0 - OVERLAY_ALPHA) * px[c] as f64;
                blended[c] = v.floor() as u8;
            }
            out.set_pixel(x, y, blended);
        }
    }
    Ok(out)
}
