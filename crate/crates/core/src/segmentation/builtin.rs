//! Otsu threshold + 8-connected components.

use serde::{Deserialize, Serialize};

use crate::image::GrayImage;
use crate::mask::SegmentMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Threshold {
    Otsu,
    Fixed(f32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinConfig {
    pub threshold: Threshold,
    pub min_area: usize,
}

impl Default for BuiltinConfig {
    fn default() -> Self {
        Self { threshold: Threshold::Otsu, min_area: 32 }
    }
}

const BINS: usize = 256;

/// Otsu's threshold over a 256-bin histogram spanning the image range. The
/// returned value is the upper edge of the background class; foreground is
/// strictly above it.
pub fn otsu_threshold(img: &GrayImage) -> f32 {
    let (lo, hi) = img
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi <= lo {
        return lo;
    }
    let scale = (BINS as f32) / (hi - lo);
    let mut hist = [0u64; BINS];
    for &v in img.data() {
        hist[(((v - lo) * scale) as usize).min(BINS - 1)] += 1;
    }
    let bin_center = |i: usize| lo as f64 + (i as f64 + 0.5) / scale as f64;
    let total = img.data().len() as f64;
    let sum_all: f64 = (0..BINS).map(|i| hist[i] as f64 * bin_center(i)).sum();

    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best, mut best_var) = (0usize, -1.0f64);
    for (i, &count) in hist.iter().enumerate().take(BINS - 1) {
        w0 += count as f64;
        sum0 += count as f64 * bin_center(i);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = i;
        }
    }
    (lo as f64 + (best + 1) as f64 / scale as f64) as f32
}

pub(crate) fn foreground(img: &GrayImage, cfg: &BuiltinConfig) -> Vec<bool> {
    let t = match cfg.threshold {
        Threshold::Otsu => otsu_threshold(img),
        Threshold::Fixed(t) => t,
    };
    img.data().iter().map(|&v| v > t).collect()
}

/// 8-connected components in row-major order of their first pixel; those
/// smaller than `min_area` are dropped. Ids are `s0, s1, ...` over the kept
/// components.
pub fn components(width: usize, height: usize, fg: &[bool], min_area: usize) -> Vec<SegmentMask> {
    let mut visited = vec![false; fg.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..fg.len() {
        if !fg[start] || visited[start] {
            continue;
        }
        let mut bits = vec![false; fg.len()];
        visited[start] = true;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            bits[i] = true;
            area += 1;
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if fg[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if area >= min_area {
            let id = format!("s{}", out.len());
            out.push(SegmentMask::from_bits(id, width, height, &bits).expect("component is non-empty"));
        }
    }
    out
}

pub fn segment(img: &GrayImage, cfg: &BuiltinConfig) -> Vec<SegmentMask> {
    components(img.width(), img.height(), &foreground(img, cfg), cfg.min_area)
}
