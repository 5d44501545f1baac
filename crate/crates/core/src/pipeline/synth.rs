//! Seeded synthetic scene pairs: textured fixtures on a shaded background,
//! a small camera drift and lighting change, and inserted objects.

use std::f64::consts::TAU;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::manifest::Manifest;
use crate::mask::SegmentMask;
use crate::scene::{Label, LabelRecord, LabelsFile, Scene, SceneRole};

/// Inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Range<T> {
    pub fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    fn valid(&self) -> bool {
        self.min <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub n_fixtures: usize,
    pub n_inserted: Range<usize>,
    /// Integer camera drift along x.
    pub shift_x: Range<i32>,
    /// Integer camera drift along y.
    pub shift_y: Range<i32>,
    pub illumination_scale: Range<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            n_fixtures: 6,
            n_inserted: Range::new(2, 5),
            shift_x: Range::new(-3, 3),
            shift_y: Range::new(-3, 3),
            illumination_scale: Range::new(0.9, 1.1),
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn max_drift(&self) -> i32 {
        [self.shift_x.min, self.shift_x.max, self.shift_y.min, self.shift_y.max].iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(format!("synth: {m}")));
        if self.width < 64 || self.height < 64 {
            return bad("image must be at least 64x64");
        }
        if !self.n_inserted.valid() || !self.shift_x.valid() || !self.shift_y.valid() || !self.illumination_scale.valid()
        {
            return bad("range min exceeds max");
        }
        if self.max_drift() > 8 {
            return bad("shift must stay within 8 px");
        }
        if !(self.illumination_scale.min > 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("illumination must be positive and noise non-negative");
        }
        Ok(())
    }
}

/// One generated pair with its construction masks and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub reference: Scene,
    pub query: Scene,
    pub reference_image: RgbImage,
    pub query_image: RgbImage,
    pub reference_manifest: Manifest,
    pub query_manifest: Manifest,
    pub labels: LabelsFile,
    /// Query content sits at reference position plus this offset.
    pub shift: (i32, i32),
    pub illumination: f64,
}

const MIN_SIDE: usize = 14;
const MAX_SIDE: usize = 36;
const GAP: usize = 4;
const BORDER: usize = 8;
const PLACEMENT_TRIES: usize = 400;

#[derive(Debug, Clone)]
struct Shape {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    ellipse: bool,
    base: f64,
    amp: f64,
    freq: (f64, f64),
    phase: f64,
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, x: usize, y: usize, w: usize, h: usize) -> Self {
        let theta = rng.random_range(0.0..TAU);
        let period = rng.random_range(5.0..12.0);
        Self {
            x,
            y,
            w,
            h,
            ellipse: rng.random_bool(0.5),
            base: rng.random_range(0.66..0.80),
            amp: rng.random_range(0.06..0.12),
            freq: (theta.cos() / period, theta.sin() / period),
            phase: rng.random_range(0.0..TAU),
        }
    }

    fn contains(&self, x: i64, y: i64) -> bool {
        let (x0, y0) = (self.x as i64, self.y as i64);
        if x < x0 || y < y0 || x >= x0 + self.w as i64 || y >= y0 + self.h as i64 {
            return false;
        }
        if !self.ellipse {
            return true;
        }
        let dx = (x - x0) as f64 - (self.w as f64 - 1.0) / 2.0;
        let dy = (y - y0) as f64 - (self.h as f64 - 1.0) / 2.0;
        (dx / (self.w as f64 / 2.0)).powi(2) + (dy / (self.h as f64 / 2.0)).powi(2) <= 1.0
    }

    fn value(&self, x: i64, y: i64) -> f64 {
        let (lx, ly) = ((x - self.x as i64) as f64, (y - self.y as i64) as f64);
        self.base + self.amp * (TAU * (lx * self.freq.0 + ly * self.freq.1) + self.phase).sin()
    }

    fn translated(&self, dx: i32, dy: i32) -> (i64, i64, i64, i64) {
        (self.x as i64 + dx as i64, self.y as i64 + dy as i64, self.w as i64, self.h as i64)
    }
}

fn overlaps(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> bool {
    let g = GAP as i64;
    a.0 < b.0 + b.2 + g && b.0 < a.0 + a.2 + g && a.1 < b.1 + b.3 + g && b.1 < a.1 + a.3 + g
}

/// Places a shape clear of `taken`, at least `margin` px from the border.
fn place(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    margin: usize,
    taken: &[(i64, i64, i64, i64)],
) -> Option<Shape> {
    for _ in 0..PLACEMENT_TRIES {
        let w = rng.random_range(MIN_SIDE..=MAX_SIDE);
        let h = rng.random_range(MIN_SIDE..=MAX_SIDE);
        let x = rng.random_range(margin..=cfg.width - margin - w);
        let y = rng.random_range(margin..=cfg.height - margin - h);
        let bbox = (x as i64, y as i64, w as i64, h as i64);
        if taken.iter().all(|&t| !overlaps(t, bbox)) {
            return Some(Shape::random(rng, x, y, w, h));
        }
    }
    None
}

struct Background {
    level: f64,
    slope: (f64, f64),
    waves: [(f64, f64, f64); 2],
}

impl Background {
    fn random(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Self {
        let dir = rng.random_range(0.0..TAU);
        let span = rng.random_range(0.08..0.16);
        let diag = (cfg.width + cfg.height) as f64;
        let wave = |rng: &mut ChaCha8Rng| {
            let t = rng.random_range(0.0..TAU);
            let p = rng.random_range(18.0..40.0);
            (t.cos() / p, t.sin() / p, rng.random_range(0.0..TAU))
        };
        Self {
            level: rng.random_range(0.12..0.16),
            slope: (span * dir.cos() / diag * 2.0, span * dir.sin() / diag * 2.0),
            waves: [wave(rng), wave(rng)],
        }
    }

    fn value(&self, x: i64, y: i64) -> f64 {
        let (x, y) = (x as f64, y as f64);
        let mut v = self.level + (self.slope.0 * x + self.slope.1 * y).abs();
        for (fx, fy, ph) in self.waves {
            v += 0.02 * (TAU * (fx * x + fy * y) + ph).sin();
        }
        v
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_rgb(width: usize, height: usize, values: &[f64]) -> RgbImage {
    let data = values.iter().flat_map(|&v| [quantize(v); 3]).collect();
    RgbImage::new(width, height, data).expect("buffer sized to the image")
}

/// Masks sorted by the top-left corner of their bounding box, ids `s0, s1, ...`.
fn masks_in_order(width: usize, height: usize, rasters: Vec<(Vec<bool>, Label)>) -> Vec<(SegmentMask, Label)> {
    let mut masks: Vec<(SegmentMask, Label)> = rasters
        .into_iter()
        .filter_map(|(bits, label)| SegmentMask::from_bits("", width, height, &bits).map(|m| (m, label)))
        .collect();
    masks.sort_by_key(|(m, _)| (m.bbox.y, m.bbox.x));
    for (i, (m, _)) in masks.iter_mut().enumerate() {
        m.id = format!("s{i}");
    }
    masks
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 4, 9, 0, 0).single().expect("valid timestamp")
}

/// Pair number `index` of the benchmark seeded by `cfg.seed`. Reference ids
/// are `r<index>`, query ids `q<index>`, images live under `scenes/`.
pub fn synth_generate(cfg: &SynthConfig, index: u64) -> Result<SynthPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let (w, h) = (cfg.width, cfg.height);
    let drift = cfg.max_drift() as usize;
    let margin = BORDER + drift;

    let background = Background::random(&mut rng, cfg);
    let mut fixtures: Vec<Shape> = Vec::with_capacity(cfg.n_fixtures);
    for _ in 0..cfg.n_fixtures {
        let taken: Vec<_> = fixtures.iter().map(|s| s.translated(0, 0)).collect();
        if let Some(s) = place(&mut rng, cfg, margin, &taken) {
            fixtures.push(s);
        }
    }
    let shift = (
        rng.random_range(cfg.shift_x.min..=cfg.shift_x.max),
        rng.random_range(cfg.shift_y.min..=cfg.shift_y.max),
    );
    let illumination = rng.random_range(cfg.illumination_scale.min..=cfg.illumination_scale.max);
    let n_inserted = rng.random_range(cfg.n_inserted.min..=cfg.n_inserted.max);
    let mut inserted: Vec<Shape> = Vec::with_capacity(n_inserted);
    for _ in 0..n_inserted {
        let taken: Vec<_> = fixtures
            .iter()
            .map(|s| s.translated(shift.0, shift.1))
            .chain(fixtures.iter().map(|s| s.translated(0, 0)))
            .chain(inserted.iter().map(|s| s.translated(0, 0)))
            .collect();
        if let Some(s) = place(&mut rng, cfg, BORDER, &taken) {
            inserted.push(s);
        }
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidHyperparams(e.to_string()))?;

    let mut ref_vals = vec![0.0; w * h];
    let mut query_vals = vec![0.0; w * h];
    let mut ref_bits = vec![vec![false; w * h]; fixtures.len()];
    let mut query_bits = vec![vec![false; w * h]; fixtures.len() + inserted.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (xi, yi) = (x as i64, y as i64);
            let mut v = background.value(xi, yi);
            for (k, s) in fixtures.iter().enumerate() {
                if s.contains(xi, yi) {
                    v = s.value(xi, yi);
                    ref_bits[k][i] = true;
                }
            }
            ref_vals[i] = v;

            let (wx, wy) = (xi - shift.0 as i64, yi - shift.1 as i64);
            let mut q = background.value(wx, wy);
            for (k, s) in fixtures.iter().enumerate() {
                if s.contains(wx, wy) {
                    q = s.value(wx, wy);
                    query_bits[k][i] = true;
                }
            }
            for (k, s) in inserted.iter().enumerate() {
                if s.contains(xi, yi) {
                    q = s.value(xi, yi);
                    query_bits[fixtures.len() + k][i] = true;
                }
            }
            let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            query_vals[i] = illumination * q + n;
        }
    }

    let ref_id = format!("r{index:02}");
    let query_id = format!("q{index:02}");
    let ref_path = format!("scenes/{ref_id}.png");
    let query_path = format!("scenes/{query_id}.png");
    let ref_masks: Vec<SegmentMask> =
        masks_in_order(w, h, ref_bits.into_iter().map(|b| (b, Label::Normal)).collect()).into_iter().map(|(m, _)| m).collect();
    let labeled: Vec<(Vec<bool>, Label)> = query_bits
        .into_iter()
        .enumerate()
        .map(|(k, b)| (b, if k < fixtures.len() { Label::Normal } else { Label::Anomaly }))
        .collect();
    let query_masks = masks_in_order(w, h, labeled);

    let mut labels = LabelsFile::new(&query_id, &ref_id);
    labels.labels = query_masks.iter().map(|(m, l)| LabelRecord::new(m.id.clone(), *l)).collect();
    let captured = base_time() + Duration::days(index as i64);
    Ok(SynthPair {
        reference: Scene { id: ref_id, image_path: ref_path.clone(), captured_at: captured, role: SceneRole::Reference },
        query: Scene {
            id: query_id,
            image_path: query_path.clone(),
            captured_at: captured + Duration::hours(8),
            role: SceneRole::Query,
        },
        reference_image: to_rgb(w, h, &ref_vals),
        query_image: to_rgb(w, h, &query_vals),
        reference_manifest: Manifest::new(ref_path, w, h, ref_masks),
        query_manifest: Manifest::new(query_path, w, h, query_masks.into_iter().map(|(m, _)| m).collect()),
        labels,
        shift,
        illumination,
    })
}
