//! Dense registration of a query scene onto its reference.
//!
//! The flow is query-anchored: for a query pixel `p` the corresponding
//! reference location is `p + F(p)`.

pub mod dump;
mod interp;
mod pyramid;
mod tvl1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub(crate) use interp::bilinear_clamped;

/// Upper bound on pyramid depth.
const MAX_PYRAMID_LEVELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Data-term weight λ.
    pub attachment_weight: f64,
    /// Coupling θ between the data and regularisation sub-problems.
    pub tightness: f64,
    pub warps_per_level: usize,
    pub iterations_per_warp: usize,
    pub pyramid_downscale: f64,
    pub min_pyramid_dim: usize,
    pub convergence_tol: f64,
    /// 3x3 median filter on the flow before each warp.
    pub prefilter: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            attachment_weight: 15.0,
            tightness: 0.3,
            warps_per_level: 5,
            iterations_per_warp: 10,
            pyramid_downscale: 2.0,
            min_pyramid_dim: 16,
            convergence_tol: 1e-4,
            prefilter: false,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.attachment_weight > 0.0
            && self.tightness > 0.0
            && self.warps_per_level > 0
            && self.iterations_per_warp > 0
            && self.pyramid_downscale > 1.0
            && self.min_pyramid_dim > 0
            && self.convergence_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidImage(format!("invalid flow parameters {self:?}")))
        }
    }
}

/// Per-pixel displacement from the query grid into the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub du: Vec<f32>,
    pub dv: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, du: Vec<f32>, dv: Vec<f32>) -> Result<Self> {
        if du.len() != width * height || dv.len() != width * height {
            return Err(Error::InvalidImage("flow component length mismatch".into()));
        }
        if du.iter().chain(dv.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite flow value".into()));
        }
        Ok(Self { width, height, du, dv })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, du: vec![0.0; width * height], dv: vec![0.0; width * height] }
    }

    pub fn constant(width: usize, height: usize, du: f32, dv: f32) -> Self {
        Self { width, height, du: vec![du; width * height], dv: vec![dv; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f32, f32)) -> Self {
        let mut flow = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                flow.du[y * width + x] = u;
                flow.dv[y * width + x] = v;
            }
        }
        flow
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.du[i], self.dv[i])
    }

    /// Bilinearly interpolated displacement at a point inside the grid.
    pub fn interpolate(&self, x: f64, y: f64) -> (f64, f64) {
        let u = interp::bilinear_inside(&self.du, self.width, self.height, x, y);
        let v = interp::bilinear_inside(&self.dv, self.width, self.height, x, y);
        (u as f64, v as f64)
    }
}

/// A query point mapped into the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub x: f64,
    pub y: f64,
    /// Set when `p + F(p)` fell outside the reference and was clamped.
    pub clamped: bool,
}

/// Estimates the query-anchored flow with coarse-to-fine TV-L1.
pub fn estimate_flow(query: &GrayImage, reference: &GrayImage, params: &FlowParams) -> Result<FlowField> {
    if !query.same_size(reference) {
        return Err(Error::DimensionMismatch(query.width(), query.height(), reference.width(), reference.height()));
    }
    params.validate()?;
    let (w, h) = (query.width(), query.height());
    if w.min(h) < params.min_pyramid_dim {
        return Err(Error::ImageTooSmall { width: w, height: h, min: params.min_pyramid_dim });
    }

    let fixed = pyramid::build(w, h, query.data(), params.pyramid_downscale, params.min_pyramid_dim, MAX_PYRAMID_LEVELS);
    let moving =
        pyramid::build(w, h, reference.data(), params.pyramid_downscale, params.min_pyramid_dim, MAX_PYRAMID_LEVELS);

    let (cw, ch, _) = &fixed[0];
    let mut flow = tvl1::LevelFlow { u: vec![0.0; cw * ch], v: vec![0.0; cw * ch] };
    let mut prev_dims = (*cw, *ch);
    for ((lw, lh, f), (_, _, m)) in fixed.iter().zip(moving.iter()) {
        let (lw, lh) = (*lw, *lh);
        if (lw, lh) != prev_dims {
            let (pw, ph) = prev_dims;
            flow = tvl1::LevelFlow {
                u: pyramid::upsample_component(&flow.u, pw, ph, lw, lh, lw as f32 / pw as f32),
                v: pyramid::upsample_component(&flow.v, pw, ph, lw, lh, lh as f32 / ph as f32),
            };
            prev_dims = (lw, lh);
        }
        flow = tvl1::solve(lw, lh, f, m, flow, params);
    }
    FlowField::new(w, h, flow.u, flow.v)
}

/// Maps a query point into the reference frame, clamping to the reference
/// bounds.
pub fn map_point(p: (f64, f64), flow: &FlowField) -> Result<MappedPoint> {
    let (x, y) = p;
    let max_x = (flow.width - 1) as f64;
    let max_y = (flow.height - 1) as f64;
    if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
        return Err(Error::PointOutOfGrid { x, y, width: flow.width, height: flow.height });
    }
    let (u, v) = flow.interpolate(x, y);
    let (mx, my) = (x + u, y + v);
    let clamped = !(0.0..=max_x).contains(&mx) || !(0.0..=max_y).contains(&my);
    Ok(MappedPoint { x: mx.clamp(0.0, max_x), y: my.clamp(0.0, max_y), clamped })
}

/// Bilinear samples of the reference; entries that needed clamping are
/// returned with `valid = false`.
pub fn sample_reference(reference: &GrayImage, pts: &[(f64, f64)]) -> Vec<(f32, bool)> {
    pts.iter()
        .map(|&(x, y)| {
            let (v, clamped) = bilinear_clamped(reference.data(), reference.width(), reference.height(), x, y);
            (v, !clamped)
        })
        .collect()
}

/// Mean `|query(p) - reference(p + F(p))|` over the grid.
pub fn data_residual(query: &GrayImage, reference: &GrayImage, flow: &FlowField) -> f64 {
    let (w, h) = (query.width(), query.height());
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let (r, _) = bilinear_clamped(reference.data(), w, h, x as f64 + u as f64, y as f64 + v as f64);
            total += (query.get(x, y) - r).abs() as f64;
        }
    }
    total / (w * h) as f64
}
