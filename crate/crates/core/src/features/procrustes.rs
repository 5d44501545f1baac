//! Orthogonal Procrustes disparity between two corresponding 2-D point sets.
//!
//! Both sets are centred and scaled to unit Frobenius norm; the second is
//! then rotated (reflections allowed) and uniformly rescaled onto the first.
//! The disparity is the remaining sum of squared distances, which lies in
//! `[0, 1]`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disparity {
    pub value: f64,
    /// Fewer than three points or a set without spread; `value` is 0.
    pub degenerate: bool,
}

impl Disparity {
    const DEGENERATE: Disparity = Disparity { value: 0.0, degenerate: true };
}

fn standardize(pts: &[(f64, f64)]) -> Option<Vec<Vector2<f64>>> {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.0, sy + p.1));
    let mean = Vector2::new(sx / n, sy / n);
    let centred: Vec<Vector2<f64>> = pts.iter().map(|&(x, y)| Vector2::new(x, y) - mean).collect();
    let norm = centred.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(centred.into_iter().map(|v| v / norm).collect())
}

pub fn procrustes_disparity(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Disparity> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Ok(Disparity::DEGENERATE);
    }
    let (Some(sa), Some(sb)) = (standardize(a), standardize(b)) else {
        return Ok(Disparity::DEGENERATE);
    };

    // Cross-covariance Bᵀ A; its SVD gives the optimal orthogonal map and scale.
    let mut cross = Matrix2::zeros();
    for (pa, pb) in sa.iter().zip(&sb) {
        cross += pb * pa.transpose();
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let rotation = u * v_t;
    let scale: f64 = svd.singular_values.iter().sum();

    let value: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(pa, pb)| (pa - scale * (rotation.transpose() * pb)).norm_squared())
        .sum();
    Ok(Disparity { value: value.max(0.0), degenerate: false })
}
