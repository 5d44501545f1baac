//! Duality-based TV-L1 solver for a single pyramid level.
//!
//! Minimises `Σ |I1(x + u) - I0(x)| * λ + TV(u)` by alternating a pointwise
//! thresholding step on the linearised data term with a Chambolle projection
//! for the total-variation term, re-linearising after every warp.

use super::interp::bilinear_clamped;
use super::FlowParams;

const REG_ITERS: usize = 2;

pub(crate) struct LevelFlow {
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

/// `fixed` is the image the flow is anchored on, `moving` is sampled at
/// `x + flow(x)`.
pub(crate) fn solve(
    width: usize,
    height: usize,
    fixed: &[f32],
    moving: &[f32],
    mut flow: LevelFlow,
    params: &FlowParams,
) -> LevelFlow {
    let n = width * height;
    let dt = 0.25f32; // 0.5 / ndim
    let f0 = (params.attachment_weight * params.tightness) as f32;
    let f1 = dt / params.tightness as f32;
    let tol = params.convergence_tol * n as f64;

    // Dual variables, one pair per flow component.
    let mut px = [vec![0f32; n], vec![0f32; n]];
    let mut py = [vec![0f32; n], vec![0f32; n]];
    let mut gx_buf = vec![0f32; n];
    let mut gy_buf = vec![0f32; n];
    let mut div = vec![0f32; n];

    let mut warped = vec![0f32; n];
    let mut ix = vec![0f32; n];
    let mut iy = vec![0f32; n];
    let mut norm_sq = vec![0f32; n];
    let mut rho0 = vec![0f32; n];

    for _ in 0..params.warps_per_level {
        if params.prefilter {
            flow.u = median3(width, height, &flow.u);
            flow.v = median3(width, height, &flow.v);
        }
        let prev_u = flow.u.clone();
        let prev_v = flow.v.clone();

        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let sx = x as f64 + flow.u[i] as f64;
                let sy = y as f64 + flow.v[i] as f64;
                warped[i] = bilinear_clamped(moving, width, height, sx, sy).0;
            }
        }
        gradient(width, height, &warped, &mut ix, &mut iy);
        for i in 0..n {
            let g = ix[i] * ix[i] + iy[i] * iy[i];
            norm_sq[i] = if g == 0.0 { 1.0 } else { g };
            rho0[i] = warped[i] - fixed[i] - (ix[i] * flow.u[i] + iy[i] * flow.v[i]);
        }

        for _ in 0..params.iterations_per_warp {
            // Data term: pointwise soft-thresholding of the linearised residual.
            for i in 0..n {
                let rho = rho0[i] + ix[i] * flow.u[i] + iy[i] * flow.v[i];
                if rho.abs() <= f0 * norm_sq[i] {
                    let s = rho / norm_sq[i];
                    flow.u[i] -= s * ix[i];
                    flow.v[i] -= s * iy[i];
                } else {
                    let s = f0 * rho.signum();
                    flow.u[i] -= s * ix[i];
                    flow.v[i] -= s * iy[i];
                }
            }
            // Regularisation: a few Chambolle projection steps per component.
            for (c, comp) in [&mut flow.u, &mut flow.v].into_iter().enumerate() {
                let aux = comp.clone();
                for _ in 0..REG_ITERS {
                    forward_diff(width, height, comp, &mut gx_buf, &mut gy_buf);
                    for i in 0..n {
                        let norm = 1.0 + f1 * (gx_buf[i] * gx_buf[i] + gy_buf[i] * gy_buf[i]).sqrt();
                        px[c][i] = (px[c][i] - dt * gx_buf[i]) / norm;
                        py[c][i] = (py[c][i] - dt * gy_buf[i]) / norm;
                    }
                    neg_divergence(width, height, &px[c], &py[c], &mut div);
                    for i in 0..n {
                        comp[i] = aux[i] + div[i];
                    }
                }
            }
        }

        let change: f64 = (0..n)
            .map(|i| {
                let du = (prev_u[i] - flow.u[i]) as f64;
                let dv = (prev_v[i] - flow.v[i]) as f64;
                du * du + dv * dv
            })
            .sum();
        if change < tol {
            break;
        }
    }
    flow
}

/// Central differences in the interior, one-sided at the borders.
fn gradient(width: usize, height: usize, img: &[f32], gx: &mut [f32], gy: &mut [f32]) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            gx[i] = if width == 1 {
                0.0
            } else if x == 0 {
                img[i + 1] - img[i]
            } else if x == width - 1 {
                img[i] - img[i - 1]
            } else {
                (img[i + 1] - img[i - 1]) * 0.5
            };
            gy[i] = if height == 1 {
                0.0
            } else if y == 0 {
                img[i + width] - img[i]
            } else if y == height - 1 {
                img[i] - img[i - width]
            } else {
                (img[i + width] - img[i - width]) * 0.5
            };
        }
    }
}

/// Forward differences with zero on the last column / row.
fn forward_diff(width: usize, height: usize, f: &[f32], gx: &mut [f32], gy: &mut [f32]) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            gx[i] = if x + 1 < width { f[i + 1] - f[i] } else { 0.0 };
            gy[i] = if y + 1 < height { f[i + width] - f[i] } else { 0.0 };
        }
    }
}

/// Negative backward-difference divergence, the adjoint of [`forward_diff`].
fn neg_divergence(width: usize, height: usize, px: &[f32], py: &[f32], out: &mut [f32]) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut d = -(px[i] + py[i]);
            if x > 0 {
                d += px[i - 1];
            }
            if y > 0 {
                d += py[i - width];
            }
            out[i] = d;
        }
    }
}

fn median3(width: usize, height: usize, f: &[f32]) -> Vec<f32> {
    let mut out = vec![0f32; f.len()];
    let mut window = [0f32; 9];
    for y in 0..height {
        for x in 0..width {
            let mut k = 0;
            for dy in -1isize..=1 {
                let yy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
                for dx in -1isize..=1 {
                    let xx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
                    window[k] = f[yy * width + xx];
                    k += 1;
                }
            }
            window.sort_by(f32::total_cmp);
            out[y * width + x] = window[4];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_is_adjoint_of_gradient() {
        // <grad f, p> = <f, -div p>
        let (w, h) = (5, 4);
        let f: Vec<f32> = (0..w * h).map(|i| ((i * 7) % 11) as f32 * 0.1).collect();
        let mut px: Vec<f32> = (0..w * h).map(|i| ((i * 3) % 5) as f32 * 0.2 - 0.4).collect();
        let mut py: Vec<f32> = (0..w * h).map(|i| ((i * 5) % 7) as f32 * 0.1 - 0.3).collect();
        // duals stay zero where the forward difference is clamped to zero
        for y in 0..h {
            px[y * w + w - 1] = 0.0;
        }
        for x in 0..w {
            py[(h - 1) * w + x] = 0.0;
        }
        let (mut gx, mut gy, mut d) = (vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]);
        forward_diff(w, h, &f, &mut gx, &mut gy);
        neg_divergence(w, h, &px, &py, &mut d);
        let lhs: f32 = (0..w * h).map(|i| gx[i] * px[i] + gy[i] * py[i]).sum();
        let rhs: f32 = (0..w * h).map(|i| f[i] * d[i]).sum();
        assert!((lhs - rhs).abs() < 1e-5, "{lhs} vs {rhs}");
    }

    #[test]
    fn median_removes_spike() {
        let mut f = vec![1.0f32; 25];
        f[12] = 100.0;
        assert!(median3(5, 5, &f).iter().all(|&v| v == 1.0));
    }
}
