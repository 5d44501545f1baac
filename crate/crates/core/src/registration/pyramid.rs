//! Gaussian pyramid construction and flow upsampling between levels.

use crate::image::resize_channel;

/// A single-channel level: `(width, height, data)`.
pub(crate) type Level = (usize, usize, Vec<f32>);

/// Levels ordered coarsest first, finest (the input) last. A level is added
/// while the smaller side of the previous one exceeds `downscale * min_dim`,
/// capped at `max_levels`.
pub(crate) fn build(
    width: usize,
    height: usize,
    data: &[f32],
    downscale: f64,
    min_dim: usize,
    max_levels: usize,
) -> Vec<Level> {
    let mut levels = vec![(width, height, data.to_vec())];
    let mut size = width.min(height) as f64;
    while levels.len() < max_levels && size > downscale * min_dim as f64 {
        let (w, h, d) = levels.last().expect("non-empty");
        let next = reduce(*w, *h, d, downscale);
        size = next.0.min(next.1) as f64;
        levels.push(next);
    }
    levels.reverse();
    levels
}

fn reduce(width: usize, height: usize, data: &[f32], downscale: f64) -> Level {
    let sigma = 2.0 * downscale / 6.0;
    let smoothed = gaussian_blur(width, height, data, sigma);
    let w = (width as f64 / downscale).ceil() as usize;
    let h = (height as f64 / downscale).ceil() as usize;
    (w, h, resize_channel(&smoothed, width, height, w, h))
}

/// Mirror index for half-sample symmetric boundaries (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

pub(crate) fn gaussian_blur(width: usize, height: usize, data: &[f32], sigma: f64) -> Vec<f32> {
    let radius = (4.0 * sigma + 0.5) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let mut tmp = vec![0f32; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &wk) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius, width);
                acc += wk * data[y * width + sx] as f64;
            }
            tmp[y * width + x] = acc as f32;
        }
    }
    let mut out = vec![0f32; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &wk) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius, height);
                acc += wk * tmp[sy * width + x] as f64;
            }
            out[y * width + x] = acc as f32;
        }
    }
    out
}

/// Nearest-neighbour upsampling of one flow component onto a finer grid,
/// rescaling the displacement by `scale`.
pub(crate) fn upsample_component(
    src: &[f32],
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
    scale: f32,
) -> Vec<f32> {
    let map = |i: usize, dn: usize, sn: usize| -> usize {
        if dn <= 1 {
            0
        } else {
            ((i as f64 * (sn - 1) as f64 / (dn - 1) as f64).round() as usize).min(sn - 1)
        }
    };
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let sy = map(y, dh, sh);
        for x in 0..dw {
            out.push(src[sy * sw + map(x, dw, sw)] * scale);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_count_follows_min_dim_rule() {
        let data = vec![0.5f32; 64 * 64];
        let levels = build(64, 64, &data, 2.0, 16, 10);
        let dims: Vec<_> = levels.iter().map(|(w, h, _)| (*w, *h)).collect();
        assert_eq!(dims, vec![(32, 32), (64, 64)]);
        let levels = build(256, 200, &vec![0.0; 256 * 200], 2.0, 16, 10);
        let dims: Vec<_> = levels.iter().map(|(w, h, _)| (*w, *h)).collect();
        assert_eq!(dims, vec![(32, 25), (64, 50), (128, 100), (256, 200)]);
    }

    #[test]
    fn blur_preserves_constant_and_mass() {
        let data = vec![0.3f32; 9 * 7];
        let out = gaussian_blur(9, 7, &data, 0.667);
        assert!(out.iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
    }

    #[test]
    fn upsample_scales_values() {
        let out = upsample_component(&[1.0, 2.0, 3.0, 4.0], 2, 2, 4, 4, 2.0);
        assert_eq!(out[0], 2.0);
        assert_eq!(out[3], 4.0);
        assert_eq!(out[15], 8.0);
    }
}
