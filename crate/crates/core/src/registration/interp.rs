/// Bilinear lookup with coordinates clamped to the grid. The flag reports
/// whether clamping was needed.
#[inline]
pub(crate) fn bilinear_clamped(data: &[f32], width: usize, height: usize, x: f64, y: f64) -> (f32, bool) {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let clamped = !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y);
    let cx = x.clamp(0.0, max_x);
    let cy = y.clamp(0.0, max_y);
    (bilinear_inside(data, width, height, cx, cy), clamped)
}

/// Bilinear lookup; `x` and `y` must already lie inside the grid.
#[inline]
pub(crate) fn bilinear_inside(data: &[f32], width: usize, height: usize, x: f64, y: f64) -> f32 {
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let wx = x - x0 as f64;
    let wy = y - y0 as f64;
    let top = data[y0 * width + x0] as f64 * (1.0 - wx) + data[y0 * width + x1] as f64 * wx;
    let bot = data[y1 * width + x0] as f64 * (1.0 - wx) + data[y1 * width + x1] as f64 * wx;
    (top * (1.0 - wy) + bot * wy) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_midpoint() {
        let data = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bilinear_clamped(&data, 2, 2, 0.5, 0.5), (1.5, false));
        assert_eq!(bilinear_clamped(&data, 2, 2, 1.0, 0.0), (1.0, false));
        assert_eq!(bilinear_clamped(&data, 2, 2, -5.0, -5.0), (0.0, true));
        assert_eq!(bilinear_clamped(&data, 2, 2, 9.0, 0.5), (2.0, true));
    }
}
