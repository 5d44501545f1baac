//! Raster types shared by every stage.

use std::path::Path;

use crate::error::{Error, Result};

/// Long-side limit above which scenes are downscaled before registration.
pub const MAX_WORKING_DIM: usize = 1024;

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty dimensions {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from a closure, clamping every value into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self { width, height, data }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn same_size(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> GrayImage {
        let data = resize_channel(&self.data, self.width, self.height, width, height);
        GrayImage::from_fn(width, height, |x, y| data[y * width + x])
    }

    pub fn to_luma8(&self) -> ::image::GrayImage {
        ::image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            ::image::Luma([(self.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }
}

/// 8-bit RGB image, row-major triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty dimensions {width}x{height}")));
        }
        if data.len() != 3 * width * height {
            return Err(Error::InvalidImage(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn open(path: &Path) -> Result<Self> {
        let img = ::image::open(path)
            .map_err(|e| match e {
                ::image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Codec(other),
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        RgbImage::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        buf.save_with_format(path, ::image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ::image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> RgbImage {
        let mut channels = Vec::with_capacity(3);
        for c in 0..3 {
            let plane: Vec<f32> = self.data.iter().skip(c).step_by(3).map(|&v| v as f32).collect();
            channels.push(resize_channel(&plane, self.width, self.height, width, height));
        }
        let mut data = Vec::with_capacity(3 * width * height);
        for i in 0..width * height {
            for ch in &channels {
                data.push(ch[i].round().clamp(0.0, 255.0) as u8);
            }
        }
        RgbImage { width, height, data }
    }
}

/// Rec.601 luma, scaled to `[0, 1]`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let l = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
            l.clamp(0.0, 1.0) as f32
        })
        .collect();
    GrayImage { width: img.width, height: img.height, data }
}

/// Working size for a scene: aspect-preserving downscale so that the long side
/// is at most [`MAX_WORKING_DIM`]. Returns `(width, height, scale)` where
/// `scale = working / original`.
pub fn working_size(width: usize, height: usize) -> (usize, usize, f64) {
    let long = width.max(height);
    if long <= MAX_WORKING_DIM {
        return (width, height, 1.0);
    }
    let scale = MAX_WORKING_DIM as f64 / long as f64;
    let w = ((width as f64 * scale).round() as usize).max(1);
    let h = ((height as f64 * scale).round() as usize).max(1);
    (w, h, scale)
}

/// Bilinear resampling with pixel-centre alignment and edge clamping.
pub(crate) fn resize_channel(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    if sw == dw && sh == dh {
        return src.to_vec();
    }
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = (fy - y0 as f64) as f32;
        for x in 0..dw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = (fx - x0 as f64) as f32;
            let top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            let bot = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            out.push(top * (1.0 - wy) + bot * wy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black_map_to_range_ends() {
        let white = RgbImage::filled(3, 2, [255, 255, 255]);
        assert!(to_grayscale(&white).data().iter().all(|&v| v == 1.0));
        let black = RgbImage::filled(3, 2, [0, 0, 0]);
        assert!(to_grayscale(&black).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_red_is_luma_weight() {
        let red = RgbImage::new(1, 1, vec![255, 0, 0]).unwrap();
        assert!((to_grayscale(&red).get(0, 0) - 0.299).abs() < 1e-6);
    }

    #[test]
    fn gray_image_rejects_bad_input() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn working_size_caps_long_side() {
        assert_eq!(working_size(640, 480), (640, 480, 1.0));
        let (w, h, s) = working_size(3840, 2160);
        assert_eq!((w, h), (1024, 576));
        assert!((s - 1024.0 / 3840.0).abs() < 1e-12);
    }

    #[test]
    fn resize_preserves_constant() {
        let img = GrayImage::constant(10, 7, 0.25);
        let small = img.resize_bilinear(4, 3);
        assert!(small.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    proptest::proptest! {
        #[test]
        fn grayscale_bounded_and_monotone(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255, bump in 0usize..3) {
            let base = RgbImage::new(1, 1, vec![r, g, b]).unwrap();
            let v = to_grayscale(&base).get(0, 0);
            proptest::prop_assert!((0.0..=1.0).contains(&v));
            let mut px = [r, g, b];
            px[bump] = px[bump].saturating_add(1);
            let brighter = to_grayscale(&RgbImage::new(1, 1, px.to_vec()).unwrap()).get(0, 0);
            proptest::prop_assert!(brighter >= v);
        }
    }
}
