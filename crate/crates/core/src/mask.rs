use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rle;

/// Axis-aligned box in pixel units: `x, y` top-left, `w, h` extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    /// Centre of the covered pixel span, in pixel-index coordinates.
    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + (self.w as f64 - 1.0) / 2.0, self.y as f64 + (self.h as f64 - 1.0) / 2.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x as f64 - 0.5
            && y >= self.y as f64 - 0.5
            && x <= (self.x + self.w) as f64 - 0.5
            && y <= (self.y + self.h) as f64 - 0.5
    }
}

/// One object's binary mask on the scene grid.
///
/// The centre is the bounding-box centre even when that point falls outside
/// a concave mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMask {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub rle: Vec<u32>,
    pub bbox: BBox,
    pub area: usize,
    pub center: (f64, f64),
}

impl SegmentMask {
    /// Builds a mask from a row-major raster, deriving area, bbox and centre.
    /// Returns `None` for an empty raster.
    pub fn from_bits(id: impl Into<String>, width: usize, height: usize, bits: &[bool]) -> Option<Self> {
        assert_eq!(bits.len(), width * height, "raster length must equal width * height");
        let (bbox, area) = tight_bbox(width, bits)?;
        Some(Self {
            id: id.into(),
            width,
            height,
            rle: rle::encode(bits),
            center: bbox.center(),
            bbox,
            area,
        })
    }

    pub fn from_pixels(id: impl Into<String>, width: usize, height: usize, pixels: &[(usize, usize)]) -> Option<Self> {
        let mut bits = vec![false; width * height];
        for &(x, y) in pixels {
            bits[y * width + x] = true;
        }
        Self::from_bits(id, width, height, &bits)
    }

    pub fn decode(&self) -> Result<Vec<bool>> {
        rle::decode(&self.rle, self.width, self.height)
    }

    /// Row-major coordinates of all set pixels.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.area);
        let mut pos = 0usize;
        for (i, &run) in self.rle.iter().enumerate() {
            let run = run as usize;
            if i % 2 == 1 {
                out.extend((pos..pos + run).map(|p| (p % self.width, p / self.width)));
            }
            pos += run;
        }
        out
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let target = y * self.width + x;
        let mut pos = 0usize;
        for (i, &run) in self.rle.iter().enumerate() {
            pos += run as usize;
            if target < pos {
                return i % 2 == 1;
            }
        }
        false
    }

    /// Re-derives area and bbox from the RLE and checks them against the
    /// stored fields.
    pub fn validate(&self) -> Result<()> {
        let bits = self.decode().map_err(|e| Error::schema(format!("segments[{}].rle", self.id), e.to_string()))?;
        let (bbox, area) = tight_bbox(self.width, &bits)
            .ok_or_else(|| Error::schema(format!("segments[{}].area", self.id), "mask has no set pixels"))?;
        if area != self.area {
            return Err(Error::schema(
                format!("segments[{}].area", self.id),
                format!("stored {} but rle has {area} set pixels", self.area),
            ));
        }
        if bbox != self.bbox {
            return Err(Error::schema(
                format!("segments[{}].bbox", self.id),
                format!("stored {:?} but tight box is {:?}", self.bbox, bbox),
            ));
        }
        Ok(())
    }

    /// Nearest-neighbour resampling onto a different grid.
    pub fn resample(&self, width: usize, height: usize) -> Option<SegmentMask> {
        if width == self.width && height == self.height {
            return Some(self.clone());
        }
        let bits = self.decode().ok()?;
        let mut out = vec![false; width * height];
        for y in 0..height {
            let sy = (((y as f64 + 0.5) * self.height as f64 / height as f64) as usize).min(self.height - 1);
            for x in 0..width {
                let sx = (((x as f64 + 0.5) * self.width as f64 / width as f64) as usize).min(self.width - 1);
                out[y * width + x] = bits[sy * self.width + sx];
            }
        }
        SegmentMask::from_bits(self.id.clone(), width, height, &out)
    }
}

fn tight_bbox(width: usize, bits: &[bool]) -> Option<(BBox, usize)> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    let mut area = 0;
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        let (x, y) = (i % width, i / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
        area += 1;
    }
    (area > 0).then(|| (BBox { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 }, area))
}
