//! Grayscale rasters and binary masks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f32) -> Self {
        GrayImage {
            width,
            height,
            data: vec![fill.clamp(0.0, 1.0); width * height],
        }
    }

    /// Wraps an existing buffer; rejects wrong lengths and out-of-range values.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "image buffer has {} values, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "intensity {} at index {} outside [0,1]",
                data[i], i
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a closure, clamping results into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// Clamped-coordinate lookup.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    /// Inclusive crop `[x0, x1] x [y0, y1]`.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> GrayImage {
        assert!(x0 <= x1 && y0 <= y1 && x1 < self.width && y1 < self.height);
        let w = x1 - x0 + 1;
        let h = y1 - y0 + 1;
        let mut data = Vec::with_capacity(w * h);
        for y in y0..=y1 {
            data.extend_from_slice(&self.data[y * self.width + x0..=y * self.width + x1]);
        }
        GrayImage {
            width: w,
            height: h,
            data,
        }
    }

    /// Bilinear resampling with pixel-center alignment. Same-size input is copied unchanged.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> GrayImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        GrayImage::from_fn(width, height, |x, y| {
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
            let x0 = (fx.floor() as usize).min(self.width - 1);
            let y0 = (fy.floor() as usize).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let tx = (fx - x0 as f64).clamp(0.0, 1.0);
            let ty = (fy - y0 as f64).clamp(0.0, 1.0);
            let top = self.get(x0, y0) as f64 * (1.0 - tx) + self.get(x1, y0) as f64 * tx;
            let bot = self.get(x0, y1) as f64 * (1.0 - tx) + self.get(x1, y1) as f64 * tx;
            (top * (1.0 - ty) + bot * ty) as f32
        })
    }

    /// Rotates by 90 degrees counter-clockwise in image coordinates (y down).
    pub fn rotate90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    pub fn rotate90_times(&self, k: usize) -> GrayImage {
        (0..k % 4).fold(self.clone(), |img, _| img.rotate90())
    }

    pub fn flip_horizontal(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        let buf = self
            .data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer size matches")
    }

    pub fn from_luma8(img: &image::GrayImage) -> GrayImage {
        GrayImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    /// Loads an 8-bit (or wider, converted) grayscale PNG/TIFF.
    pub fn load(path: impl AsRef<Path>) -> Result<GrayImage> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::file(path, e))?;
        Ok(GrayImage::from_luma8(&img.to_luma8()))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::file(path, e))
    }

    /// Quantizes to 8 bits and back, matching what a PNG round trip yields.
    pub fn quantized(&self) -> GrayImage {
        GrayImage::from_luma8(&self.to_luma8())
    }
}

/// Per-pixel foreground flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Foreground coordinates in raster order.
    pub fn points(&self) -> Vec<(u32, u32)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| ((i % self.width) as u32, (i / self.width) as u32))
            .collect()
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i % self.width, i / self.width);
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            });
        }
        bb
    }

    pub fn rotate90(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        BinaryMask::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    pub fn rotate90_times(&self, k: usize) -> BinaryMask {
        (0..k % 4).fold(self.clone(), |m, _| m.rotate90())
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        let buf = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer size matches")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::file(path, e))?.to_luma8();
        Ok(BinaryMask {
            width: img.width() as usize,
            height: img.height() as usize,
            bits: img.as_raw().iter().map(|&v| v >= 128).collect(),
        })
    }
}

/// Mask anchored at an offset inside a larger frame; keeps per-instance storage small.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalMask {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    /// Row-major foreground flags of the local window.
    pub bits: Vec<bool>,
}

impl LocalMask {
    pub fn from_mask(x0: usize, y0: usize, mask: &BinaryMask) -> Self {
        LocalMask {
            x0,
            y0,
            width: mask.width(),
            height: mask.height(),
            bits: mask.bits().to_vec(),
        }
    }

    /// A filled rectangle, used when only a box is known.
    pub fn rect(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        LocalMask {
            x0,
            y0,
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0
            && y >= self.y0
            && x < self.x0 + self.width
            && y < self.y0 + self.height
            && self.bits[(y - self.y0) * self.width + (x - self.x0)]
    }

    /// Foreground pixels in frame coordinates.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (self.x0 + i % self.width, self.y0 + i / self.width))
    }

    /// Tight inclusive bounding box in frame coordinates.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.points() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            });
        }
        bb
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (x, y) in self.points() {
            sx += x as f64;
            sy += y as f64;
            n += 1;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    pub fn intersects(&self, other: &LocalMask) -> bool {
        let x_lo = self.x0.max(other.x0);
        let y_lo = self.y0.max(other.y0);
        let x_hi = (self.x0 + self.width).min(other.x0 + other.width);
        let y_hi = (self.y0 + self.height).min(other.y0 + other.height);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                if self.contains(x, y) && other.contains(x, y) {
                    return true;
                }
            }
        }
        false
    }

    /// Square dilation by `r` pixels, clipped at the frame origin.
    pub fn dilated(&self, r: usize) -> LocalMask {
        let nx0 = self.x0.saturating_sub(r);
        let ny0 = self.y0.saturating_sub(r);
        let w = self.x0 + self.width + r - nx0;
        let h = self.y0 + self.height + r - ny0;
        let mut bits = vec![false; w * h];
        for (x, y) in self.points() {
            for yy in y.saturating_sub(r)..=y + r {
                for xx in x.saturating_sub(r)..=x + r {
                    bits[(yy - ny0) * w + (xx - nx0)] = true;
                }
            }
        }
        LocalMask {
            x0: nx0,
            y0: ny0,
            width: w,
            height: h,
            bits,
        }
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_bits(self.width, self.height, self.bits.clone()).expect("consistent")
    }
}
