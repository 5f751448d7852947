//! Real-valued grayscale images and their PGM/PNG encodings.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Default maximum intensity (8-bit convention).
pub const DEFAULT_MAX: f64 = 255.0;

/// Row-major grid of intensities with pixel `(x, y)` centred at integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    max_value: f64,
}

/// Sample depth for exported images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, max_value: f64) -> Self {
        Self { width, height, data: vec![0.0; width * height], max_value }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>, max_value: f64) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::ImageSize(format!(
                "{width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ImageSize("non-finite sample".into()));
        }
        Ok(Self { width, height, data, max_value })
    }

    pub fn from_fn(width: usize, height: usize, max_value: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data, max_value }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
            max_value: self.max_value,
        }
    }

    pub fn with_max_value(mut self, max_value: f64) -> Self {
        self.max_value = max_value;
        self
    }

    /// Bilinear sample; `None` outside `[0, w−1] × [0, h−1]`.
    pub fn bilinear(&self, p: &Point) -> Option<f64> {
        let (x, y) = (p.x, p.y);
        let (wm, hm) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        if !(x >= 0.0 && y >= 0.0 && x <= wm && y <= hm) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Quantized integer samples in `[0, 2^bits − 1]`, scaled from `[0, max_value]`.
    fn quantize(&self, depth: BitDepth) -> Vec<u16> {
        let top = match depth {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        };
        let scale = if self.max_value > 0.0 { top / self.max_value } else { 0.0 };
        self.data
            .iter()
            .map(|&v| (v * scale).round().clamp(0.0, top) as u16)
            .collect()
    }

    fn to_dynamic(&self, depth: BitDepth) -> Result<DynamicImage> {
        let (w, h) = (self.width as u32, self.height as u32);
        let q = self.quantize(depth);
        let bad = || Error::ImageSize("buffer size".into());
        Ok(match depth {
            BitDepth::Eight => {
                let buf: GrayImage =
                    ImageBuffer::from_raw(w, h, q.iter().map(|&v| v as u8).collect()).ok_or_else(bad)?;
                DynamicImage::ImageLuma8(buf)
            }
            BitDepth::Sixteen => {
                let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w, h, q).ok_or_else(bad)?;
                DynamicImage::ImageLuma16(buf)
            }
        })
    }

    /// Writes binary PGM (P5) or grayscale PNG, chosen by the file extension.
    pub fn save(&self, path: &Path, depth: BitDepth) -> Result<()> {
        let format = ImageFormat::from_path(path)?;
        match format {
            ImageFormat::Png | ImageFormat::Pnm => {}
            other => return Err(Error::Format(format!("unsupported output format {other:?}"))),
        }
        if format == ImageFormat::Pnm {
            return self.write_pgm(path, depth);
        }
        self.to_dynamic(depth)?.save_with_format(path, format)?;
        Ok(())
    }

    /// Binary PGM; 16-bit samples are big-endian.
    fn write_pgm(&self, path: &Path, depth: BitDepth) -> Result<()> {
        let q = self.quantize(depth);
        let maxval = match depth {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        };
        let mut out = format!("P5\n{} {}\n{maxval}\n", self.width, self.height).into_bytes();
        match depth {
            BitDepth::Eight => out.extend(q.iter().map(|&v| v as u8)),
            BitDepth::Sixteen => out.extend(q.iter().flat_map(|v| v.to_be_bytes())),
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads any supported image, converting colour to luminance. The
    /// maximum intensity follows the stored sample depth (255 or 65535).
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let sixteen = matches!(
            img,
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_)
        );
        if sixteen {
            let g = img.to_luma16();
            let data = g.pixels().map(|p| p.0[0] as f64).collect();
            Self { width: g.width() as usize, height: g.height() as usize, data, max_value: 65535.0 }
        } else {
            let g = img.to_luma8();
            let data = g.pixels().map(|p| p.0[0] as f64).collect();
            Self { width: g.width() as usize, height: g.height() as usize, data, max_value: 255.0 }
        }
    }

    /// Image as it would read back after export at `depth`.
    pub fn quantized(&self, depth: BitDepth) -> Self {
        let top = match depth {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        };
        Self {
            width: self.width,
            height: self.height,
            data: self.quantize(depth).into_iter().map(f64::from).collect(),
            max_value: top,
        }
    }

    /// 8-bit RGB copy for annotation.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let q = self.quantize(BitDepth::Eight);
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = q[y as usize * self.width + x as usize] as u8;
            image::Rgb([v, v, v])
        })
    }
}
