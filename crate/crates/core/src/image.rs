//! Image and mask containers plus PNG/JPEG I/O.
//!
//! All intensities are stored as `f32` in `[0, 1]`, row-major, channels
//! interleaved. 8-bit inputs are divided by 255 on load and rounded back on
//! save, so an 8-bit PNG survives a load/save round trip bit for bit.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("image needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!((0.0..=1.0).contains(&value), "fill value outside [0, 1]");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds a plane from a per-pixel closure returning `channels` values.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        debug_assert!((0.0..=1.0).contains(&v));
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_size(&self, mask: &BinaryMask) -> bool {
        self.width == mask.width() && self.height == mask.height()
    }

    /// Luminance with the Rec. 601 weights; single-channel planes pass through.
    pub fn to_gray(&self) -> ImagePlane {
        match self.channels {
            1 => self.clone(),
            c if c >= 3 => ImagePlane::from_fn(self.width, self.height, 1, |x, y, _| {
                let p = self.pixel(x, y);
                0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
            }),
            _ => ImagePlane::from_fn(self.width, self.height, 1, |x, y, _| self.get(x, y, 0)),
        }
    }

    /// Three-channel view: gray is replicated, extra channels are dropped.
    pub fn to_rgb(&self) -> ImagePlane {
        match self.channels {
            3 => self.clone(),
            1 => ImagePlane::from_fn(self.width, self.height, 3, |x, y, _| self.get(x, y, 0)),
            _ => ImagePlane::from_fn(self.width, self.height, 3, |x, y, c| {
                self.get(x, y, c.min(self.channels - 1))
            }),
        }
    }

    pub fn crop(&self, b: &CropBox) -> ImagePlane {
        assert!(b.x1 <= self.width && b.y1 <= self.height && b.x0 < b.x1 && b.y0 < b.y1);
        ImagePlane::from_fn(b.width(), b.height(), self.channels, |x, y, c| {
            self.get(x + b.x0, y + b.y0, c)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ImagePlane> {
        let path = path.as_ref();
        let reader = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?;
        match reader.format() {
            Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
            other => {
                return Err(Error::format(
                    path,
                    format!("expected PNG or JPEG, found {other:?}"),
                ))
            }
        }
        let img = reader
            .decode()
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> ImagePlane {
        let has_color = img.color().has_color();
        if has_color {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            ImagePlane {
                width: rgb.width() as usize,
                height: rgb.height() as usize,
                channels: 3,
                data,
            }
        } else {
            let g = img.to_luma8();
            let data = g.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            ImagePlane {
                width: g.width() as usize,
                height: g.height() as usize,
                channels: 1,
                data,
            }
        }
    }

    /// Writes an 8-bit PNG. One-channel planes become grayscale, everything
    /// else is written as RGB from the first three channels.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let quant = |v: f32| (v * 255.0).round().clamp(0.0, 255.0) as u8;
        let (w, h) = (self.width as u32, self.height as u32);
        let result = if self.channels == 1 {
            let buf: Vec<u8> = self.data.iter().map(|&v| quant(v)).collect();
            GrayImage::from_raw(w, h, buf)
                .expect("buffer size matches")
                .save_with_format(path, image::ImageFormat::Png)
        } else {
            let rgb = self.to_rgb();
            let buf: Vec<u8> = rgb.data.iter().map(|&v| quant(v)).collect();
            RgbImage::from_raw(w, h, buf)
                .expect("buffer size matches")
                .save_with_format(path, image::ImageFormat::Png)
        };
        result.map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })
    }
}

/// One boolean per pixel, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{} ({} set)", self.width, self.height, self.count())?;
        if self.width * self.height <= 1024 {
            for y in 0..self.height {
                let row: String = (0..self.width)
                    .map(|x| if self.get(x, y) { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "{}x{} mask needs {} bits, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Axis-aligned filled rectangle `[x0, x1) x [y0, y1)` in a `width x height` frame.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    fn zip(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> BinaryMask {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "mask sizes differ"
        );
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a || b)
    }

    /// Pixels set in `self` but not in `other`.
    pub fn minus(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Tight bounding box of the set pixels, half-open.
    pub fn bounding_box(&self) -> Option<CropBox> {
        let mut bb: Option<CropBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let b = bb.get_or_insert(CropBox {
                        x0: x,
                        y0: y,
                        x1: x + 1,
                        y1: y + 1,
                    });
                    b.x0 = b.x0.min(x);
                    b.y0 = b.y0.min(y);
                    b.x1 = b.x1.max(x + 1);
                    b.y1 = b.y1.max(y + 1);
                }
            }
        }
        bb
    }

    pub fn crop(&self, b: &CropBox) -> BinaryMask {
        BinaryMask::from_fn(b.width(), b.height(), |x, y| self.get(x + b.x0, y + b.y0))
    }

    /// Places this mask at `b` inside an otherwise empty `width x height` frame.
    pub fn uncrop(&self, b: &CropBox, width: usize, height: usize) -> BinaryMask {
        assert_eq!((self.width, self.height), (b.width(), b.height()));
        BinaryMask::from_fn(width, height, |x, y| {
            b.contains(x, y) && self.get(x - b.x0, y - b.y0)
        })
    }

    pub fn to_plane(&self) -> ImagePlane {
        ImagePlane {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let plane = ImagePlane::load(path)?;
        binarize(&plane.to_gray())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_plane().save_png(path)
    }
}

/// Thresholds a single-channel plane: a bit is set iff its value exceeds 0.5.
pub fn binarize(img: &ImagePlane) -> Result<BinaryMask> {
    if img.channels() != 1 {
        return Err(Error::Shape(format!(
            "binarize expects 1 channel, got {}",
            img.channels()
        )));
    }
    Ok(BinaryMask {
        width: img.width(),
        height: img.height(),
        bits: img.data().iter().map(|&v| v > 0.5).collect(),
    })
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CropBox {
    pub fn full(width: usize, height: usize) -> Self {
        CropBox {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains_box(&self, other: &CropBox) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }
}
