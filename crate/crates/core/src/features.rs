//! Per-location feature maps: the built-in handcrafted extractor and the
//! `CAMF` tensor format for features computed elsewhere.
//!
//! The built-in extractor samples every second pixel and describes a 5x5
//! window around it with 17 values:
//!
//! | index  | feature                                                   |
//! |--------|-----------------------------------------------------------|
//! | 0..3   | mean R, G, B                                              |
//! | 3..6   | standard deviation of R, G, B                             |
//! | 6..14  | 8-bin gradient orientation histogram, magnitude weighted  |
//! | 14     | mean gradient magnitude                                   |
//! | 15     | 16-bin luminance entropy (bits), around the window mean   |
//! | 16     | luminance range (max - min)                               |
//!
//! Windows replicate the frame border. Both histograms use linear soft
//! binning so every feature is a continuous function of the pixel values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImagePlane};

pub const BUILTIN_DIM: usize = 17;
pub const BUILTIN_ID: &str = "builtin-handcrafted-17";
const ORIENTATION_BINS: usize = 8;
const ENTROPY_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// Row-major `height x width x dim`.
    pub data: Vec<f64>,
    pub extractor_id: String,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>, extractor_id: impl Into<String>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Shape(format!("feature dimension must be >= 2, got {dim}")));
        }
        if data.len() != width * height * dim {
            return Err(Error::Shape(format!(
                "{width}x{height}x{dim} feature map needs {} values, got {}",
                width * height * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("feature map contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            dim,
            data,
            extractor_id: extractor_id.into(),
        })
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.dim;
        &self.data[i..i + self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltinParams {
    pub stride: usize,
    pub window: usize,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self { stride: 2, window: 5 }
    }
}

pub fn extract_builtin(img: &ImagePlane, params: &BuiltinParams) -> FeatureMap {
    let rgb = img.to_rgb();
    let (w, h) = (rgb.width(), rgb.height());
    let lum: Vec<f64> = rgb
        .data()
        .chunks(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    let (gx, gy) = sobel(&lum, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();

    let stride = params.stride.max(1);
    let r = (params.window.max(1) / 2) as isize;
    let gw = w.div_ceil(stride);
    let gh = h.div_ceil(stride);
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut data = Vec::with_capacity(gw * gh * BUILTIN_DIM);
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;

    for gy_ in 0..gh {
        for gx_ in 0..gw {
            let (cx, cy) = ((gx_ * stride) as isize, (gy_ * stride) as isize);
            let mut sum = [0.0f64; 3];
            let mut sq = [0.0f64; 3];
            let mut orient = [0.0f64; ORIENTATION_BINS];
            let mut mag_sum = 0.0;
            let mut lmin = f64::INFINITY;
            let mut lmax = f64::NEG_INFINITY;
            let mut lsum = 0.0;
            let mut idx = Vec::with_capacity(n as usize);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (clamp(cx + dx, w), clamp(cy + dy, h));
                    let i = y * w + x;
                    idx.push(i);
                    let p = rgb.pixel(x, y);
                    for c in 0..3 {
                        sum[c] += p[c] as f64;
                        sq[c] += (p[c] as f64) * (p[c] as f64);
                    }
                    let m = mag[i];
                    mag_sum += m;
                    if m > 0.0 {
                        let u = gy[i].atan2(gx[i]) / (2.0 * std::f64::consts::PI / ORIENTATION_BINS as f64);
                        let u = u.rem_euclid(ORIENTATION_BINS as f64);
                        let b0 = u.floor();
                        let frac = u - b0;
                        let b0 = b0 as usize % ORIENTATION_BINS;
                        orient[b0] += (1.0 - frac) * m;
                        orient[(b0 + 1) % ORIENTATION_BINS] += frac * m;
                    }
                    lmin = lmin.min(lum[i]);
                    lmax = lmax.max(lum[i]);
                    lsum += lum[i];
                }
            }
            let lmean = lsum / n;
            let mut hist = [0.0f64; ENTROPY_BINS];
            let centre = (ENTROPY_BINS / 2) as f64;
            for &i in &idx {
                let v = (centre + (lum[i] - lmean) * ENTROPY_BINS as f64).clamp(0.0, (ENTROPY_BINS - 1) as f64);
                let b0 = v.floor();
                let frac = v - b0;
                let b0 = b0 as usize;
                hist[b0] += 1.0 - frac;
                if frac > 0.0 {
                    hist[b0 + 1] += frac;
                }
            }
            let entropy: f64 = hist
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| {
                    let p = c / n;
                    -p * p.log2()
                })
                .sum();

            for c in 0..3 {
                data.push(sum[c] / n);
            }
            for c in 0..3 {
                let m = sum[c] / n;
                data.push((sq[c] / n - m * m).max(0.0).sqrt());
            }
            data.extend(orient.iter().map(|o| o / n));
            data.push(mag_sum / n);
            data.push(entropy.max(0.0));
            data.push(lmax - lmin);
        }
    }
    FeatureMap {
        width: gw,
        height: gh,
        dim: BUILTIN_DIM,
        data,
        extractor_id: BUILTIN_ID.to_string(),
    }
}

/// Sobel gradients of a row-major plane with replicated borders.
pub(crate) fn sobel(lum: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |x: isize, y: isize| lum[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

const MAGIC: &[u8; 4] = b"CAMF";
const VERSION: u32 = 1;

/// Reads a `CAMF` v1 tensor: magic, then little-endian u32 version, H, W, D,
/// then `H*W*D` little-endian f32 values in row-major order.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_feature_bytes(&bytes, &path.display().to_string()).map_err(|m| Error::format(path, m))
}

fn parse_feature_bytes(mut bytes: &[u8], id: &str) -> std::result::Result<FeatureMap, String> {
    let mut magic = [0u8; 4];
    bytes.read_exact(&mut magic).map_err(|_| "file shorter than header")?;
    if &magic != MAGIC {
        return Err(format!("bad magic {magic:?}, expected CAMF"));
    }
    let mut word = || -> std::result::Result<u32, String> {
        let mut b = [0u8; 4];
        bytes.read_exact(&mut b).map_err(|_| "file shorter than header".to_string())?;
        Ok(u32::from_le_bytes(b))
    };
    let version = word()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (h, w, d) = (word()? as usize, word()? as usize, word()? as usize);
    let expected = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(d))
        .and_then(|v| v.checked_mul(4))
        .ok_or("header sizes overflow")?;
    if bytes.len() != expected {
        return Err(format!(
            "{h}x{w}x{d} tensor needs {expected} payload bytes, found {}",
            bytes.len()
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    FeatureMap::new(w, h, d, data, format!("external:{id}")).map_err(|e| e.to_string())
}

/// Writes `fm` as a `CAMF` v1 tensor (values narrowed to f32).
pub fn write_feature_file(path: impl AsRef<Path>, fm: &FeatureMap) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(20 + fm.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, fm.height as u32, fm.width as u32, fm.dim as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &v in &fm.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Maps a pixel-resolution mask onto a `gw x gh` feature grid. Each cell
/// covers a proportional block of pixels and joins the region when more than
/// half of that block is set; an exact half is left out.
pub fn downsample_mask(mask: &BinaryMask, gw: usize, gh: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(gw, gh, |i, j| {
        let x0 = i * w / gw;
        let x1 = ((i + 1) * w / gw).max(x0 + 1).min(w);
        let y0 = j * h / gh;
        let y1 = ((j + 1) * h / gh).max(y0 + 1).min(h);
        let mut set = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                set += mask.get(x, y) as usize;
            }
        }
        2 * set > (x1 - x0) * (y1 - y0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_features() {
        let img = ImagePlane::from_fn(10, 9, 3, |_, _, c| [0.2, 0.4, 0.6][c]);
        let fm = extract_builtin(&img, &BuiltinParams::default());
        assert_eq!((fm.width, fm.height, fm.dim), (5, 5, 17));
        for y in 0..fm.height {
            for x in 0..fm.width {
                let v = fm.vector(x, y);
                for c in 0..3 {
                    assert!((v[c] - [0.2, 0.4, 0.6][c]).abs() < 1e-6);
                }
                assert!(v[3..].iter().all(|&f| f.abs() < 1e-6), "{v:?}");
            }
        }
    }

    #[test]
    fn vertical_step_orientation() {
        let img = ImagePlane::from_fn(16, 16, 3, |x, _, _| if x >= 8 { 1.0 } else { 0.0 });
        let fm = extract_builtin(&img, &BuiltinParams::default());
        // grid column 4 is pixel column 8, right on the step
        let v = fm.vector(4, 4);
        let hist = &v[6..14];
        let total: f64 = hist.iter().sum();
        assert!(total > 0.0);
        // dark-to-bright going right: gradient along +x, the first bin
        assert!((hist[0] / total - 1.0).abs() < 1e-12, "{hist:?}");
        // far from the step nothing is recorded
        assert_eq!(fm.vector(0, 4)[6..14].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn camf_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.feat");
        let data: Vec<f64> = (0..3 * 2 * 32).map(|i| (i as f32 * 0.37).sin() as f64).collect();
        let fm = FeatureMap::new(2, 3, 32, data.clone(), "t").unwrap();
        write_feature_file(&p, &fm).unwrap();
        let back = read_feature_file(&p).unwrap();
        assert_eq!((back.width, back.height, back.dim), (2, 3, 32));
        assert_eq!(back.data, data);

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_feature_file(&p), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(read_feature_file(&p), Err(Error::Format { .. })));
        assert!(matches!(read_feature_file(dir.path().join("none.feat")), Err(Error::Io { .. })));
    }

    #[test]
    fn camf_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.feat");
        let fm = FeatureMap::new(3, 2, 2, vec![0.5; 12], "t").unwrap();
        write_feature_file(&p, &fm).unwrap();
        let b = std::fs::read(&p).unwrap();
        assert_eq!(&b[..4], b"CAMF");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes()); // H
        assert_eq!(&b[12..16], &3u32.to_le_bytes()); // W
        assert_eq!(&b[16..20], &2u32.to_le_bytes()); // D
        assert_eq!(&b[20..24], &0.5f32.to_le_bytes());
        assert_eq!(b.len(), 20 + 12 * 4);
    }

    #[test]
    fn majority_downsampling() {
        let m = BinaryMask::from_fn(4, 2, |x, y| x < 2 || (x == 2 && y == 0));
        let d = downsample_mask(&m, 2, 1);
        // left block 4/4 set, right block 1/4 set
        assert_eq!(d.bits(), &[true, false]);
        let half = BinaryMask::from_fn(2, 2, |x, _| x == 0);
        assert!(downsample_mask(&half, 1, 1).is_empty());
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(FeatureMap::new(1, 1, 1, vec![0.0], "x").is_err());
        assert!(FeatureMap::new(1, 1, 2, vec![0.0, f64::NAN], "x").is_err());
        assert!(FeatureMap::new(2, 1, 2, vec![0.0; 3], "x").is_err());
    }
}
