//! Adaptive trimap construction and object-centred cropping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, CropBox, ImagePlane};
use crate::morphology::{dilate, erode};

/// Fraction of the mask area the eroded foreground should keep.
pub const ERODE_AREA_RATIO: f64 = 0.8;
/// Area of the dilated mask relative to the original.
pub const DILATE_AREA_RATIO: f64 = 1.2;

/// Inclusive range of structuring-element sides to search; only odd sides are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRange {
    pub min: usize,
    pub max: usize,
}

impl Default for KernelRange {
    fn default() -> Self {
        Self { min: 1, max: 21 }
    }
}

impl KernelRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::Parameter(format!("bad kernel range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    /// Odd sides in the range, ascending. Side 1 is always included so that
    /// erosion has a non-empty fallback.
    pub fn candidates(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (self.min..=self.max).filter(|k| k % 2 == 1).collect();
        if v.first() != Some(&1) {
            v.insert(0, 1);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum KernelPolicy {
    Adaptive { range: KernelRange },
    Fixed { erode: usize, dilate: usize },
}

impl Default for KernelPolicy {
    fn default() -> Self {
        KernelPolicy::Adaptive {
            range: KernelRange::default(),
        }
    }
}

fn closest_by_area(
    mask: &BinaryMask,
    candidates: &[usize],
    target: f64,
    op: fn(&BinaryMask, usize) -> Result<BinaryMask>,
    require_nonempty: bool,
) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &k in candidates {
        let area = op(mask, k)?.count();
        if require_nonempty && area == 0 {
            continue;
        }
        let gap = (area as f64 - target).abs();
        // strict comparison keeps the smaller kernel on ties
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, k));
        }
    }
    Ok(best.map(|(_, k)| k).unwrap_or(1))
}

/// Picks erosion and dilation sides whose output areas are closest to 80%
/// and 120% of the mask area.
pub fn select_kernels(mask: &BinaryMask, range: &KernelRange) -> Result<(usize, usize)> {
    let area = mask.count();
    if area == 0 {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let candidates = range.candidates();
    let ke = closest_by_area(mask, &candidates, ERODE_AREA_RATIO * area as f64, erode, true)?;
    let kd = closest_by_area(mask, &candidates, DILATE_AREA_RATIO * area as f64, dilate, false)?;
    Ok((ke, kd))
}

/// Foreground core, background, and the boundary band between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    pub fg: BinaryMask,
    pub bg: BinaryMask,
    pub band: BinaryMask,
    pub erode_kernel: usize,
    pub dilate_kernel: usize,
}

impl Trimap {
    pub fn width(&self) -> usize {
        self.fg.width()
    }

    pub fn height(&self) -> usize {
        self.fg.height()
    }
}

pub fn make_trimap(mask: &BinaryMask, policy: &KernelPolicy) -> Result<Trimap> {
    if mask.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let (ke, kd) = match *policy {
        KernelPolicy::Adaptive { range } => select_kernels(mask, &range)?,
        KernelPolicy::Fixed { erode, dilate } => (erode, dilate),
    };
    let fg = erode(mask, ke)?;
    let bg = dilate(mask, kd)?.complement();
    let band = fg.or(&bg).complement();
    Ok(Trimap {
        fg,
        bg,
        band,
        erode_kernel: ke,
        dilate_kernel: kd,
    })
}

/// Bounding box of the mask grown by `margin` times its width/height on
/// every side, clamped to the frame.
pub fn crop_box(mask: &BinaryMask, margin: f64) -> Result<CropBox> {
    let bb = mask
        .bounding_box()
        .ok_or_else(|| Error::Degenerate("empty mask".into()))?;
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Parameter(format!("crop margin {margin} must be >= 0")));
    }
    let mx = (bb.width() as f64 * margin).round() as usize;
    let my = (bb.height() as f64 * margin).round() as usize;
    Ok(CropBox {
        x0: bb.x0.saturating_sub(mx),
        y0: bb.y0.saturating_sub(my),
        x1: (bb.x1 + mx).min(mask.width()),
        y1: (bb.y1 + my).min(mask.height()),
    })
}

pub fn crop_to_object(
    img: &ImagePlane,
    mask: &BinaryMask,
    margin: f64,
) -> Result<(ImagePlane, BinaryMask, CropBox)> {
    if !img.same_size(mask) {
        return Err(Error::Shape(format!(
            "image is {}x{}, mask is {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let b = crop_box(mask, margin)?;
    Ok((img.crop(&b), mask.crop(&b), b))
}
