//! Square RGB patch grids over image regions.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImagePlane};
use crate::morphology::Integral;

/// Flattened `patch_side x patch_side x channels` vectors plus their top-left anchors.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub patch_side: usize,
    pub stride: usize,
    pub channels: usize,
    pub anchors: Vec<(usize, usize)>,
    data: Vec<f32>,
}

impl PatchGrid {
    pub fn dim(&self) -> usize {
        self.patch_side * self.patch_side * self.channels
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    #[inline]
    pub fn patch(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn from_anchors(
        img: &ImagePlane,
        patch_side: usize,
        stride: usize,
        anchors: Vec<(usize, usize)>,
    ) -> PatchGrid {
        let ch = img.channels();
        let mut data = Vec::with_capacity(anchors.len() * patch_side * patch_side * ch);
        for &(ax, ay) in &anchors {
            data.extend_from_slice(&read_patch(img, ax, ay, patch_side));
        }
        PatchGrid {
            patch_side,
            stride,
            channels: ch,
            anchors,
            data,
        }
    }
}

pub fn read_patch(img: &ImagePlane, ax: usize, ay: usize, side: usize) -> Vec<f32> {
    let ch = img.channels();
    let mut v = Vec::with_capacity(side * side * ch);
    for y in ay..ay + side {
        let row = &img.data()[(y * img.width() + ax) * ch..(y * img.width() + ax + side) * ch];
        v.extend_from_slice(row);
    }
    v
}

/// Tiling positions along one axis: `0, stride, 2*stride, ...` plus a final
/// position clamped so the last patch ends at the frame edge.
pub fn axis_anchors(len: usize, patch_side: usize, stride: usize) -> Vec<usize> {
    if patch_side > len {
        return Vec::new();
    }
    let last = len - patch_side;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

fn check_params(img: &ImagePlane, region: &BinaryMask, patch_side: usize, stride: usize) -> Result<()> {
    if patch_side == 0 || stride == 0 || stride > patch_side {
        return Err(Error::Parameter(format!(
            "need 1 <= stride <= patch_side, got patch_side {patch_side}, stride {stride}"
        )));
    }
    if !img.same_size(region) {
        return Err(Error::Shape("region and image sizes differ".into()));
    }
    Ok(())
}

/// All grid positions whose patch overlaps `region`. Every region pixel is
/// covered by at least one returned patch.
pub fn foreground_patches(
    img: &ImagePlane,
    region: &BinaryMask,
    patch_side: usize,
    stride: usize,
) -> Result<PatchGrid> {
    check_params(img, region, patch_side, stride)?;
    if region.is_empty() {
        return Err(Error::Degenerate("foreground region is empty".into()));
    }
    if patch_side > img.width().min(img.height()) {
        return Err(Error::Degenerate(format!(
            "{}x{} image cannot hold a {patch_side}px patch",
            img.width(),
            img.height()
        )));
    }
    let integral = Integral::new(region);
    let xs = axis_anchors(img.width(), patch_side, stride);
    let ys = axis_anchors(img.height(), patch_side, stride);
    let mut anchors = Vec::new();
    for &y in &ys {
        for &x in &xs {
            if integral.window(x, y, x + patch_side, y + patch_side) > 0 {
                anchors.push((x, y));
            }
        }
    }
    Ok(PatchGrid::from_anchors(img, patch_side, stride, anchors))
}

/// Grid positions whose patch lies entirely inside `region`. Anchors are in
/// row-major order, so a lower index means a lower `(y, x)`.
pub fn background_patches(
    img: &ImagePlane,
    region: &BinaryMask,
    patch_side: usize,
    stride: usize,
) -> Result<PatchGrid> {
    check_params(img, region, patch_side, stride)?;
    let full = (patch_side * patch_side) as u32;
    let integral = Integral::new(region);
    let xs = axis_anchors(img.width(), patch_side, stride);
    let ys = axis_anchors(img.height(), patch_side, stride);
    let mut anchors = Vec::new();
    for &y in &ys {
        for &x in &xs {
            if integral.window(x, y, x + patch_side, y + patch_side) == full {
                anchors.push((x, y));
            }
        }
    }
    if anchors.is_empty() {
        return Err(Error::InsufficientBackground { patch_side });
    }
    Ok(PatchGrid::from_anchors(img, patch_side, stride, anchors))
}
