//! Foreground reconstruction from background patches and the reconstruction
//! fidelity score.
//!
//! Every foreground patch is replaced by its nearest background patch;
//! overlapping replacements are averaged per pixel. A foreground pixel counts
//! as reconstructed when the RGB error is below `lambda` times the pixel's
//! own RGB norm. The score is the fraction of reconstructed foreground
//! pixels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImagePlane};
use crate::knn::{ExactIndex, ForestParams, KdForest, NearestPatch};
use crate::patches::{background_patches, foreground_patches};
use crate::trimap::Trimap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SearchMode {
    Exact,
    Approximate(ForestParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconParams {
    pub patch_side: usize,
    /// Step between foreground patch anchors; `patch_side - stride` is the overlap.
    pub stride: usize,
    /// Step between candidate background patch anchors.
    pub bg_stride: usize,
    pub lambda: f64,
    pub search: SearchMode,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            patch_side: 7,
            stride: 4,
            bg_stride: 1,
            lambda: 0.2,
            search: SearchMode::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// The image with the foreground replaced by background patches.
    pub image: ImagePlane,
    /// Foreground pixels that passed the lambda test.
    pub per_pixel_hit: BinaryMask,
    pub s_rf: f64,
    /// Squared distance from each foreground patch to its replacement.
    pub patch_errors: Vec<f64>,
    /// `(|p - p_hat|, |p|)` per foreground pixel in row-major order.
    residuals: Vec<(f64, f64)>,
}

impl Reconstruction {
    /// Re-evaluates the score with a different threshold on the same reconstruction.
    pub fn s_rf_at(&self, lambda: f64) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        let hits = self
            .residuals
            .iter()
            .filter(|(err, norm)| *err < lambda * *norm)
            .count();
        hits as f64 / self.residuals.len() as f64
    }
}

pub fn reconstruct_foreground(
    img: &ImagePlane,
    trimap: &Trimap,
    params: &ReconParams,
) -> Result<Reconstruction> {
    if !img.same_size(&trimap.fg) {
        return Err(Error::Shape("image and trimap sizes differ".into()));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be > 0, got {}", params.lambda)));
    }
    let rgb = img.to_rgb();
    let fg_grid = foreground_patches(&rgb, &trimap.fg, params.patch_side, params.stride)?;
    let bg_grid = background_patches(&rgb, &trimap.bg, params.patch_side, params.bg_stride)?;

    let matches: Vec<(usize, f64)> = match params.search {
        SearchMode::Exact => {
            let index = ExactIndex::new(&bg_grid);
            query_all(&index, &fg_grid)
        }
        SearchMode::Approximate(fp) => {
            let index = KdForest::new(&bg_grid, &fp);
            query_all(&index, &fg_grid)
        }
    };

    let (w, h) = (rgb.width(), rgb.height());
    let n = params.patch_side;
    let mut sums = vec![0.0f64; w * h * 3];
    let mut counts = vec![0u32; w * h];
    for (k, &(ax, ay)) in fg_grid.anchors.iter().enumerate() {
        let src = bg_grid.patch(matches[k].0);
        for dy in 0..n {
            for dx in 0..n {
                let p = (ay + dy) * w + ax + dx;
                counts[p] += 1;
                for c in 0..3 {
                    sums[p * 3 + c] += src[(dy * n + dx) * 3 + c] as f64;
                }
            }
        }
    }

    let mut recon = rgb.clone();
    for p in 0..w * h {
        if counts[p] > 0 {
            let px = recon.pixel_mut(p % w, p / w);
            for c in 0..3 {
                px[c] = (sums[p * 3 + c] / counts[p] as f64) as f32;
            }
        }
    }

    let mut hit = BinaryMask::new(w, h);
    let mut residuals = Vec::with_capacity(trimap.fg.count());
    for y in 0..h {
        for x in 0..w {
            if !trimap.fg.get(x, y) {
                continue;
            }
            let (err, norm) = pixel_residual(rgb.pixel(x, y), recon.pixel(x, y));
            if err < params.lambda * norm {
                hit.set(x, y, true);
            }
            residuals.push((err, norm));
        }
    }
    let s_rf = hit.count() as f64 / residuals.len() as f64;
    Ok(Reconstruction {
        image: recon,
        per_pixel_hit: hit,
        s_rf,
        patch_errors: matches.iter().map(|m| m.1).collect(),
        residuals,
    })
}

fn query_all(index: &impl NearestPatch, fg: &crate::patches::PatchGrid) -> Vec<(usize, f64)> {
    (0..fg.len())
        .into_par_iter()
        .map(|k| {
            let nb = index.nearest(fg.patch(k));
            (nb.index, nb.dist2)
        })
        .collect()
}

/// Euclidean RGB error and the original pixel's RGB norm.
fn pixel_residual(orig: &[f32], recon: &[f32]) -> (f64, f64) {
    let mut e = 0.0f64;
    let mut n = 0.0f64;
    for c in 0..3 {
        let o = orig[c] as f64;
        let d = o - recon[c] as f64;
        e += d * d;
        n += o * o;
    }
    (e.sqrt(), n.sqrt())
}
