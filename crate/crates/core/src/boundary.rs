//! Contour extraction and the boundary visibility score.
//!
//! The score compares contours found in the image with the outline of the
//! mask, restricted to the trimap's boundary band. Contour pixels are matched
//! one-to-one within a small Chebyshev tolerance, so a detector that is off
//! by a pixel still agrees with the outline while extra contour pixels lower
//! precision.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sobel;
use crate::image::{BinaryMask, ImagePlane};
use crate::trimap::Trimap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourOrigin {
    BuiltinEdges,
    MaskOutline,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourMap {
    /// One channel of contour strength in `[0, 1]`.
    pub plane: ImagePlane,
    pub origin: ContourOrigin,
    pub binarize_threshold: f32,
}

impl ContourMap {
    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width(), self.height(), |x, y| {
            self.plane.get(x, y, 0) > self.binarize_threshold
        })
    }

    pub fn crop(&self, b: &crate::image::CropBox) -> ContourMap {
        ContourMap {
            plane: self.plane.crop(b),
            origin: self.origin,
            binarize_threshold: self.binarize_threshold,
        }
    }

    /// Wraps an externally computed contour map; colour maps are reduced to luminance.
    pub fn external(plane: ImagePlane, binarize_threshold: f32) -> ContourMap {
        ContourMap {
            plane: plane.to_gray(),
            origin: ContourOrigin::ExternalFile,
            binarize_threshold,
        }
    }

    pub fn load_external(path: impl AsRef<Path>, binarize_threshold: f32) -> Result<ContourMap> {
        Ok(Self::external(ImagePlane::load(path)?, binarize_threshold))
    }
}

/// Hysteresis thresholds as fractions of the strongest gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub high: f32,
    pub low: f32,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self { high: 0.2, low: 0.08 }
    }
}

/// Sobel magnitude, non-maximum suppression and double-threshold hysteresis.
///
/// Where two neighbours across an edge have the same magnitude (a sharp
/// step), the brighter one is kept, so a step yields a one-pixel line on its
/// bright side and a mask yields its inner outline.
pub fn detect_edges(img: &ImagePlane, params: &EdgeParams) -> ContourMap {
    let gray = img.to_gray();
    let (w, h) = (gray.width(), gray.height());
    let lum: Vec<f64> = gray.data().iter().map(|&v| v as f64).collect();
    let (gx, gy) = sobel(&lum, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let mut out = ImagePlane::filled(w, h, 1, 0.0);
    if max <= 1e-12 {
        return ContourMap {
            plane: out,
            origin: ContourOrigin::BuiltinEdges,
            binarize_threshold: 0.5,
        };
    }

    let tie = 1e-9 * max;
    let mut thin = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= tie {
                continue;
            }
            let (dx, dy) = quantized_direction(gx[i], gy[i]);
            let g = gray.get(x, y, 0);
            let mut keep = true;
            for s in [-1isize, 1] {
                let nx = x as isize + s * dx;
                let ny = y as isize + s * dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let nm = mag[j];
                if nm > m + tie || ((nm - m).abs() <= tie && gray.get(nx as usize, ny as usize, 0) > g) {
                    keep = false;
                    break;
                }
            }
            if keep {
                thin[i] = m / max;
            }
        }
    }

    let high = params.high as f64;
    let low = params.low as f64;
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut edge = vec![false; w * h];
    for i in 0..w * h {
        if thin[i] >= high {
            edge[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edge[j] && thin[j] >= low {
                    edge[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    for (i, &e) in edge.iter().enumerate() {
        if e {
            out.set(i % w, i / w, 0, 1.0);
        }
    }
    ContourMap {
        plane: out,
        origin: ContourOrigin::BuiltinEdges,
        binarize_threshold: 0.5,
    }
}

/// Gradient direction snapped to one of four axes, as a pixel step.
fn quantized_direction(gx: f64, gy: f64) -> (isize, isize) {
    let mut a = gy.atan2(gx).to_degrees();
    if a < 0.0 {
        a += 180.0;
    }
    if !(22.5..157.5).contains(&a) {
        (1, 0)
    } else if a < 67.5 {
        (1, 1)
    } else if a < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Contours of the mask rendered as an image, found by the same detector
/// that is applied to images. Borders are replicated, so the frame edge is
/// never a contour.
pub fn ground_truth_contours(mask: &BinaryMask) -> Result<ContourMap> {
    if mask.is_empty() {
        return Err(Error::Degenerate("empty mask has no contour".into()));
    }
    let mut c = detect_edges(&mask.to_plane(), &EdgeParams::default());
    c.origin = ContourOrigin::MaskOutline;
    Ok(c)
}

/// The mask's inner outline: set pixels with at least one unset 4-neighbour
/// inside the frame.
pub fn mask_outline(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        let (x, y) = (x as isize, y as isize);
        [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            nx >= 0 && ny >= 0 && nx < w && ny < h && !mask.get(nx as usize, ny as usize)
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Stats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub reference: usize,
}

/// Contour agreement inside `band`. Predicted and reference pixels are paired
/// one-to-one when their Chebyshev distance is at most `tolerance`; the
/// maximum number of such pairs gives both precision and recall. When either
/// side is empty the F1 is 0.
pub fn boundary_f1(
    c_gt: &ContourMap,
    c: &ContourMap,
    band: &BinaryMask,
    tolerance: usize,
) -> Result<F1Stats> {
    let (w, h) = (band.width(), band.height());
    if (c_gt.width(), c_gt.height()) != (w, h) || (c.width(), c.height()) != (w, h) {
        return Err(Error::Shape(format!(
            "contour maps {}x{} / {}x{} do not match band {}x{}",
            c_gt.width(),
            c_gt.height(),
            c.width(),
            c.height(),
            w,
            h
        )));
    }
    let gt = c_gt.to_mask().and(band);
    let pred = c.to_mask().and(band);

    let mut right_id = vec![usize::MAX; w * h];
    let mut n_right = 0;
    for (i, &b) in gt.bits().iter().enumerate() {
        if b {
            right_id[i] = n_right;
            n_right += 1;
        }
    }
    let t = tolerance as isize;
    let mut adj: Vec<Vec<usize>> = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            if !pred.get(x as usize, y as usize) {
                continue;
            }
            let mut nb = Vec::new();
            // nearest candidates first helps the greedy pass
            let mut offsets: Vec<(isize, isize)> = (-t..=t)
                .flat_map(|dy| (-t..=t).map(move |dx| (dx, dy)))
                .collect();
            offsets.sort_by_key(|&(dx, dy)| (dx.abs().max(dy.abs()), dx.abs() + dy.abs()));
            for (dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let r = right_id[ny as usize * w + nx as usize];
                if r != usize::MAX {
                    nb.push(r);
                }
            }
            adj.push(nb);
        }
    }
    let matched = max_matching(&adj, n_right);
    let predicted = adj.len();
    let reference = n_right;
    let precision = if predicted > 0 { matched as f64 / predicted as f64 } else { 0.0 };
    let recall = if reference > 0 { matched as f64 / reference as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(F1Stats {
        precision,
        recall,
        f1,
        matched,
        predicted,
        reference,
    })
}

/// Size of a maximum bipartite matching (greedy start, then augmenting paths).
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    const FREE: usize = usize::MAX;
    let mut match_r = vec![FREE; n_right];
    let mut match_l = vec![FREE; adj.len()];
    for (l, nb) in adj.iter().enumerate() {
        if let Some(&r) = nb.iter().find(|&&r| match_r[r] == FREE) {
            match_r[r] = l;
            match_l[l] = r;
        }
    }
    let mut visited = vec![0u32; n_right];
    let mut stamp = 0u32;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for l0 in 0..adj.len() {
        if match_l[l0] != FREE {
            continue;
        }
        stamp += 1;
        stack.clear();
        stack.push((l0, 0));
        while let Some(top) = stack.last_mut() {
            let (l, i) = *top;
            if i >= adj[l].len() {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let r = adj[l][i];
            if visited[r] == stamp {
                continue;
            }
            visited[r] = stamp;
            if match_r[r] == FREE {
                for &(pl, pi) in stack.iter() {
                    let pr = adj[pl][pi - 1];
                    match_r[pr] = pl;
                    match_l[pl] = pr;
                }
                break;
            }
            stack.push((match_r[r], 0));
        }
    }
    match_l.iter().filter(|&&r| r != FREE).count()
}

/// One minus the contour agreement between `contours` and the mask outline
/// inside the trimap band.
pub fn boundary_score(
    mask: &BinaryMask,
    trimap: &Trimap,
    contours: &ContourMap,
    tolerance: usize,
) -> Result<f64> {
    let gt = ground_truth_contours(mask)?;
    let stats = boundary_f1(&gt, contours, &trimap.band, tolerance)?;
    Ok(1.0 - stats.f1)
}
