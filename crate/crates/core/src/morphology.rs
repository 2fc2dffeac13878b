//! Binary erosion and dilation with a square structuring element.
//!
//! Pixels outside the frame count as background, so erosion eats in from
//! the frame border and dilation never reaches outside it.

use crate::error::{Error, Result};
use crate::image::BinaryMask;

fn check_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::Parameter(format!(
            "structuring element side must be odd and >= 1, got {kernel}"
        )));
    }
    Ok(())
}

/// Summed-area table with a zero row and column prepended.
pub(crate) struct Integral {
    stride: usize,
    sums: Vec<u32>,
}

impl Integral {
    pub(crate) fn new(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += mask.get(x, y) as u32;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Count of set pixels in `[x0, x1) x [y0, y1)`.
    #[inline]
    pub(crate) fn window(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u32 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0]
            - self.sums[y0 * s + x1]
            - self.sums[y1 * s + x0]
    }
}

pub fn erode(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    check_kernel(kernel)?;
    if kernel == 1 {
        return Ok(mask.clone());
    }
    let r = kernel / 2;
    let (w, h) = (mask.width(), mask.height());
    let full = (kernel * kernel) as u32;
    let integral = Integral::new(mask);
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        // any part of the window outside the frame is background
        if x < r || y < r || x + r >= w || y + r >= h {
            return false;
        }
        integral.window(x - r, y - r, x + r + 1, y + r + 1) == full
    }))
}

pub fn dilate(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    check_kernel(kernel)?;
    if kernel == 1 {
        return Ok(mask.clone());
    }
    let r = kernel / 2;
    let (w, h) = (mask.width(), mask.height());
    let integral = Integral::new(mask);
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(w);
        let y1 = (y + r + 1).min(h);
        integral.window(x0, y0, x1, y1) > 0
    }))
}
