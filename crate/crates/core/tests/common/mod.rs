#![allow(dead_code)]

use camoscore::{BinaryMask, ImagePlane};

pub fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx * dx + dy * dy < r * r
    })
}

/// Two-colour checkerboard; the object is cut from the same pattern.
pub fn checkerboard(w: usize, h: usize, cell: usize) -> ImagePlane {
    ImagePlane::from_fn(w, h, 3, |x, y, c| {
        let on = (x / cell + y / cell) % 2 == 0;
        let a = [0.55, 0.45, 0.30];
        let b = [0.35, 0.50, 0.25];
        if on { a[c] } else { b[c] }
    })
}

/// Object and background share one texture, so the outline is invisible.
pub fn matched_texture() -> (ImagePlane, BinaryMask) {
    (checkerboard(96, 96, 24), disk(96, 96, 48.0, 48.0, 16.0))
}

/// A saturated red disk on a blue field.
pub fn red_on_blue() -> (ImagePlane, BinaryMask) {
    let mask = disk(96, 96, 48.0, 48.0, 16.0);
    let img = ImagePlane::from_fn(96, 96, 3, |x, y, c| match (mask.get(x, y), c) {
        (true, 0) | (false, 2) => 0.9,
        _ => 0.05,
    });
    (img, mask)
}

/// Same shape with a smooth, low-contrast background and no outline.
pub fn smooth_hidden() -> (ImagePlane, BinaryMask) {
    let img = ImagePlane::from_fn(96, 96, 3, |x, y, c| {
        let v = 0.5 + 0.05 * ((x as f32) * 0.11).sin() * ((y as f32) * 0.07).cos();
        v * [1.0, 0.9, 0.7][c]
    });
    (img, disk(96, 96, 48.0, 48.0, 16.0))
}
