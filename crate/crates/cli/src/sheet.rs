//! PNG contact sheet of ranked examples: best on the first row, worst on the second.

use std::path::Path;

use camoscore::{DatasetReport, Error, ImagePlane, Manifest};

use crate::{CliResult, ListingRow};

const TILE: usize = 96;
const GAP: usize = 4;

pub fn render(manifest: &Manifest, report: &DatasetReport, rows: &[ListingRow], out: &Path) -> CliResult<()> {
    let top: Vec<&ListingRow> = rows.iter().filter(|r| r.section == "top").collect();
    let bottom: Vec<&ListingRow> = rows.iter().filter(|r| r.section == "bottom").collect();
    let cols = top.len().max(bottom.len()).max(1);
    let (w, h) = (cols * (TILE + GAP) + GAP, 2 * (TILE + GAP) + GAP);
    let mut sheet = ImagePlane::filled(w, h, 3, 1.0);
    for (row, items) in [top, bottom].iter().enumerate() {
        for (col, item) in items.iter().enumerate() {
            let entry = manifest
                .examples
                .iter()
                .find(|e| e.id == item.id)
                .ok_or_else(|| Error::Consistency(format!("{} is not in the manifest", item.id)))?;
            let crop = report
                .per_example
                .iter()
                .find(|r| r.example_id == item.id)
                .map(|r| r.crop)
                .ok_or_else(|| Error::Consistency(format!("{} has no report", item.id)))?;
            let img = ImagePlane::load(&entry.image)?.to_rgb().crop(&crop);
            let (ox, oy) = (GAP + col * (TILE + GAP), GAP + row * (TILE + GAP));
            for y in 0..TILE {
                for x in 0..TILE {
                    let sx = x * img.width() / TILE;
                    let sy = y * img.height() / TILE;
                    sheet.pixel_mut(ox + x, oy + y).copy_from_slice(img.pixel(sx, sy));
                }
            }
        }
    }
    sheet.save_png(out)?;
    Ok(())
}
