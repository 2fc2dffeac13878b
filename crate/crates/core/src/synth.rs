//! Synthetic camouflage sequences.
//!
//! An object is cut from an (image, mask) pair and moved along a random
//! translational trajectory over a background plate, which itself moves
//! independently. The plate is the source image with the object's hole
//! filled. Static segments copy the background motion into the object so
//! that it briefly stays still relative to its surroundings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, CropBox, ImagePlane};
use crate::knn::ExactIndex;
use crate::patches::background_patches;
use crate::score::{DatasetKind, Manifest, ManifestEntry};

/// Side of the patches used to fill background holes.
pub const FILL_PATCH: usize = 7;
pub const DEFAULT_MAX_STEP: i32 = 3;
pub const TRAIN_FRACTION: f64 = 0.8;

/// An object cut out by its mask; the mask acts as a binary alpha channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Sprite {
    pub rgb: ImagePlane,
    pub alpha: BinaryMask,
    /// Top-left corner in the source image.
    pub origin: (usize, usize),
}

impl Sprite {
    pub fn from_pair(img: &ImagePlane, mask: &BinaryMask) -> Result<Sprite> {
        if !img.same_size(mask) {
            return Err(Error::Shape("image and mask sizes differ".into()));
        }
        let b = mask
            .bounding_box()
            .ok_or_else(|| Error::Degenerate("empty mask has no sprite".into()))?;
        Ok(Sprite {
            rgb: img.to_rgb().crop(&b),
            alpha: mask.crop(&b),
            origin: (b.x0, b.y0),
        })
    }

    pub fn width(&self) -> usize {
        self.alpha.width()
    }

    pub fn height(&self) -> usize {
        self.alpha.height()
    }
}

/// Fills the masked hole by onion peeling: the unknown pixel with the most
/// known 8-neighbours (then lowest `(y, x)`) takes the centre of the known
/// background patch that best matches its known surroundings.
pub fn fill_background(img: &ImagePlane, mask: &BinaryMask) -> Result<ImagePlane> {
    if !img.same_size(mask) {
        return Err(Error::Shape("image and mask sizes differ".into()));
    }
    let rgb = img.to_rgb();
    if mask.is_empty() {
        return Ok(rgb);
    }
    let (w, h) = (rgb.width(), rgb.height());
    if mask.count() == w * h {
        return Err(Error::CannotFill("mask covers the whole frame".into()));
    }
    let known_region = mask.complement();
    let grid = background_patches(&rgb, &known_region, FILL_PATCH, 1).map_err(|e| match e {
        Error::InsufficientBackground { .. } => Error::CannotFill(format!(
            "no {FILL_PATCH}x{FILL_PATCH} patch lies fully outside the hole"
        )),
        e => e,
    })?;
    let index = ExactIndex::new(&grid);

    let mut out = rgb.clone();
    let mut known = known_region.bits().to_vec();
    let r = (FILL_PATCH / 2) as isize;
    let neighbours = |x: usize, y: usize| {
        let mut v = Vec::with_capacity(8);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if (dx, dy) != (0, 0) && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    v.push((nx as usize, ny as usize));
                }
            }
        }
        v
    };
    let count_known = |known: &[bool], x: usize, y: usize| {
        neighbours(x, y).iter().filter(|&&(nx, ny)| known[ny * w + nx]).count()
    };

    // keys are (8 - known neighbours, y, x)
    let mut front = BTreeSet::new();
    let mut key = vec![None::<usize>; w * h];
    for y in 0..h {
        for x in 0..w {
            if !known[y * w + x] {
                let c = count_known(&known, x, y);
                if c > 0 {
                    front.insert((8 - c, y, x));
                    key[y * w + x] = Some(8 - c);
                }
            }
        }
    }

    let dim = FILL_PATCH * FILL_PATCH * 3;
    let mut query = vec![0.0f32; dim];
    let mut valid = vec![false; dim];
    while let Some((_, y, x)) = front.pop_first() {
        key[y * w + x] = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let (px, py) = (x as isize + dx, y as isize + dy);
                let k = ((dy + r) as usize * FILL_PATCH + (dx + r) as usize) * 3;
                let inside = px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h;
                let ok = inside && known[py as usize * w + px as usize];
                for c in 0..3 {
                    valid[k + c] = ok;
                    query[k + c] = if ok { out.get(px as usize, py as usize, c) } else { 0.0 };
                }
            }
        }
        let best = index.nearest_masked(&query, &valid);
        let src = grid.patch(best.index);
        let centre = ((r as usize) * FILL_PATCH + r as usize) * 3;
        for c in 0..3 {
            out.set(x, y, c, src[centre + c]);
        }
        known[y * w + x] = true;
        for (nx, ny) in neighbours(x, y) {
            let i = ny * w + nx;
            if known[i] {
                continue;
            }
            let c = count_known(&known, nx, ny);
            if let Some(old) = key[i] {
                front.remove(&(old, ny, nx));
            }
            front.insert((8 - c, ny, nx));
            key[i] = Some(8 - c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlateSource {
    BuiltinFill,
    External { path: PathBuf },
}

/// Motion of one synthetic sequence. `fg_traj[t]` and `bg_traj[t]` move
/// frame `t - 1` to frame `t`; entry 0 is always `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub seed: u64,
    pub length: usize,
    pub frame_size: (usize, usize),
    pub sprite_size: (usize, usize),
    /// Sprite top-left corner in frame 0.
    pub start: (i64, i64),
    pub fg_traj: Vec<(i32, i32)>,
    pub bg_traj: Vec<(i32, i32)>,
    /// Half-open frame ranges with equal object and background motion.
    pub static_segments: Vec<(usize, usize)>,
    pub sprite_source: String,
    pub plate_source: PlateSource,
}

impl SequenceSpec {
    /// Sprite top-left corner at every frame.
    pub fn fg_positions(&self) -> Vec<(i64, i64)> {
        accumulate(self.start, &self.fg_traj)
    }

    /// Accumulated plate offset at every frame.
    pub fn bg_offsets(&self) -> Vec<(i64, i64)> {
        accumulate((0, 0), &self.bg_traj)
    }

    pub fn check(&self) -> Result<()> {
        let (fw, fh) = self.frame_size;
        let (sw, sh) = self.sprite_size;
        if self.fg_traj.len() != self.length || self.bg_traj.len() != self.length {
            return Err(Error::Parameter("trajectory length differs from sequence length".into()));
        }
        for (t, &(x, y)) in self.fg_positions().iter().enumerate() {
            if x < 0 || y < 0 || x as usize + sw > fw || y as usize + sh > fh {
                return Err(Error::Parameter(format!("sprite leaves the frame at frame {t}")));
            }
        }
        for &(s, e) in &self.static_segments {
            if s >= e || e > self.length || (s..e).any(|t| self.fg_traj[t] != self.bg_traj[t]) {
                return Err(Error::Parameter(format!("static segment [{s}, {e}) is not static")));
            }
        }
        Ok(())
    }
}

fn accumulate(start: (i64, i64), traj: &[(i32, i32)]) -> Vec<(i64, i64)> {
    let mut p = start;
    traj.iter()
        .map(|&(dx, dy)| {
            p = (p.0 + dx as i64, p.1 + dy as i64);
            p
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Per-frame displacements are drawn from `-max_step..=max_step` on each axis.
    pub max_step: i32,
    pub max_static_segments: usize,
    pub static_len: (usize, usize),
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            max_step: DEFAULT_MAX_STEP,
            max_static_segments: 2,
            static_len: (3, 8),
        }
    }
}

/// Draws a start position and trajectories. Object steps that would leave
/// the frame are reflected; inside a static segment the background step is
/// reflected with it.
pub fn sample_trajectories(
    frame_size: (usize, usize),
    sprite_size: (usize, usize),
    length: usize,
    params: &TrajectoryParams,
    seed: u64,
) -> Result<SequenceSpec> {
    let (fw, fh) = frame_size;
    let (sw, sh) = sprite_size;
    if sw > fw || sh > fh || sw == 0 || sh == 0 {
        return Err(Error::Parameter(format!(
            "a {sw}x{sh} sprite does not fit a {fw}x{fh} frame"
        )));
    }
    if length == 0 {
        return Err(Error::Parameter("sequence length must be >= 1".into()));
    }
    if params.max_step < 0 || params.static_len.0 == 0 || params.static_len.0 > params.static_len.1 {
        return Err(Error::Parameter("invalid trajectory parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (max_x, max_y) = ((fw - sw) as i64, (fh - sh) as i64);
    let start = (rng.random_range(0..=max_x), rng.random_range(0..=max_y));

    let mut static_segments: Vec<(usize, usize)> = Vec::new();
    let wanted = rng.random_range(0..=params.max_static_segments);
    for _ in 0..wanted {
        for _attempt in 0..16 {
            let len = rng.random_range(params.static_len.0..=params.static_len.1);
            if len + 1 > length {
                break;
            }
            let s = rng.random_range(1..=length - len);
            let e = s + len;
            if static_segments.iter().all(|&(a, b)| e <= a || s >= b) {
                static_segments.push((s, e));
                break;
            }
        }
    }
    static_segments.sort_unstable();
    let is_static = |t: usize| static_segments.iter().any(|&(s, e)| s <= t && t < e);

    let m = params.max_step;
    let mut fg_traj = vec![(0, 0)];
    let mut bg_traj = vec![(0, 0)];
    let mut pos = start;
    for t in 1..length {
        let bg = (rng.random_range(-m..=m), rng.random_range(-m..=m));
        let fg = if is_static(t) {
            bg
        } else {
            (rng.random_range(-m..=m), rng.random_range(-m..=m))
        };
        let fx = reflect(pos.0, fg.0, max_x);
        let fy = reflect(pos.1, fg.1, max_y);
        pos = (pos.0 + fx as i64, pos.1 + fy as i64);
        fg_traj.push((fx, fy));
        bg_traj.push(if is_static(t) { (fx, fy) } else { bg });
    }
    Ok(SequenceSpec {
        seed,
        length,
        frame_size,
        sprite_size,
        start,
        fg_traj,
        bg_traj,
        static_segments,
        sprite_source: String::new(),
        plate_source: PlateSource::BuiltinFill,
    })
}

/// Step `d` from `p` within `0..=max`, reversed when it would leave the range
/// and dropped when neither direction fits.
pub fn reflect(p: i64, d: i32, max: i64) -> i32 {
    let inside = |d: i32| (0..=max).contains(&(p + d as i64));
    if inside(d) {
        d
    } else if inside(-d) {
        -d
    } else {
        0
    }
}

/// Renders every frame: the plate shifted with wrap-around by the
/// accumulated background offset, and the sprite pasted at its position.
pub fn composite_sequence(
    sprite: &Sprite,
    plate: &ImagePlane,
    spec: &SequenceSpec,
) -> Result<(Vec<ImagePlane>, Vec<BinaryMask>)> {
    spec.check()?;
    let (w, h) = spec.frame_size;
    if (plate.width(), plate.height()) != (w, h) {
        return Err(Error::Shape(format!(
            "plate is {}x{}, frames are {w}x{h}",
            plate.width(),
            plate.height()
        )));
    }
    if (sprite.width(), sprite.height()) != spec.sprite_size {
        return Err(Error::Shape("sprite size differs from the sequence spec".into()));
    }
    let plate = plate.to_rgb();
    let mut frames = Vec::with_capacity(spec.length);
    let mut masks = Vec::with_capacity(spec.length);
    for (&(ox, oy), &(px, py)) in spec.bg_offsets().iter().zip(&spec.fg_positions()) {
        let mut frame = ImagePlane::from_fn(w, h, 3, |x, y, c| {
            let sx = (x as i64 - ox).rem_euclid(w as i64) as usize;
            let sy = (y as i64 - oy).rem_euclid(h as i64) as usize;
            plate.get(sx, sy, c)
        });
        let mut mask = BinaryMask::new(w, h);
        let (px, py) = (px as usize, py as usize);
        for y in 0..sprite.height() {
            for x in 0..sprite.width() {
                if sprite.alpha.get(x, y) {
                    frame.pixel_mut(px + x, py + y).copy_from_slice(sprite.rgb.pixel(x, y));
                    mask.set(px + x, py + y, true);
                }
            }
        }
        frames.push(frame);
        masks.push(mask);
    }
    Ok((frames, masks))
}

/// One (image, mask) pair sprites and plates are drawn from.
#[derive(Debug, Clone)]
pub struct SynthSource {
    pub id: String,
    pub image: ImagePlane,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub length: usize,
    pub seed: u64,
    pub trajectory: TrajectoryParams,
    /// Directory holding `{source_id}.png` plates; `None` fills holes in-process.
    pub plate_dir: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            length: 30,
            seed: 0,
            trajectory: TrajectoryParams::default(),
            plate_dir: None,
        }
    }
}

fn sequence_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// Writes `count` sequences under `out/{train,test}/{seq_id}/` with
/// `frame_%05d.png`, `mask_%05d.png` and `spec.json`, plus `manifest.json`,
/// `manifest_train.json` and `manifest_test.json` at the root. Returns the
/// path of `manifest.json`.
pub fn emit_dataset(out: &Path, sources: &[SynthSource], config: &SynthConfig) -> Result<PathBuf> {
    if sources.is_empty() {
        return Err(Error::Parameter("no source pairs to synthesise from".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let plates: Vec<ImagePlane> = sources
        .par_iter()
        .map(|s| match &config.plate_dir {
            Some(dir) => {
                let p = ImagePlane::load(dir.join(format!("{}.png", s.id)))?.to_rgb();
                if !p.same_size(&s.mask) {
                    return Err(Error::Shape(format!("plate for {} does not match its image", s.id)));
                }
                Ok(p)
            }
            None => fill_background(&s.image, &s.mask),
        })
        .collect::<Result<_>>()?;
    let sprites: Vec<Sprite> = sources
        .iter()
        .map(|s| Sprite::from_pair(&s.image, &s.mask))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..config.count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let n_train = (config.count as f64 * TRAIN_FRACTION).round() as usize;
    let mut split = vec!["test"; config.count];
    for &i in &order[..n_train] {
        split[i] = "train";
    }

    let entries: Vec<Vec<(String, ManifestEntry)>> = (0..config.count)
        .into_par_iter()
        .map(|i| {
            let seed = sequence_seed(config.seed, i);
            let src = (seed % sources.len() as u64) as usize;
            let s = &sources[src];
            let sprite = &sprites[src];
            let mut spec = sample_trajectories(
                (s.image.width(), s.image.height()),
                (sprite.width(), sprite.height()),
                config.length,
                &config.trajectory,
                seed,
            )?;
            spec.sprite_source = s.id.clone();
            spec.plate_source = match &config.plate_dir {
                Some(d) => PlateSource::External {
                    path: d.join(format!("{}.png", s.id)),
                },
                None => PlateSource::BuiltinFill,
            };
            let (frames, masks) = composite_sequence(sprite, &plates[src], &spec)?;
            let seq_id = format!("seq_{i:05}");
            let rel = PathBuf::from(split[i]).join(&seq_id);
            let dir = out.join(&rel);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut v = Vec::with_capacity(frames.len());
            for (t, (f, m)) in frames.iter().zip(&masks).enumerate() {
                let fname = format!("frame_{t:05}.png");
                let mname = format!("mask_{t:05}.png");
                f.save_png(dir.join(&fname))?;
                m.save_png(dir.join(&mname))?;
                v.push((
                    split[i].to_string(),
                    ManifestEntry {
                        id: format!("{seq_id}/{t:05}"),
                        image: rel.join(fname),
                        mask: rel.join(mname),
                        group: Some(seq_id.clone()),
                    },
                ));
            }
            let spec_path = dir.join("spec.json");
            let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
            std::fs::write(&spec_path, json + "\n").map_err(|e| Error::io(&spec_path, e))?;
            Ok(v)
        })
        .collect::<Result<_>>()?;

    let dataset = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    let write = |name: &str, id: String, filter: Option<&str>| -> Result<PathBuf> {
        let examples: Vec<ManifestEntry> = entries
            .iter()
            .flatten()
            .filter(|(sp, _)| filter.is_none_or(|f| f == sp))
            .map(|(_, e)| e.clone())
            .collect();
        let path = out.join(name);
        if !examples.is_empty() {
            Manifest {
                dataset_id: id,
                kind: DatasetKind::Video,
                examples,
            }
            .save(&path)?;
        }
        Ok(path)
    };
    write("manifest_train.json", format!("{dataset}-train"), Some("train"))?;
    write("manifest_test.json", format!("{dataset}-test"), Some("test"))?;
    write("manifest.json", dataset.clone(), None)
}

/// Cropping box helper for callers that want the sprite's footprint.
pub fn footprint(spec: &SequenceSpec, t: usize) -> CropBox {
    let (x, y) = spec.fg_positions()[t];
    CropBox {
        x0: x as usize,
        y0: y as usize,
        x1: x as usize + spec.sprite_size.0,
        y1: y as usize + spec.sprite_size.1,
    }
}
