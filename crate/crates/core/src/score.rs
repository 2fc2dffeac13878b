//! Per-example scoring and dataset aggregation.
//!
//! An example is cropped around its object, split into a trimap, and scored
//! for reconstruction fidelity, boundary visibility and Fréchet distance.
//! The combined score is `(1 - alpha) * s_rf + alpha * s_b`.
//!
//! Datasets are described by a JSON manifest. Image datasets are summarised
//! by the mean over examples; video and multi-view datasets by the mean over
//! groups (sequences or scenes) of the per-group means.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::{
    boundary_f1, detect_edges, ground_truth_contours, ContourMap, EdgeParams,
};
use crate::error::{Error, Result};
use crate::features::{extract_builtin, read_feature_file, BuiltinParams, FeatureMap};
use crate::frechet::{frechet_distance, region_stats, FrechetResult};
use crate::image::{BinaryMask, CropBox, ImagePlane};
use crate::recon::{reconstruct_foreground, ReconParams, Reconstruction};
use crate::trimap::{crop_box, make_trimap, KernelPolicy, Trimap};

pub const DEFAULT_ALPHA: f64 = 0.35;
pub const DEFAULT_CROP_MARGIN: f64 = 0.5;
/// Chebyshev distance within which contour pixels may be matched.
pub const DEFAULT_TOLERANCE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum FeatureSource {
    Builtin(BuiltinParams),
    /// `{dir}/{image_stem}.feat`, computed on the full frame.
    External { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum ContourSource {
    Builtin(EdgeParams),
    /// `{dir}/{image_stem}.contour.png`, computed on the full frame.
    External { dir: PathBuf, threshold: f32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub alpha: f64,
    pub recon: ReconParams,
    pub kernels: KernelPolicy,
    /// Margin around the bounding box, as a fraction of its size; `None` scores the full frame.
    pub crop_margin: Option<f64>,
    pub tolerance: usize,
    pub features: FeatureSource,
    pub contours: ContourSource,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            recon: ReconParams::default(),
            kernels: KernelPolicy::default(),
            crop_margin: Some(DEFAULT_CROP_MARGIN),
            tolerance: DEFAULT_TOLERANCE,
            features: FeatureSource::Builtin(BuiltinParams::default()),
            contours: ContourSource::Builtin(EdgeParams::default()),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        unit_interval("alpha", self.alpha)?;
        if !(self.recon.lambda > 0.0 && self.recon.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be > 0, got {}", self.recon.lambda)));
        }
        if self.recon.patch_side == 0 || self.recon.stride == 0 || self.recon.bg_stride == 0 {
            return Err(Error::Parameter("patch side and strides must be >= 1".into()));
        }
        if let Some(m) = self.crop_margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Parameter(format!("crop margin must be >= 0, got {m}")));
            }
        }
        if let KernelPolicy::Fixed { erode, dilate } = self.kernels {
            if erode % 2 == 0 || dilate % 2 == 0 {
                return Err(Error::Parameter(format!("kernel sides must be odd, got {erode}/{dilate}")));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

pub fn combined_score(s_rf: f64, s_b: f64, alpha: f64) -> Result<f64> {
    unit_interval("s_rf", s_rf)?;
    unit_interval("s_b", s_b)?;
    unit_interval("alpha", alpha)?;
    Ok((1.0 - alpha) * s_rf + alpha * s_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub s_rf: f64,
    pub s_b: f64,
    pub s_alpha: f64,
    pub alpha: f64,
    /// Missing when the Fréchet distance could not be computed; see `warnings`.
    pub d2: Option<f64>,
    pub warnings: Vec<String>,
    pub crop: CropBox,
    pub kernels: (usize, usize),
    pub config_hash: String,
    pub extractor_id: String,
    pub feature_dim: usize,
}

/// Precomputed full-frame feature and contour maps for one example.
#[derive(Debug, Clone, Default)]
pub struct Sidecars {
    pub features: Option<FeatureMap>,
    pub contours: Option<ContourMap>,
}

impl Sidecars {
    /// Sidecar files `config` declares for the image at `image`, named after its file stem.
    pub fn paths(image: &Path, config: &ScoreConfig) -> Vec<PathBuf> {
        let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut v = Vec::new();
        if let FeatureSource::External { dir } = &config.features {
            v.push(dir.join(format!("{stem}.feat")));
        }
        if let ContourSource::External { dir, .. } = &config.contours {
            v.push(dir.join(format!("{stem}.contour.png")));
        }
        v
    }

    /// Loads whatever `config` declares as external for the image at `image`.
    pub fn load(image: &Path, config: &ScoreConfig) -> Result<Sidecars> {
        let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut s = Sidecars::default();
        if let FeatureSource::External { dir } = &config.features {
            s.features = Some(read_feature_file(dir.join(format!("{stem}.feat")))?);
        }
        if let ContourSource::External { dir, threshold } = &config.contours {
            s.contours = Some(ContourMap::load_external(dir.join(format!("{stem}.contour.png")), *threshold)?);
        }
        Ok(s)
    }
}

/// Everything computed while scoring one example.
#[derive(Debug, Clone)]
pub struct ScoreDetails {
    pub report: ScoreReport,
    pub trimap: Trimap,
    /// `None` when the background could not host a single patch.
    pub reconstruction: Option<Reconstruction>,
    pub contours: ContourMap,
    pub frechet: Option<FrechetResult>,
}

pub fn score_example(
    example_id: &str,
    img: &ImagePlane,
    mask: &BinaryMask,
    sidecars: &Sidecars,
    config: &ScoreConfig,
) -> Result<ScoreReport> {
    score_example_detailed(example_id, img, mask, sidecars, config).map(|d| d.report)
}

pub fn score_example_detailed(
    example_id: &str,
    img: &ImagePlane,
    mask: &BinaryMask,
    sidecars: &Sidecars,
    config: &ScoreConfig,
) -> Result<ScoreDetails> {
    config.validate()?;
    let (w, h) = (mask.width(), mask.height());
    if !img.same_size(mask) {
        return Err(Error::Shape(format!(
            "image is {}x{}, mask is {w}x{h}",
            img.width(),
            img.height()
        )));
    }
    if mask.is_empty() {
        return Err(Error::Degenerate(format!("mask of {example_id} is empty")));
    }
    let mut warnings = Vec::new();

    let crop = match config.crop_margin {
        Some(m) => crop_box(mask, m)?,
        None => CropBox::full(w, h),
    };
    let cimg = img.crop(&crop);
    let cmask = mask.crop(&crop);
    let trimap = make_trimap(&cmask, &config.kernels)?;
    if trimap.bg.is_empty() {
        warnings.push("background region is empty".to_string());
    }

    let reconstruction = match reconstruct_foreground(&cimg, &trimap, &config.recon) {
        Ok(r) => Some(r),
        Err(Error::InsufficientBackground { patch_side }) => {
            warnings.push(format!(
                "background cannot host a {patch_side}x{patch_side} patch; s_rf set to 0"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let s_rf = reconstruction.as_ref().map_or(0.0, |r| r.s_rf);

    let contours = match (&sidecars.contours, &config.contours) {
        (Some(c), _) => {
            if (c.width(), c.height()) != (w, h) {
                return Err(Error::Shape(format!(
                    "contour map is {}x{}, frame is {w}x{h}",
                    c.width(),
                    c.height()
                )));
            }
            c.crop(&crop)
        }
        (None, ContourSource::Builtin(p)) => detect_edges(&cimg, p),
        (None, ContourSource::External { .. }) => {
            return Err(Error::Parameter("external contours configured but not supplied".into()))
        }
    };
    let gt = ground_truth_contours(&cmask)?;
    let f1 = boundary_f1(&gt, &contours, &trimap.band, config.tolerance)?;
    if f1.reference == 0 {
        warnings.push("mask outline does not reach the boundary band".to_string());
    }
    let s_b = 1.0 - f1.f1;

    let (features, fg_region, bg_region) = match (&sidecars.features, &config.features) {
        (Some(fm), _) => (
            fm.clone(),
            trimap.fg.uncrop(&crop, w, h),
            trimap.bg.uncrop(&crop, w, h),
        ),
        (None, FeatureSource::Builtin(p)) => (extract_builtin(&cimg, p), trimap.fg.clone(), trimap.bg.clone()),
        (None, FeatureSource::External { .. }) => {
            return Err(Error::Parameter("external features configured but not supplied".into()))
        }
    };
    let frechet = match frechet_for(&features, &fg_region, &bg_region) {
        Ok(r) => {
            if r.clamped_negative {
                warnings.push("negative Fréchet distance from round-off clamped to 0".to_string());
            }
            Some(r)
        }
        Err(FrechetFailure::Stats(which, e)) => {
            warnings.push(format!("no Fréchet distance: {which} region: {e}"));
            None
        }
        Err(FrechetFailure::Distance(e)) => {
            warnings.push(format!("no Fréchet distance: {e}"));
            None
        }
        Err(FrechetFailure::RankDeficient(r)) => {
            warnings.push("feature covariance is rank deficient before regularization".to_string());
            Some(r)
        }
    };

    let report = ScoreReport {
        example_id: example_id.to_string(),
        group: None,
        s_rf,
        s_b,
        s_alpha: combined_score(s_rf, s_b, config.alpha)?,
        alpha: config.alpha,
        d2: frechet.map(|r| r.d2),
        warnings,
        crop,
        kernels: (trimap.erode_kernel, trimap.dilate_kernel),
        config_hash: config.hash(),
        extractor_id: features.extractor_id.clone(),
        feature_dim: features.dim,
    };
    Ok(ScoreDetails {
        report,
        trimap,
        reconstruction,
        contours,
        frechet,
    })
}

enum FrechetFailure {
    Stats(&'static str, Error),
    Distance(Error),
    RankDeficient(FrechetResult),
}

fn frechet_for(
    fm: &FeatureMap,
    fg: &BinaryMask,
    bg: &BinaryMask,
) -> std::result::Result<FrechetResult, FrechetFailure> {
    let s_fg = region_stats(fm, fg).map_err(|e| FrechetFailure::Stats("foreground", e))?;
    let s_bg = region_stats(fm, bg).map_err(|e| FrechetFailure::Stats("background", e))?;
    let r = frechet_distance(&s_fg, &s_bg).map_err(FrechetFailure::Distance)?;
    if s_fg.is_rank_deficient() || s_bg.is_rank_deficient() {
        return Err(FrechetFailure::RankDeficient(r));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Image,
    Video,
    Multiview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
    /// Sequence id for video datasets, scene id for multi-view ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_id: String,
    pub kind: DatasetKind,
    pub examples: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads a manifest and resolves relative file paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.examples {
            e.image = base.join(&e.image);
            e.mask = base.join(&e.mask);
        }
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn check(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::Consistency(format!("manifest {} lists no examples", self.dataset_id)));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.examples {
            if !seen.insert(&e.id) {
                return Err(Error::Consistency(format!("duplicate example id {}", e.id)));
            }
            if self.kind != DatasetKind::Image && e.group.is_none() {
                return Err(Error::Consistency(format!(
                    "example {} has no group in a {:?} dataset",
                    e.id, self.kind
                )));
            }
        }
        Ok(())
    }

    /// Every referenced file that does not exist, including configured sidecars.
    pub fn missing_files(&self, config: &ScoreConfig) -> Vec<PathBuf> {
        self.examples
            .iter()
            .flat_map(|e| {
                let mut v = vec![e.image.clone(), e.mask.clone()];
                v.extend(Sidecars::paths(&e.image, config));
                v
            })
            .filter(|p| !p.is_file())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub error: String,
}

/// Means over a set of examples; `d2` averages only examples that have one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeans {
    pub n: usize,
    pub s_rf: f64,
    pub s_b: f64,
    pub s_alpha: f64,
    pub d2: Option<f64>,
}

impl ScoreMeans {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a ScoreReport>) -> Option<ScoreMeans> {
        let rows: Vec<(f64, f64, f64, Option<f64>)> = reports
            .into_iter()
            .map(|r| (r.s_rf, r.s_b, r.s_alpha, r.d2))
            .collect();
        Self::from_rows(&rows)
    }

    fn from_rows(rows: &[(f64, f64, f64, Option<f64>)]) -> Option<ScoreMeans> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let d2: Vec<f64> = rows.iter().filter_map(|r| r.3).collect();
        Some(ScoreMeans {
            n: rows.len(),
            s_rf: rows.iter().map(|r| r.0).sum::<f64>() / n,
            s_b: rows.iter().map(|r| r.1).sum::<f64>() / n,
            s_alpha: rows.iter().map(|r| r.2).sum::<f64>() / n,
            d2: (!d2.is_empty()).then(|| d2.iter().sum::<f64>() / d2.len() as f64),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub means: ScoreMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Examples scored successfully.
    pub scored: usize,
    pub failed: usize,
    /// Flat mean for image datasets, mean of group means otherwise; `n` counts its terms.
    pub means: Option<ScoreMeans>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset_id: String,
    pub kind: DatasetKind,
    pub config_hash: String,
    pub per_example: Vec<ScoreReport>,
    pub failures: Vec<Failure>,
    pub per_group: Vec<GroupSummary>,
    pub summary: Summary,
}

impl DatasetReport {
    /// Builds the report from per-example outcomes given in manifest order.
    pub fn aggregate(
        dataset_id: &str,
        kind: DatasetKind,
        config_hash: &str,
        per_example: Vec<ScoreReport>,
        failures: Vec<Failure>,
    ) -> DatasetReport {
        let per_group = if kind == DatasetKind::Image {
            Vec::new()
        } else {
            let mut order: Vec<String> = Vec::new();
            let mut groups: BTreeMap<String, Vec<&ScoreReport>> = BTreeMap::new();
            for r in &per_example {
                let g = r.group.clone().unwrap_or_else(|| r.example_id.clone());
                let slot = groups.entry(g.clone()).or_default();
                if slot.is_empty() {
                    order.push(g);
                }
                slot.push(r);
            }
            order
                .into_iter()
                .map(|g| GroupSummary {
                    means: ScoreMeans::of(groups[&g].iter().copied()).expect("group is non-empty"),
                    group: g,
                })
                .collect()
        };
        let means = match kind {
            DatasetKind::Image => ScoreMeans::of(&per_example),
            _ => {
                let rows: Vec<_> = per_group
                    .iter()
                    .map(|g| (g.means.s_rf, g.means.s_b, g.means.s_alpha, g.means.d2))
                    .collect();
                ScoreMeans::from_rows(&rows)
            }
        };
        DatasetReport {
            dataset_id: dataset_id.to_string(),
            kind,
            config_hash: config_hash.to_string(),
            summary: Summary {
                scored: per_example.len(),
                failed: failures.len(),
                means,
            },
            per_example,
            failures,
            per_group,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per scored example.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record([
            "id", "group", "s_rf", "s_b", "s_alpha", "d2", "erode_kernel", "dilate_kernel", "crop_x0",
            "crop_y0", "crop_x1", "crop_y1", "warnings",
        ])
        .map_err(io)?;
        for r in &self.per_example {
            w.write_record([
                r.example_id.clone(),
                r.group.clone().unwrap_or_default(),
                r.s_rf.to_string(),
                r.s_b.to_string(),
                r.s_alpha.to_string(),
                r.d2.map(|v| v.to_string()).unwrap_or_default(),
                r.kernels.0.to_string(),
                r.kernels.1.to_string(),
                r.crop.x0.to_string(),
                r.crop.y0.to_string(),
                r.crop.x1.to_string(),
                r.crop.y1.to_string(),
                r.warnings.join("; "),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Scores every example of `manifest` in parallel. Results keep manifest
/// order; examples that fail are listed in `failures` and left out of all
/// means.
pub fn score_dataset(manifest: &Manifest, config: &ScoreConfig) -> Result<DatasetReport> {
    config.validate()?;
    manifest.check()?;
    let missing = manifest.missing_files(config);
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let outcomes: Vec<Result<ScoreReport>> = manifest
        .examples
        .par_iter()
        .map(|e| {
            let img = ImagePlane::load(&e.image)?;
            let mask = BinaryMask::load(&e.mask)?;
            let sidecars = Sidecars::load(&e.image, config)?;
            let mut r = score_example(&e.id, &img, &mask, &sidecars, config)?;
            r.group = e.group.clone();
            Ok(r)
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (e, o) in manifest.examples.iter().zip(outcomes) {
        match o {
            Ok(r) => reports.push(r),
            Err(err) => failures.push(Failure {
                example_id: e.id.clone(),
                group: e.group.clone(),
                error: err.to_string(),
            }),
        }
    }
    if let Some(first) = reports.first() {
        if let Some(r) = reports.iter().find(|r| r.feature_dim != first.feature_dim) {
            return Err(Error::Consistency(format!(
                "feature dimension {} of {} differs from {} of {}",
                r.feature_dim, r.example_id, first.feature_dim, first.example_id
            )));
        }
    }
    Ok(DatasetReport::aggregate(
        &manifest.dataset_id,
        manifest.kind,
        &config.hash(),
        reports,
        failures,
    ))
}

/// Aligned table with one row per dataset summary.
pub fn summary_table(reports: &[DatasetReport]) -> String {
    let header = ["Dataset", "S_Rf", "S_b", "S_alpha", "d_F^2", "n", "failed"];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            let m = r.summary.means.as_ref();
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            [
                r.dataset_id.clone(),
                f(m.map(|m| m.s_rf)),
                f(m.map(|m| m.s_b)),
                f(m.map(|m| m.s_alpha)),
                m.and_then(|m| m.d2).map_or("-".to_string(), |v| format!("{v:.2}")),
                m.map_or(0, |m| m.n).to_string(),
                r.summary.failed.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(out.len() - 1));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(|s| s.as_str()).collect()));
        out.push('\n');
    }
    out
}
