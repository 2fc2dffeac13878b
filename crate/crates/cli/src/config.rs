//! Run configuration: defaults, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use camoscore::boundary::EdgeParams;
use camoscore::features::BuiltinParams;
use camoscore::knn::ForestParams;
use camoscore::recon::SearchMode;
use camoscore::score::{ContourSource, FeatureSource};
use camoscore::{KernelPolicy, KernelRange, ScoreConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every setting is optional so that a file and the flags can each supply a
/// subset. Field names double as TOML keys.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Weight of the boundary score in the combined score
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relative RGB tolerance for a reconstructed pixel
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Side of the square reconstruction patches
    #[arg(long)]
    pub patch_side: Option<usize>,
    /// Step between foreground patches
    #[arg(long)]
    pub stride: Option<usize>,
    /// Step between candidate background patches
    #[arg(long)]
    pub bg_stride: Option<usize>,
    /// Fixed erosion kernel side (requires --kernel-dilate)
    #[arg(long, requires = "kernel_dilate")]
    pub kernel_erode: Option<usize>,
    /// Fixed dilation kernel side (requires --kernel-erode)
    #[arg(long, requires = "kernel_erode")]
    pub kernel_dilate: Option<usize>,
    /// Range searched by the adaptive kernel choice, as MIN:MAX
    #[arg(long, value_parser = parse_range)]
    pub kernel_range: Option<(usize, usize)>,
    /// Margin around the object's bounding box, as a fraction of its size
    #[arg(long)]
    pub crop_margin: Option<f64>,
    /// Score the full frame instead of a crop around the object
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_crop: Option<bool>,
    /// `builtin`, or `external:DIR` with `<image-stem>.feat` files
    #[arg(long, value_parser = parse_source)]
    pub features: Option<Source>,
    /// `builtin`, or `external:DIR` with `<image-stem>.contour.png` files
    #[arg(long, value_parser = parse_source)]
    pub contours: Option<Source>,
    /// Contour strength above which an external contour pixel counts
    #[arg(long)]
    pub contour_threshold: Option<f32>,
    /// Use the randomized k-d forest instead of exact patch search
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub approximate: Option<bool>,
    /// Chebyshev tolerance when matching contour pixels
    #[arg(long)]
    pub tolerance: Option<usize>,
    /// High hysteresis threshold of the built-in edge detector
    #[arg(long)]
    pub edge_high: Option<f32>,
    /// Low hysteresis threshold of the built-in edge detector
    #[arg(long)]
    pub edge_low: Option<f32>,
    /// Worker threads (default: CAMOSCORE_THREADS, then all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for randomized components
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Where features or contours come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Source {
    Builtin,
    External(PathBuf),
}

impl TryFrom<String> for Source {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        parse_source(&s)
    }
}

impl From<Source> for String {
    fn from(s: Source) -> String {
        match s {
            Source::Builtin => "builtin".into(),
            Source::External(p) => format!("external:{}", p.display()),
        }
    }
}

fn parse_source(s: &str) -> Result<Source, String> {
    match s.split_once(':') {
        None if s == "builtin" => Ok(Source::Builtin),
        Some(("external", dir)) if !dir.is_empty() => Ok(Source::External(PathBuf::from(dir))),
        _ => Err(format!("expected `builtin` or `external:DIR`, got {s:?}")),
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let a = a.trim().parse().map_err(|_| format!("bad minimum {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad maximum {b:?}"))?;
    Ok((a, b))
}

macro_rules! merge_fields {
    ($base:expr, $top:expr; $($f:ident),*) => {
        Overrides { $($f: $top.$f.clone().or_else(|| $base.$f.clone())),* }
    };
}

impl Overrides {
    pub fn load(path: &Path) -> Result<Overrides, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn merged_with(&self, top: &Overrides) -> Overrides {
        merge_fields!(self, top;
            alpha, lambda, patch_side, stride, bg_stride, kernel_erode, kernel_dilate, kernel_range,
            crop_margin, no_crop, features, contours, contour_threshold, approximate,
            tolerance, edge_high, edge_low, threads, seed)
    }

    pub fn score_config(&self) -> Result<ScoreConfig, CliError> {
        let mut c = ScoreConfig::default();
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.lambda {
            c.recon.lambda = v;
        }
        if let Some(v) = self.patch_side {
            c.recon.patch_side = v;
        }
        if let Some(v) = self.stride {
            c.recon.stride = v;
        }
        if let Some(v) = self.bg_stride {
            c.recon.bg_stride = v;
        }
        if self.approximate == Some(true) {
            c.recon.search = SearchMode::Approximate(ForestParams {
                seed: self.seed.unwrap_or(0),
                ..ForestParams::default()
            });
        }
        c.kernels = match (self.kernel_erode, self.kernel_dilate, self.kernel_range) {
            (Some(_), Some(_), Some(_)) => {
                return Err(CliError::Config("fixed kernels and --kernel-range are exclusive".into()))
            }
            (Some(erode), Some(dilate), None) => KernelPolicy::Fixed { erode, dilate },
            (None, None, Some((min, max))) => KernelPolicy::Adaptive {
                range: KernelRange::new(min, max).map_err(|e| CliError::Config(e.to_string()))?,
            },
            (None, None, None) => KernelPolicy::default(),
            _ => return Err(CliError::Config("kernel_erode and kernel_dilate must be given together".into())),
        };
        if let Some(v) = self.crop_margin {
            c.crop_margin = Some(v);
        }
        if self.no_crop == Some(true) {
            c.crop_margin = None;
        }
        c.features = match &self.features {
            Some(Source::External(dir)) => FeatureSource::External { dir: dir.clone() },
            _ => FeatureSource::Builtin(BuiltinParams::default()),
        };
        let mut edges = EdgeParams::default();
        if let Some(v) = self.edge_high {
            edges.high = v;
        }
        if let Some(v) = self.edge_low {
            edges.low = v;
        }
        c.contours = match &self.contours {
            Some(Source::External(dir)) => ContourSource::External {
                dir: dir.clone(),
                threshold: self.contour_threshold.unwrap_or(0.5),
            },
            _ => ContourSource::Builtin(edges),
        };
        if let Some(v) = self.tolerance {
            c.tolerance = v;
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }

    /// Explicit setting, then `CAMOSCORE_THREADS`, then `None` for all cores.
    pub fn thread_count(&self) -> Result<Option<usize>, CliError> {
        if let Some(n) = self.threads {
            return Ok(Some(n));
        }
        match std::env::var("CAMOSCORE_THREADS") {
            Ok(s) if !s.trim().is_empty() => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("CAMOSCORE_THREADS={s:?} is not a number"))),
            _ => Ok(None),
        }
    }
}
