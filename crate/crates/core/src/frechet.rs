//! Gaussian region statistics and the Fréchet (2-Wasserstein) distance
//! between foreground and background feature distributions of one image.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{downsample_mask, FeatureMap};
use crate::image::BinaryMask;
use crate::linalg::{matrix_sqrt, DEFAULT_ITERATIONS};

/// Relative diagonal loading added to sample covariances.
pub const COVARIANCE_RIDGE: f64 = 1e-6;
/// Smallest ridge used when the sample covariance has zero trace.
pub const MIN_RIDGE: f64 = 1e-12;
const NEGATIVE_WARN: f64 = -1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub n: usize,
}

impl RegionStats {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, n: usize) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Shape(format!(
                "mean has {} entries but covariance is {}x{}",
                d,
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        Ok(Self { mu, sigma, n })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Fewer samples than `dim + 1` leave the covariance singular before regularization.
    pub fn is_rank_deficient(&self) -> bool {
        self.n < self.dim() + 1
    }

    /// Mean and unbiased covariance of `samples`, plus a ridge of
    /// `1e-6 * trace / dim` on the diagonal.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = samples.into_iter().collect();
        let n = rows.len();
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "region has {n} feature sample(s); at least 2 are needed"
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape(format!("sample of length {} in a {dim}-d region", r.len())));
        }
        // shift by the first sample so identical samples give exactly zero spread
        let origin = rows[0];
        let mut shift_mean = vec![0.0; dim];
        for r in &rows {
            for k in 0..dim {
                shift_mean[k] += r[k] - origin[k];
            }
        }
        for v in &mut shift_mean {
            *v /= n as f64;
        }
        let mu = DVector::from_fn(dim, |k, _| origin[k] + shift_mean[k]);
        let mut sigma = DMatrix::<f64>::zeros(dim, dim);
        let mut centred = vec![0.0; dim];
        for r in &rows {
            for k in 0..dim {
                centred[k] = (r[k] - origin[k]) - shift_mean[k];
            }
            for i in 0..dim {
                for j in i..dim {
                    sigma[(i, j)] += centred[i] * centred[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = sigma[(i, j)] / (n - 1) as f64;
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        let ridge = (COVARIANCE_RIDGE * sigma.trace() / dim as f64).max(MIN_RIDGE);
        for i in 0..dim {
            sigma[(i, i)] += ridge;
        }
        Ok(Self { mu, sigma, n })
    }
}

/// Statistics of the feature vectors whose grid cells fall inside `region`
/// (given at image resolution; cells join by majority vote).
pub fn region_stats(fm: &FeatureMap, region: &BinaryMask) -> Result<RegionStats> {
    let cells = downsample_mask(region, fm.width, fm.height);
    let samples = (0..fm.height)
        .flat_map(|y| (0..fm.width).map(move |x| (x, y)))
        .filter(|&(x, y)| cells.get(x, y))
        .map(|(x, y)| fm.vector(x, y));
    RegionStats::from_samples(samples, fm.dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub d2: f64,
    pub mean_term: f64,
    pub cov_term: f64,
    pub sqrt_iterations: usize,
    pub sqrt_residual: f64,
    /// Set when round-off produced a distance below -1e-8 that was clamped to 0.
    pub clamped_negative: bool,
}

/// `|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2})`, with the product's root
/// taken as `(S1^{1/2} S2 S1^{1/2})^{1/2}`, which has the same trace and
/// stays symmetric.
pub fn frechet_distance(s1: &RegionStats, s2: &RegionStats) -> Result<FrechetResult> {
    if s1.dim() != s2.dim() {
        return Err(Error::Shape(format!(
            "cannot compare {}-d and {}-d statistics",
            s1.dim(),
            s2.dim()
        )));
    }
    let mean_term = (&s1.mu - &s2.mu).norm_squared();
    let r1 = matrix_sqrt(&symmetrized(&s1.sigma), DEFAULT_ITERATIONS)?;
    let inner = symmetrized(&(&r1.root * &s2.sigma * &r1.root));
    let r = matrix_sqrt(&inner, DEFAULT_ITERATIONS)?;
    let mut cov_term = s1.sigma.trace() + s2.sigma.trace() - 2.0 * r.root.trace();
    let raw = mean_term + cov_term;
    let clamped_negative = raw < NEGATIVE_WARN;
    if raw < 0.0 {
        cov_term = -mean_term;
    }
    Ok(FrechetResult {
        d2: mean_term + cov_term,
        mean_term,
        cov_term,
        sqrt_iterations: r1.iterations + r.iterations,
        sqrt_residual: r1.residual.max(r.residual),
        clamped_negative,
    })
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
