//! Camouflage effectiveness scores for images and videos.
//!
//! Given an image and a binary mask of the concealed object, the crate
//! computes three complementary scores on the object's local surround:
//!
//! - **reconstruction fidelity** ([`recon`]): how much of the object can be
//!   rebuilt from background patches;
//! - **boundary visibility** ([`boundary`]): how little the image's contours
//!   agree with the mask outline inside a band around it;
//! - **intra-image Fréchet distance** ([`frechet`]): the distance between
//!   Gaussian fits of foreground and background features.
//!
//! [`score`] combines them per example and aggregates datasets, [`rank`]
//! compares score rankings with human judgements, and [`synth`] builds
//! synthetic camouflage video sequences with exact ground-truth masks.

pub mod boundary;
pub mod error;
pub mod features;
pub mod frechet;
pub mod image;
pub mod knn;
pub mod linalg;
pub mod morphology;
pub mod patches;
pub mod rank;
pub mod recon;
pub mod score;
pub mod synth;
pub mod trimap;

pub use error::{Error, Result};
pub use image::{binarize, BinaryMask, CropBox, ImagePlane};
pub use trimap::{crop_to_object, make_trimap, select_kernels, KernelPolicy, KernelRange, Trimap};
pub use rank::{calibrate_alpha, kendall_tau, rank, HumanRanking, RankKey, TauVariant};
pub use score::{
    combined_score, score_dataset, score_example, DatasetKind, DatasetReport, Manifest, ScoreConfig,
    ScoreReport, Sidecars,
};
