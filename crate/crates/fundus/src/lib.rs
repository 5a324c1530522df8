//! Detection and validation of the optic disc and localization of the fovea
//! in color fundus photographs.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Detection** ([`saliency`]): a multi-scale local-contrast map over the
//!    CIE Lab image is z-score segmented into candidate regions.
//! 2. **Validation** ([`classifier`]): each candidate's proposal windows are
//!    described by HOG, encoded against an LLC visual vocabulary into word
//!    histograms, folded into a trained pLSA topic model, and classified by
//!    fuzzy k-nearest neighbors over six part-based classes.
//! 3. **Fovea and macula** ([`vasculature`]): the vessel map's thick main
//!    courses are reduced to weighted skeleton points, a parabola with its
//!    vertex at the disc center is fitted, the fovea is placed 2.5 disc
//!    diameters along the axis, and the macula window is compared against a
//!    healthy template.
//!
//! [`pipeline`] wires the stages into train / detect / evaluate / bench /
//! sweep commands plus a synthetic-fundus generator for desk-scale testing.

pub mod classifier;
pub mod encoding;
pub mod error;
pub mod hog;
pub mod imaging;
pub mod imgio;
pub mod pipeline;
pub mod plsa;
pub mod saliency;
pub mod vasculature;

pub use error::{FundusError, Result};
