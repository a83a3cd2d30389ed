//! Multitemporal land-cover change detection.
//!
//! The crate covers the whole local pipeline: multiband raster containers,
//! labelled training samples taken from GeoJSON, a CART classifier, whole-scene
//! prediction, four-way post-classification change detection, accuracy metrics
//! and a deterministic synthetic scene generator.
//!
//! Pixel data is generic over [`Scalar`] (`f32` or `f64`). The on-disk scene
//! format is `float32`, so most callers want the `*32` aliases below.

use serde::{Deserialize, Serialize};

pub mod cart;
pub mod change;
pub mod classify;
mod error;
pub mod metrics;
pub mod raster;
pub mod samples;
mod scalar;
pub mod synth;

pub use cart::{CartParams, DecisionTree, TreeNode};
pub use change::{ChangeStats, Palette, Transition};
pub use classify::{classify_raster, classify_series};
pub use error::{Axis, Error, Result};
pub use metrics::ConfusionMatrix;
pub use raster::{ByteMap, Geotransform, MapKind, Raster, Window, NODATA_CODE};
pub use samples::{LabeledFeature, Sample, TrainingTable};
pub use scalar::Scalar;
pub use synth::{SceneSpec, SplitMix64};

/// Scene raster with single-precision samples, matching the `float32` container.
pub type Raster32 = Raster<f32>;
/// Scene raster with double-precision samples.
pub type Raster64 = Raster<f64>;
/// Training table over single-precision band values.
pub type TrainingTable32 = TrainingTable<f32>;
/// Training table over double-precision band values.
pub type TrainingTable64 = TrainingTable<f64>;

/// Binary land-cover class. The numeric value is the class code stored in
/// classification maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum LandCover {
    NonUrban = 0,
    Urban = 1,
}

impl LandCover {
    pub const ALL: [LandCover; 2] = [LandCover::NonUrban, LandCover::Urban];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LandCover::NonUrban),
            1 => Some(LandCover::Urban),
            _ => None,
        }
    }
}

impl From<LandCover> for u8 {
    fn from(c: LandCover) -> u8 {
        c.code()
    }
}

impl TryFrom<u8> for LandCover {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, Self::Error> {
        LandCover::from_code(code).ok_or_else(|| format!("class code {code} is not 0 or 1"))
    }
}
