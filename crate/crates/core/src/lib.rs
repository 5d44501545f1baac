//! Scene-change anomaly detection for monitored locations.
//!
//! A query photo is registered against a reference photo of the same place
//! with dense TV-L1 optical flow, split into object masks, and each mask is
//! scored with three change features (intensity cosine distance, Procrustes
//! shape disparity, prompted-area signature difference). A gradient-boosted
//! tree ensemble turns the features into an anomaly probability.

pub mod classifier;
pub mod error;
pub mod features;
pub mod image;
pub mod manifest;
pub mod mask;
pub mod pipeline;
pub mod registration;
pub mod rle;
pub mod scene;
pub mod segmentation;
pub mod workspace;

pub use error::{Error, Result};
pub use manifest::write_atomic;
pub use image::{GrayImage, RgbImage};
pub use mask::SegmentMask;
