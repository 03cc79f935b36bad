//! Image-space measurement: the mutual-information error, difference ROIs,
//! contour features and the tool-resolution resampled image.

mod blobs;
mod contour;
mod image;
mod mi;

pub use blobs::{connected_components, diff_roi, diff_roi_filtered, Component, Labels};
pub use contour::{
    contour_distance, detect_contour, match_contours, pair_bbox_height, Contour, MatchedContour,
};
pub use image::{resample_to_tool, GrayImage, ResampledImage};
pub use mi::{entropy, joint_histogram, mi_error, mutual_information, JointHistogram};

pub use crate::geom::Roi;

use thiserror::Error;

/// Histogram bins per axis used by default for the mutual information.
pub const DEFAULT_BINS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no difference between images")]
    NoDifference,
    #[error("contour not detected")]
    ContourNotDetected,
    #[error("roi {0:?} is empty or exceeds the image")]
    InvalidRoi(Roi),
    #[error("bin count must be within 1..=256, got {0}")]
    InvalidBins(usize),
    #[error("contour lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("tool footprint {0}x{1} does not fit the image")]
    InvalidTool(usize, usize),
    #[error("raster has {got} pixels, expected {expected}")]
    BadRaster { expected: usize, got: usize },
    #[error("image i/o: {0}")]
    Io(String),
}

pub type Result<T, E = VisionError> = std::result::Result<T, E>;
