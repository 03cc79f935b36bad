//! From visual state to action: tapping, local push targets, the three
//! pushing strategies, automatic action-type selection and termination.

mod local;
mod push;
mod select;
mod tap;
mod termination;

pub use local::{interpolate_near, local_target, LocalTarget};
pub use push::{push_average, push_learned, push_maximum};
pub use select::{choose_action_kind, feature_errors, select_action_auto, FeatureErrors};
pub use tap::select_tap;
pub use termination::{
    check_termination, first_stop, StopReason, TerminationDecision, TerminationMode,
    TerminationPolicy,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::vision::VisionError;

/// One non-prehensile action, in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// Planar translation of the tool on the sandbox base from `start` to `end`.
    Push { start: Point, end: Point },
    /// Vertical tap whose footprint is addressed by `target`.
    Tap { target: Point },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Push { .. } => ActionKind::Push,
            Action::Tap { .. } => ActionKind::Tap,
        }
    }

    /// All pixels within `[0, width) x [0, height)`.
    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        let ok = |p: &Point| p.is_finite() && p.u >= 0.0 && p.v >= 0.0 && p.u < width as f64 && p.v < height as f64;
        match self {
            Action::Push { start, end } => ok(start) && ok(end),
            Action::Tap { target } => ok(target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Push,
    Tap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushStrategy {
    #[serde(alias = "max")]
    Maximum,
    #[serde(alias = "avg")]
    Average,
    #[serde(alias = "ann")]
    Learned,
}

impl PushStrategy {
    pub const ALL: [PushStrategy; 3] = [PushStrategy::Maximum, PushStrategy::Average, PushStrategy::Learned];

    pub fn short_name(&self) -> &'static str {
        match self {
            PushStrategy::Maximum => "max",
            PushStrategy::Average => "avg",
            PushStrategy::Learned => "ann",
        }
    }
}

impl std::str::FromStr for PushStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" | "maximum" => Ok(PushStrategy::Maximum),
            "avg" | "average" => Ok(PushStrategy::Average),
            "ann" | "learned" => Ok(PushStrategy::Learned),
            other => Err(format!("unknown push strategy {other:?}")),
        }
    }
}

/// Human-scale push statistics mined from demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Mean matched-contour distance per push, in pixels.
    pub mu_d: f64,
    pub sigma_d: f64,
    /// Mean height of the box enclosing both contours, in pixels.
    pub mu_dv: f64,
    pub sigma_dv: f64,
}

impl DatasetStats {
    /// Values measured on the human demonstrations at 640x480.
    pub const HUMAN_640X480: DatasetStats = DatasetStats {
        mu_d: 42.0,
        sigma_d: 10.0,
        mu_dv: 100.0,
        sigma_dv: 22.0,
    };

    /// Statistics for an image scaled by `factor` relative to the source.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mu_d: self.mu_d * factor,
            sigma_d: self.sigma_d * factor,
            mu_dv: self.mu_dv * factor,
            sigma_dv: self.sigma_dv * factor,
        }
    }
}

impl Default for DatasetStats {
    fn default() -> Self {
        Self::HUMAN_640X480
    }
}

/// How the tap-controlled feature error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapNorm {
    #[default]
    Raw,
    /// Each resampled image has its mean luminance removed first.
    MeanNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    /// Contour samples N.
    pub n_points: usize,
    pub stats: DatasetStats,
    /// Absolute luminance difference above which a pixel counts as changed.
    pub blob_threshold: u8,
    /// Difference blobs smaller than this many pixels are ignored.
    pub min_blob_area: usize,
    /// Target only material present in the current image but not in the
    /// desired one; missing material cannot be restored by pushing.
    pub excess_only: bool,
    /// Luminance at or above which a pixel is material.
    pub sand_threshold: u8,
    /// Pixels added around the difference blob so both contours fall inside.
    pub roi_margin: usize,
    /// Sub-ROI redraws after the first draw fails to yield contours.
    pub roi_retry_budget: usize,
    /// Weight between contour and surface errors in action-type selection.
    pub alpha: f64,
    pub tap_norm: TapNorm,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            n_points: 10,
            stats: DatasetStats::default(),
            blob_threshold: 20,
            min_blob_area: 0,
            excess_only: false,
            sand_threshold: 35,
            roi_margin: 3,
            roi_retry_budget: 5,
            alpha: 1.0,
            tap_norm: TapNorm::Raw,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("nothing to tap")]
    NothingToTap,
    #[error("no push needed")]
    NoPushNeeded,
    #[error("shape reached")]
    ShapeReached,
    #[error("no difference between current and desired images")]
    NoDifference,
    #[error("contour not detected after {attempts} sub-roi draws")]
    ContourNotDetected { attempts: usize },
    #[error("resampled images differ in size")]
    DimensionMismatch,
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Vision(#[from] VisionError),
}

pub type Result<T, E = StrategyError> = std::result::Result<T, E>;
