use serde::{Deserialize, Serialize};

use super::{ActionKind, Result, StrategyConfig, StrategyError, TapNorm};
use crate::geom::Roi;
use crate::sandfield::ToolFootprint;
use crate::vision::{detect_contour, match_contours, resample_to_tool, GrayImage, ResampledImage, VisionError};

/// Push- and tap-controlled feature errors of the current image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureErrors {
    /// Norm of the stacked difference between matched contours (pixels).
    pub push: f64,
    /// Norm of the resampled-image difference (luminance).
    pub tap: f64,
    /// Whether contours were found on both images.
    pub contours_detected: bool,
}

fn cells(img: &ResampledImage, norm: TapNorm) -> Vec<f64> {
    match norm {
        TapNorm::Raw => img.cells.clone(),
        TapNorm::MeanNormalized => {
            let mean = img.cells.iter().sum::<f64>() / img.cells.len() as f64;
            img.cells.iter().map(|c| c - mean).collect()
        }
    }
}

/// Computes both feature errors over `roi`. When either contour is missing
/// the push error is taken as zero.
pub fn feature_errors(
    current: &GrayImage,
    desired: &GrayImage,
    roi: Roi,
    tool: ToolFootprint,
    cfg: &StrategyConfig,
) -> Result<FeatureErrors> {
    current.same_dims(desired)?;
    let contours = detect_contour(current, roi, cfg.n_points, cfg.sand_threshold)
        .and_then(|c| detect_contour(desired, roi, cfg.n_points, cfg.sand_threshold).map(|d| (c, d)));
    let (push, contours_detected) = match contours {
        Ok((c, d)) => (c.stacked_distance(&match_contours(&c, &d)?.contour), true),
        Err(VisionError::ContourNotDetected) => (0.0, false),
        Err(e) => return Err(e.into()),
    };
    let a = cells(&resample_to_tool(current, tool)?, cfg.tap_norm);
    let b = cells(&resample_to_tool(desired, tool)?, cfg.tap_norm);
    let tap = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(FeatureErrors {
        push,
        tap,
        contours_detected,
    })
}

/// Push when the contour error dominates the weighted surface error.
pub fn choose_action_kind(errors: &FeatureErrors, alpha: f64) -> Result<ActionKind> {
    if errors.push == 0.0 && errors.tap == 0.0 {
        return Err(StrategyError::ShapeReached);
    }
    Ok(if errors.push > alpha * errors.tap {
        ActionKind::Push
    } else {
        ActionKind::Tap
    })
}

pub fn select_action_auto(
    current: &GrayImage,
    desired: &GrayImage,
    roi: Roi,
    tool: ToolFootprint,
    cfg: &StrategyConfig,
) -> Result<ActionKind> {
    choose_action_kind(&feature_errors(current, desired, roi, tool, cfg)?, cfg.alpha)
}
