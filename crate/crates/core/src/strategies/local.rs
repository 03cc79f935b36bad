//! Global-to-local shaping: pick a human-sized window where the images differ
//! most, read both contours there, and pull the desired contour toward the
//! current one so a single push can plausibly reach it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, StrategyConfig, StrategyError};
use crate::geom::Roi;
use crate::vision::{
    contour_distance, detect_contour, diff_roi_filtered, match_contours, Contour, GrayImage, VisionError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTarget {
    /// The clipped sub-ROI the contours were read in.
    pub roi: Roi,
    /// Contour on the current image.
    pub current: Contour,
    /// Contour on the desired image, matched to `current`.
    pub desired: Contour,
    /// Interpolated near-desired contour.
    pub near: Contour,
    /// Number of clipped candidate ROIs that were available.
    pub candidates: usize,
    /// Sub-ROI draws consumed, including failed ones.
    pub draws: usize,
}

/// Near-desired contour: `desired` when it lies within `mu_d` (mean matched
/// distance) of `current`, otherwise the point-wise interpolation that brings
/// the mean distance down to `mu_d`.
pub fn interpolate_near(current: &Contour, desired: &Contour, mu_d: f64) -> Contour {
    let d = contour_distance(current, desired);
    if d <= mu_d {
        return desired.clone();
    }
    let lerp = |f: f64| {
        Contour::new(
            current
                .points
                .iter()
                .zip(&desired.points)
                .map(|(c, t)| *c + (*t - *c) * f)
                .collect(),
        )
    };
    let mut factor = mu_d / d;
    let mut near = lerp(factor);
    // Rounding may leave the distance an ulp above mu_d.
    while contour_distance(current, &near) > mu_d && factor > 0.0 {
        factor *= 1.0 - 4.0 * f64::EPSILON;
        near = lerp(factor);
    }
    near
}

/// Builds the local push target for the current iteration.
///
/// The difference ROI (padded by `roi_margin`) is clipped to candidate
/// windows of height `mu_dv` at 1-px vertical offsets. Windows are drawn
/// uniformly without replacement until both contours are detected, up to
/// `1 + roi_retry_budget` draws.
pub fn local_target<R: Rng + ?Sized>(
    current_img: &GrayImage,
    desired_img: &GrayImage,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<LocalTarget> {
    let roi = match diff_roi_filtered(current_img, desired_img, cfg.blob_threshold, cfg.min_blob_area, cfg.excess_only) {
        Ok(r) => r.expand(cfg.roi_margin, &Roi::full(current_img.width(), current_img.height())),
        Err(VisionError::NoDifference) => return Err(StrategyError::NoDifference),
        Err(e) => return Err(e.into()),
    };
    let clip = (cfg.stats.mu_dv.round() as usize).max(1);
    let mut offsets: Vec<usize> = if roi.height > clip {
        (roi.v_min..=roi.v_end() - clip).collect()
    } else {
        vec![roi.v_min]
    };
    let height = roi.height.min(clip);
    let candidates = offsets.len();

    let mut draws = 0;
    while !offsets.is_empty() && draws <= cfg.roi_retry_budget {
        let pick = if offsets.len() == 1 {
            0
        } else {
            rng.random_range(0..offsets.len())
        };
        let v_min = offsets.swap_remove(pick);
        draws += 1;
        let sub = Roi::new(roi.u_min, v_min, roi.width, height);
        let detected = detect_contour(current_img, sub, cfg.n_points, cfg.sand_threshold).and_then(|c| {
            detect_contour(desired_img, sub, cfg.n_points, cfg.sand_threshold).map(|d| (c, d))
        });
        let (current, desired) = match detected {
            Ok(pair) => pair,
            Err(VisionError::ContourNotDetected) => continue,
            Err(e) => return Err(e.into()),
        };
        let desired = match_contours(&current, &desired)?.contour;
        let near = interpolate_near(&current, &desired, cfg.stats.mu_d);
        return Ok(LocalTarget {
            roi: sub,
            current,
            desired,
            near,
            candidates,
            draws,
        });
    }
    Err(StrategyError::ContourNotDetected { attempts: draws })
}
