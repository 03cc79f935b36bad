//! Mining push state-action triplets from demonstration image sequences.
//!
//! Pipeline per demonstration: locate the tool in each frame, smooth its
//! track, cut the track into clear motions, read contours inside each
//! motion's change ROI, then keep every frame pair with enough tool travel
//! and contour change.

mod io;
mod synth;

pub use io::{
    load_demo, load_demos, read_stats, read_triplets, save_demo, save_demos, write_stats, write_triplets,
    TRIPLET_FORMAT_VERSION,
};
pub use synth::{synthesize_demos, SynthConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Roi};
use crate::strategies::DatasetStats;
use crate::vision::{
    connected_components, contour_distance, detect_contour, diff_roi, match_contours, pair_bbox_height, Contour,
    GrayImage,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no triplets")]
    Empty,
    #[error("malformed record: {0}")]
    Format(String),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub image: GrayImage,
    /// Ground-truth or detected tool centroid.
    pub tool_pos: Option<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub id: usize,
    pub frames: Vec<Frame>,
}

/// Consecutive moving samples with no direction reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSet {
    /// Indices into the position list given to [`split_motions`].
    pub indices: Vec<usize>,
    pub velocities: Vec<Point>,
}

/// `{p, x_m, x_n}` with `x_n` reordered to match `x_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushTriplet {
    pub demo: usize,
    pub m: usize,
    pub n: usize,
    /// `(u_S, v_S, u_E, v_E)`: tool centroid in frames m and n.
    pub p: [f64; 4],
    pub x_m: Contour,
    pub x_n: Contour,
}

impl PushTriplet {
    /// Network input: `x_m` then `x_n`, each flattened as `u, v` pairs.
    pub fn input(&self) -> Vec<f64> {
        let mut v = self.x_m.flat();
        v.extend(self.x_n.flat());
        v
    }
}

/// Pixels at or above `luminance` are tool marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkerConfig {
    pub luminance: u8,
}

impl Default for MarkerConfig {
    fn default() -> Self {
        Self { luminance: 255 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Minimum tool displacement, pixels (strict).
    pub tau_u: f64,
    /// Minimum contour change, pixels (strict).
    pub tau_x: f64,
    pub n_points: usize,
    pub blob_threshold: u8,
    pub sand_threshold: u8,
    pub roi_margin: usize,
    pub marker: MarkerConfig,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            tau_u: 5.0,
            tau_x: 3.0,
            n_points: 10,
            blob_threshold: 20,
            sand_threshold: 35,
            roi_margin: 3,
            marker: MarkerConfig::default(),
        }
    }
}

/// Centroid of the largest marker region, if any.
pub fn detect_tool(img: &GrayImage, marker: &MarkerConfig) -> Option<Point> {
    let mask: Vec<bool> = img.pixels().iter().map(|&p| p >= marker.luminance).collect();
    let (_, comps) = connected_components(&mask, img.width(), img.height());
    comps
        .iter()
        .fold(None, |best: Option<&crate::vision::Component>, c| match best {
            Some(b) if b.size >= c.size => Some(b),
            _ => Some(c),
        })
        .map(|c| c.centroid)
}

/// Centered `[1 2 1] / 4` filter; endpoints pass through.
pub fn smooth_positions(positions: &[Point]) -> Vec<Point> {
    (0..positions.len())
        .map(|i| {
            if i == 0 || i + 1 == positions.len() {
                positions[i]
            } else {
                (positions[i - 1] + positions[i] * 2.0 + positions[i + 1]) * 0.25
            }
        })
        .collect()
}

/// Cuts a track into motion sets. Velocities are forward differences (the
/// last sample uses the backward one). Samples slower than 1 px/frame are
/// dropped and end the current set; a negative dot product between
/// consecutive velocities starts a new set. Sets with fewer than two samples
/// are discarded.
pub fn split_motions(positions: &[Point]) -> Vec<MotionSet> {
    let n = positions.len();
    if n < 2 {
        return Vec::new();
    }
    let vel = |i: usize| {
        if i + 1 < n {
            positions[i + 1] - positions[i]
        } else {
            positions[i] - positions[i - 1]
        }
    };
    let mut sets = Vec::new();
    let mut cur = MotionSet { indices: Vec::new(), velocities: Vec::new() };
    let flush = |cur: &mut MotionSet, sets: &mut Vec<MotionSet>| {
        let done = std::mem::replace(cur, MotionSet { indices: Vec::new(), velocities: Vec::new() });
        if done.indices.len() >= 2 {
            sets.push(done);
        }
    };
    for i in 0..n {
        let v = vel(i);
        if v.norm() < 1.0 {
            flush(&mut cur, &mut sets);
            continue;
        }
        if cur.velocities.last().is_some_and(|prev| prev.dot(v) < 0.0) {
            flush(&mut cur, &mut sets);
        }
        cur.indices.push(i);
        cur.velocities.push(v);
    }
    flush(&mut cur, &mut sets);
    sets
}

/// Triplets from one motion set. `images[i]` and `tools[i]` are the frames
/// and raw tool positions addressed by `set.indices`; `frame_ids` maps them
/// to frame numbers for provenance.
pub fn extract_triplets(
    demo: usize,
    images: &[&GrayImage],
    tools: &[Point],
    frame_ids: &[usize],
    set: &MotionSet,
    cfg: &ExtractConfig,
) -> Vec<PushTriplet> {
    let (Some(&first), Some(&last)) = (set.indices.first(), set.indices.last()) else {
        return Vec::new();
    };
    let img0 = images[first];
    let Ok(roi) = diff_roi(img0, images[last], cfg.blob_threshold) else {
        return Vec::new();
    };
    let roi = roi.expand(cfg.roi_margin, &Roi::full(img0.width(), img0.height()));
    let contours: Vec<Option<Contour>> = set
        .indices
        .iter()
        .map(|&i| detect_contour(images[i], roi, cfg.n_points, cfg.sand_threshold).ok())
        .collect();
    let mut out = Vec::new();
    for a in 0..set.indices.len() {
        let Some(x_m) = &contours[a] else { continue };
        for b in a + 1..set.indices.len() {
            let Some(x_n) = &contours[b] else { continue };
            let (im, in_) = (set.indices[a], set.indices[b]);
            if tools[im].dist(tools[in_]) <= cfg.tau_u {
                continue;
            }
            let Ok(matched) = match_contours(x_m, x_n) else { continue };
            if x_m.stacked_distance(&matched.contour) <= cfg.tau_x {
                continue;
            }
            out.push(PushTriplet {
                demo,
                m: frame_ids[im],
                n: frame_ids[in_],
                p: [tools[im].u, tools[im].v, tools[in_].u, tools[in_].v],
                x_m: x_m.clone(),
                x_n: matched.contour,
            });
        }
    }
    out
}

/// Full pipeline on one demonstration.
pub fn extract_demo(demo: &Demo, cfg: &ExtractConfig) -> Vec<PushTriplet> {
    let mut images = Vec::new();
    let mut raw = Vec::new();
    let mut ids = Vec::new();
    for f in &demo.frames {
        let Some(p) = f.tool_pos.or_else(|| detect_tool(&f.image, &cfg.marker)) else {
            continue;
        };
        images.push(&f.image);
        raw.push(p);
        ids.push(f.index);
    }
    let smooth = smooth_positions(&raw);
    split_motions(&smooth)
        .iter()
        .flat_map(|set| extract_triplets(demo.id, &images, &raw, &ids, set, cfg))
        .collect()
}

/// Extracts all demos in parallel; output is ordered by (demo, m, n).
pub fn extract_all(demos: &[Demo], cfg: &ExtractConfig) -> Vec<PushTriplet> {
    let mut out: Vec<PushTriplet> = demos.par_iter().flat_map_iter(|d| extract_demo(d, cfg)).collect();
    out.sort_by_key(|t| (t.demo, t.m, t.n));
    out
}

/// Mean and population standard deviation of matched-contour distance and
/// pair bounding-box height.
pub fn compute_stats(triplets: &[PushTriplet]) -> Result<DatasetStats> {
    if triplets.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n = triplets.len() as f64;
    let ds: Vec<f64> = triplets.iter().map(|t| contour_distance(&t.x_m, &t.x_n)).collect();
    let hs: Vec<f64> = triplets.iter().map(|t| pair_bbox_height(&t.x_m, &t.x_n)).collect();
    let mean_sd = |xs: &[f64]| {
        let mu = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        (mu, var.sqrt())
    };
    let (mu_d, sigma_d) = mean_sd(&ds);
    let (mu_dv, sigma_dv) = mean_sd(&hs);
    Ok(DatasetStats { mu_d, sigma_d, mu_dv, sigma_dv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detects_single_marker() {
        let mut img = GrayImage::new(200, 200, 10);
        for v in 100..105 {
            for u in 100..105 {
                img.set(u, v, 255);
            }
        }
        assert_eq!(detect_tool(&img, &MarkerConfig::default()), Some(Point::new(102.0, 102.0)));
        assert_eq!(detect_tool(&GrayImage::new(20, 20, 10), &MarkerConfig::default()), None);
    }

    #[test]
    fn larger_marker_wins() {
        let mut img = GrayImage::new(100, 100, 10);
        for v in 0..3 {
            for u in 0..3 {
                img.set(u, v, 255);
            }
        }
        for v in 50..60 {
            for u in 70..80 {
                img.set(u, v, 255);
            }
        }
        assert_eq!(detect_tool(&img, &MarkerConfig::default()), Some(Point::new(74.5, 54.5)));
    }

    #[test]
    fn smoothing_examples() {
        let ps = [Point::new(0.0, 1.0), Point::new(4.0, 1.0), Point::new(8.0, 1.0)];
        assert_eq!(smooth_positions(&ps)[1], Point::new(4.0, 1.0));
        let ps = [Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(8.0, 0.0)];
        assert_eq!(smooth_positions(&ps)[1], Point::new(2.0, 0.0));
    }

    fn xs(vals: &[f64]) -> Vec<Point> {
        vals.iter().map(|&u| Point::new(u, 50.0)).collect()
    }

    #[test]
    fn sweep_pause_sweep_back() {
        // Moving samples: 0..=4 (right), 8..=13 (left); 5, 6, 7 have zero
        // forward velocity.
        let track = xs(&[0., 2., 4., 6., 8., 10., 10., 10., 10., 8., 6., 4., 2., 0.]);
        let sets = split_motions(&track);
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(sets[1].indices, vec![8, 9, 10, 11, 12, 13]);
    }

    #[test]
    fn monotone_and_stationary() {
        assert_eq!(split_motions(&xs(&[0., 3., 6., 9.])).len(), 1);
        assert!(split_motions(&xs(&[5.0; 10])).is_empty());
    }

    #[test]
    fn reversal_without_pause_splits() {
        let sets = split_motions(&xs(&[0., 3., 6., 3., 0.]));
        // v: +3, +3, -3, -3, -3 (last is backward difference).
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].indices, vec![0, 1]);
        assert_eq!(sets[1].indices, vec![2, 3, 4]);
    }

    #[test]
    fn stats_examples() {
        let line = |v: f64| Contour::new((0..10).map(|i| Point::new(i as f64, v)).collect());
        let t = |d: f64| PushTriplet { demo: 0, m: 0, n: 1, p: [0.0; 4], x_m: line(0.0), x_n: line(d) };
        let s = compute_stats(&[t(7.0)]).unwrap();
        assert_eq!((s.mu_d, s.sigma_d, s.mu_dv, s.sigma_dv), (7.0, 0.0, 7.0, 0.0));
        let s = compute_stats(&[t(4.0), t(8.0)]).unwrap();
        assert_eq!((s.mu_d, s.sigma_d), (6.0, 2.0));
        assert!(matches!(compute_stats(&[]), Err(DatasetError::Empty)));
    }

    proptest! {
        #[test]
        fn smoothing_matches_convolution(vals in prop::collection::vec(-100.0f64..100.0, 1..40)) {
            let ps = xs(&vals);
            let out = smooth_positions(&ps);
            prop_assert_eq!(out.len(), ps.len());
            for i in 0..vals.len() {
                let want = if i == 0 || i + 1 == vals.len() {
                    vals[i]
                } else {
                    (vals[i - 1] + 2.0 * vals[i] + vals[i + 1]) / 4.0
                };
                prop_assert!((out[i].u - want).abs() < 1e-12);
            }
        }

        #[test]
        fn smoothing_keeps_constants(c in -50.0f64..50.0, n in 1usize..20) {
            let ps = vec![Point::new(c, -c); n];
            prop_assert_eq!(smooth_positions(&ps), ps);
        }
    }
}
