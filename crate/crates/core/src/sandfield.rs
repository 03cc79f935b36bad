//! Heightfield stand-in for the plastic material, plus the overhead camera.
//!
//! The material model is deliberately minimal and mass-exact:
//!
//! * a **push** plows every column swept by the tool (tool at base level) and
//!   deposits the removed material uniformly in a berm ahead of the final tool
//!   face;
//! * a **tap** levels the tool footprint down to a fixed height and spills the
//!   excess uniformly onto the one-cell ring around it.
//!
//! Both operations touch only cells near the action geometry; everything else
//! is left bit-identical.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::{Point, Roi};
use crate::vision::GrayImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SandError {
    #[error("zero-length push")]
    ZeroLengthPush,
    #[error("action lies fully outside the workspace")]
    OutsideWorkspace,
    #[error("invalid tool footprint {w}x{h} for a {width}x{height} grid")]
    InvalidTool {
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid heightfield: {0}")]
    InvalidHeights(String),
    #[error("non-finite action coordinates")]
    NonFinite,
}

pub type Result<T, E = SandError> = std::result::Result<T, E>;

/// Size of the tool's contact surface as seen in the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFootprint {
    pub w_tcp: usize,
    pub h_tcp: usize,
}

impl Default for ToolFootprint {
    fn default() -> Self {
        Self {
            w_tcp: 30,
            h_tcp: 40,
        }
    }
}

impl ToolFootprint {
    pub fn new(w_tcp: usize, h_tcp: usize) -> Self {
        Self { w_tcp, h_tcp }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.w_tcp == 0 || self.h_tcp == 0 || self.w_tcp > width || self.h_tcp > height {
            return Err(SandError::InvalidTool {
                w: self.w_tcp,
                h: self.h_tcp,
                width,
                height,
            });
        }
        Ok(())
    }

    pub fn diagonal(&self) -> f64 {
        (self.w_tcp as f64).hypot(self.h_tcp as f64)
    }
}

/// Where a tap target pixel sits relative to the leveled footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapAnchor {
    /// Target is the footprint's top-left cell (the resampled-cell corner).
    #[default]
    Corner,
    /// Target is the footprint's center.
    Center,
}

/// Parameters of the material response that are not part of the action itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialConfig {
    pub tap_level: f64,
    pub tap_anchor: TapAnchor,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            tap_level: 2.0,
            tap_anchor: TapAnchor::Corner,
        }
    }
}

/// Seeded per-pixel luminance jitter applied to sand pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderNoise {
    pub amplitude: u8,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub background_luminance: u8,
    pub sand_base_luminance: u8,
    pub luminance_gain: f64,
    pub h_max: f64,
    pub presence_threshold: f64,
    pub noise: Option<RenderNoise>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background_luminance: 10,
            sand_base_luminance: 60,
            luminance_gain: 19.0,
            h_max: 10.0,
            presence_threshold: 0.05,
            noise: None,
        }
    }
}

impl RenderConfig {
    /// Luminance of a single column of the given height (noise excluded).
    pub fn luminance(&self, height: f64) -> u8 {
        if height < self.presence_threshold {
            return self.background_luminance;
        }
        let l = self.sand_base_luminance as f64 + self.luminance_gain * height.min(self.h_max);
        l.round().clamp(0.0, 255.0) as u8
    }

    /// Midpoint between background and bare-sand luminance; the default
    /// binarization threshold for contour detection.
    pub fn sand_threshold(&self) -> u8 {
        ((self.background_luminance as u16 + self.sand_base_luminance as u16) / 2) as u8
    }
}

/// Row-major heightfield; one cell per image pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandGrid {
    width: usize,
    height: usize,
    heights: Vec<f64>,
    workspace: Roi,
}

impl SandGrid {
    /// Empty grid whose workspace is the whole frame.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            heights: vec![0.0; width * height],
            workspace: Roi::full(width, height),
        }
    }

    pub fn from_heights(width: usize, height: usize, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != width * height {
            return Err(SandError::InvalidHeights(format!(
                "expected {} cells, got {}",
                width * height,
                heights.len()
            )));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite() || **h < 0.0) {
            return Err(SandError::InvalidHeights(format!("bad height {h}")));
        }
        Ok(Self {
            width,
            height,
            heights,
            workspace: Roi::full(width, height),
        })
    }

    pub fn with_workspace(mut self, workspace: Roi) -> Result<Self> {
        if workspace.is_empty() || !workspace.fits_in(self.width, self.height) {
            return Err(SandError::InvalidHeights(format!(
                "workspace {workspace:?} does not fit a {}x{} grid",
                self.width, self.height
            )));
        }
        self.workspace = workspace;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn workspace(&self) -> Roi {
        self.workspace
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.heights[v * self.width + u]
    }

    /// Sets one cell. Negative or non-finite heights are clamped to zero.
    pub fn set(&mut self, u: usize, v: usize, h: f64) {
        self.heights[v * self.width + u] = if h.is_finite() { h.max(0.0) } else { 0.0 };
    }

    pub fn bounds(&self) -> Roi {
        Roi::full(self.width, self.height)
    }

    /// SHA-256 over dimensions and raw height bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.height as u64).to_le_bytes());
        for h in &self.heights {
            hasher.update(h.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Centroid of the cells at or above `threshold`.
    pub fn sand_centroid(&self, threshold: f64) -> Option<Point> {
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for v in 0..self.height {
            for u in 0..self.width {
                if self.get(u, v) >= threshold {
                    su += u as f64;
                    sv += v as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| Point::new(su / n as f64, sv / n as f64))
    }
}

pub fn total_mass(grid: &SandGrid) -> f64 {
    grid.heights.iter().sum()
}

/// Clips the segment `a -> b` to the closed rectangle spanned by pixel centers
/// of `roi` (Liang-Barsky).
fn clip_segment(a: Point, b: Point, roi: &Roi) -> Option<(Point, Point)> {
    let (x0, x1) = (roi.u_min as f64, roi.u_end() as f64 - 1.0);
    let (y0, y1) = (roi.v_min as f64, roi.v_end() as f64 - 1.0);
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.u, a.u - x0),
        (d.u, x1 - a.u),
        (-d.v, a.v - y0),
        (d.v, y1 - a.v),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| (a.lerp(b, t0), a.lerp(b, t1)))
}

/// Inclusive integer bounding box of a set of points, clipped to a frame.
fn cell_box(points: &[Point], pad: f64, clip: &Roi) -> Option<(usize, usize, usize, usize)> {
    let umin = points.iter().map(|p| p.u).fold(f64::INFINITY, f64::min) - pad;
    let umax = points.iter().map(|p| p.u).fold(f64::NEG_INFINITY, f64::max) + pad;
    let vmin = points.iter().map(|p| p.v).fold(f64::INFINITY, f64::min) - pad;
    let vmax = points.iter().map(|p| p.v).fold(f64::NEG_INFINITY, f64::max) + pad;
    let u0 = umin.floor().max(clip.u_min as f64);
    let u1 = umax.ceil().min(clip.u_end() as f64 - 1.0);
    let v0 = vmin.floor().max(clip.v_min as f64);
    let v1 = vmax.ceil().min(clip.v_end() as f64 - 1.0);
    (u0 <= u1 && v0 <= v1).then(|| (u0 as usize, u1 as usize, v0 as usize, v1 as usize))
}

/// Plows the swath swept by the tool from `start` to `end` and deposits the
/// removed material, mass-exactly, in a band ahead of the final tool face.
///
/// The segment is clipped to the workspace. The swath is every workspace cell
/// whose center projects onto the segment and lies within `w_tcp / 2` of it.
/// The band is `ceil(w_tcp / 2)` cells deep and one cell wider than the tool
/// on each side.
pub fn apply_push(
    grid: &SandGrid,
    start: Point,
    end: Point,
    tool: ToolFootprint,
) -> Result<SandGrid> {
    let mut out = grid.clone();
    push_in_place(&mut out, start, end, tool)?;
    Ok(out)
}

pub fn push_in_place(
    grid: &mut SandGrid,
    start: Point,
    end: Point,
    tool: ToolFootprint,
) -> Result<()> {
    tool.validate(grid.width, grid.height)?;
    if !start.is_finite() || !end.is_finite() {
        return Err(SandError::NonFinite);
    }
    if start == end {
        return Err(SandError::ZeroLengthPush);
    }
    let (s, e) = clip_segment(start, end, &grid.workspace).ok_or(SandError::OutsideWorkspace)?;
    let length = s.dist(e);
    if length == 0.0 {
        return Err(SandError::ZeroLengthPush);
    }
    let dir = (e - s) * (1.0 / length);
    let normal = Point::new(-dir.v, dir.u);
    let half_w = tool.w_tcp as f64 / 2.0;
    let depth = tool.w_tcp.div_ceil(2) as f64;
    let band_half_w = half_w + 1.0;

    let project = |u: usize, v: usize| {
        let c = Point::new(u as f64, v as f64) - s;
        (c.dot(dir), c.dot(normal))
    };

    let mut moved = 0.0;
    let mut final_face = Vec::new();
    if let Some((u0, u1, v0, v1)) = cell_box(&[s, e], half_w + 1.0, &grid.workspace) {
        for v in v0..=v1 {
            for u in u0..=u1 {
                let (t, n) = project(u, v);
                if (0.0..=length).contains(&t) && n.abs() <= half_w {
                    let idx = v * grid.width + u;
                    moved += grid.heights[idx];
                    grid.heights[idx] = 0.0;
                    if t > length - 1.0 {
                        final_face.push(idx);
                    }
                }
            }
        }
    }
    if moved == 0.0 {
        return Ok(());
    }

    let front = e + dir * depth;
    let corners = [
        e + normal * band_half_w,
        e - normal * band_half_w,
        front + normal * band_half_w,
        front - normal * band_half_w,
    ];
    let mut band = Vec::new();
    if let Some((u0, u1, v0, v1)) = cell_box(&corners, 1.0, &grid.bounds()) {
        for v in v0..=v1 {
            for u in u0..=u1 {
                let (t, n) = project(u, v);
                if t > length && t <= length + depth && n.abs() <= band_half_w {
                    band.push(v * grid.width + u);
                }
            }
        }
    }
    // Pushing into the frame edge: the material stays under the final face.
    let targets = if band.is_empty() { &final_face } else { &band };
    if targets.is_empty() {
        return Err(SandError::OutsideWorkspace);
    }
    let share = moved / targets.len() as f64;
    for &idx in targets {
        grid.heights[idx] += share;
    }
    Ok(())
}

/// Footprint rectangle for a tap at `target`, clipped to the workspace.
pub fn tap_footprint(
    grid: &SandGrid,
    target: Point,
    tool: ToolFootprint,
    anchor: TapAnchor,
) -> Result<Roi> {
    if !target.is_finite() {
        return Err(SandError::NonFinite);
    }
    let (mut u0, mut v0) = (target.u.floor() as i64, target.v.floor() as i64);
    if anchor == TapAnchor::Center {
        u0 -= (tool.w_tcp / 2) as i64;
        v0 -= (tool.h_tcp / 2) as i64;
    }
    let u1 = u0 + tool.w_tcp as i64;
    let v1 = v0 + tool.h_tcp as i64;
    let ws = grid.workspace;
    let cu0 = u0.max(ws.u_min as i64);
    let cv0 = v0.max(ws.v_min as i64);
    let cu1 = u1.min(ws.u_end() as i64);
    let cv1 = v1.min(ws.v_end() as i64);
    if cu1 <= cu0 || cv1 <= cv0 {
        return Err(SandError::OutsideWorkspace);
    }
    Ok(Roi::new(
        cu0 as usize,
        cv0 as usize,
        (cu1 - cu0) as usize,
        (cv1 - cv0) as usize,
    ))
}

/// Levels the tool footprint to `min(mean footprint height, tap_level)` and
/// spills the excess uniformly onto the one-cell ring around the footprint.
pub fn apply_tap(
    grid: &SandGrid,
    target: Point,
    tool: ToolFootprint,
    tap_level: f64,
    anchor: TapAnchor,
) -> Result<SandGrid> {
    let mut out = grid.clone();
    tap_in_place(&mut out, target, tool, tap_level, anchor)?;
    Ok(out)
}

pub fn tap_in_place(
    grid: &mut SandGrid,
    target: Point,
    tool: ToolFootprint,
    tap_level: f64,
    anchor: TapAnchor,
) -> Result<()> {
    tool.validate(grid.width, grid.height)?;
    let fp = tap_footprint(grid, target, tool, anchor)?;
    let w = grid.width;
    let cells = || (fp.v_min..fp.v_end()).flat_map(move |v| (fp.u_min..fp.u_end()).map(move |u| v * w + u));

    let first = grid.heights[fp.v_min * w + fp.u_min];
    if cells().all(|i| grid.heights[i] == first) && first <= tap_level {
        return Ok(());
    }
    let sum: f64 = cells().map(|i| grid.heights[i]).sum();
    let count = (fp.width * fp.height) as f64;
    let mean = sum / count;

    let ring = fp.expand(1, &grid.bounds());
    let ring_cells: Vec<usize> = (ring.v_min..ring.v_end())
        .flat_map(|v| (ring.u_min..ring.u_end()).map(move |u| (u, v)))
        .filter(|&(u, v)| !fp.contains(u, v))
        .map(|(u, v)| v * w + u)
        .collect();

    let level = if mean > tap_level && !ring_cells.is_empty() {
        tap_level.max(0.0)
    } else {
        mean
    };
    let excess = sum - level * count;
    for i in cells() {
        grid.heights[i] = level;
    }
    if excess > 0.0 && level < mean {
        let share = excess / ring_cells.len() as f64;
        for i in ring_cells {
            grid.heights[i] += share;
        }
    }
    Ok(())
}

/// Top-down grayscale view of the heightfield.
pub fn render(grid: &SandGrid, cfg: &RenderConfig) -> GrayImage {
    let mut pixels: Vec<u8> = grid.heights.iter().map(|&h| cfg.luminance(h)).collect();
    if let Some(noise) = cfg.noise {
        if noise.amplitude > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let amp = noise.amplitude as i16;
            for (p, &h) in pixels.iter_mut().zip(&grid.heights) {
                let jitter: i16 = rng.random_range(-amp..=amp);
                if h >= cfg.presence_threshold {
                    *p = (*p as i16 + jitter).clamp(0, 255) as u8;
                }
            }
        }
    }
    GrayImage::from_raw(grid.width, grid.height, pixels).expect("grid dimensions are consistent")
}
