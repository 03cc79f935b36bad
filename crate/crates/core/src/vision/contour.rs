//! Outer-contour extraction and matching.
//!
//! The outer border of the largest sand region inside a ROI is traced with
//! Suzuki-Abe border following. Border pixels lying on the ROI frame are
//! dropped: they are where the crop cuts the material, not where material
//! meets background. What remains is resampled to `n` points uniformly by arc
//! length, starting from the lowest `(u, v)` end.

use serde::{Deserialize, Serialize};

use super::blobs::{connected_components, largest};
use super::{GrayImage, Result, Roi, VisionError};
use crate::geom::Point;

/// `n` ordered samples along a material contour.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Point>,
}

impl Contour {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[u_1, v_1, ..., u_n, v_n]`.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.u, p.v]).collect()
    }

    pub fn from_flat(values: &[f64]) -> Self {
        Self::new(values.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect())
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let s = self.points.iter().fold(Point::default(), |acc, p| acc + *p);
        Point::new(s.u / n, s.v / n)
    }

    pub fn translated(&self, delta: Point) -> Self {
        Self::new(self.points.iter().map(|p| *p + delta).collect())
    }

    /// Euclidean norm of the stacked coordinate difference.
    pub fn stacked_distance(&self, other: &Contour) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| {
                let d = *a - *b;
                d.dot(d)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// A candidate contour reordered against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedContour {
    pub contour: Contour,
    /// Sum of matched-pair distances.
    pub cost: f64,
    pub shift: usize,
    pub reversed: bool,
}

// Clockwise on screen (v grows downward).
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

fn dir_index(du: i64, dv: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (du, dv))
        .expect("neighbouring pixels")
}

/// Suzuki-Abe outer border following from `start`, the raster-first pixel of
/// its component (so its west neighbour is background).
fn trace_outer(mask: &[bool], w: usize, h: usize, start: (i64, i64)) -> Vec<(i64, i64)> {
    let fg = |(u, v): (i64, i64)| u >= 0 && v >= 0 && u < w as i64 && v < h as i64 && mask[v as usize * w + u as usize];
    let step = |p: (i64, i64), d: usize| (p.0 + DIRS[d].0, p.1 + DIRS[d].1);

    let Some(d1) = (0..8).map(|k| (WEST + k) % 8).find(|&d| fg(step(start, d))) else {
        return vec![start];
    };
    let p1 = step(start, d1);
    let (mut prev, mut cur) = (p1, start);
    let mut out = Vec::new();
    let guard = 4 * w * h + 8;
    loop {
        let d2 = dir_index(prev.0 - cur.0, prev.1 - cur.1);
        let d4 = (1..=8)
            .map(|k| (d2 + 8 - k) % 8)
            .find(|&d| fg(step(cur, d)))
            .expect("non-isolated pixel has a neighbour");
        let next = step(cur, d4);
        out.push(cur);
        if (next == start && cur == p1) || out.len() > guard {
            break;
        }
        prev = cur;
        cur = next;
    }
    out
}

fn lex_less(a: Point, b: Point) -> bool {
    (a.u, a.v) < (b.u, b.v)
}

/// Arc-length resampling of a polyline; `breaks[k]` marks vertex `k` as the
/// start of a new piece (no arc length from the previous vertex).
fn resample(vertices: &[Point], breaks: &[bool], n: usize, closed: bool) -> Vec<Point> {
    let mut verts = vertices.to_vec();
    let mut brk = breaks.to_vec();
    if closed {
        verts.push(vertices[0]);
        brk.push(false);
    }
    let mut cum = Vec::with_capacity(verts.len());
    let mut acc = 0.0;
    for k in 0..verts.len() {
        if k > 0 && !brk[k] {
            acc += verts[k].dist(verts[k - 1]);
        }
        cum.push(acc);
    }
    let total = acc;
    (0..n)
        .map(|i| {
            let s = match (closed, n) {
                (true, _) => total * i as f64 / n as f64,
                (false, 1) => 0.0,
                (false, _) => total * i as f64 / (n - 1) as f64,
            };
            let k = cum.partition_point(|&c| c <= s).saturating_sub(1);
            if k + 1 < verts.len() && !brk[k + 1] && cum[k + 1] > cum[k] {
                let t = ((s - cum[k]) / (cum[k + 1] - cum[k])).clamp(0.0, 1.0);
                verts[k].lerp(verts[k + 1], t)
            } else {
                verts[k]
            }
        })
        .collect()
}

/// Samples `n` points along the material/background border of the largest
/// sand region (luminance `>= sand_threshold`) inside `roi`.
pub fn detect_contour(img: &GrayImage, roi: Roi, n: usize, sand_threshold: u8) -> Result<Contour> {
    if roi.is_empty() || !roi.fits_in(img.width(), img.height()) {
        return Err(VisionError::InvalidRoi(roi));
    }
    if n == 0 {
        return Err(VisionError::ContourNotDetected);
    }
    let (w, h) = (roi.width, roi.height);
    let mut mask = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            mask[v * w + u] = img.get(roi.u_min + u, roi.v_min + v) >= sand_threshold;
        }
    }
    let (labels, comps) = connected_components(&mask, w, h);
    let comp = largest(&comps).ok_or(VisionError::ContourNotDetected)?;
    let own: Vec<bool> = labels.labels.iter().map(|&l| l == comp.label).collect();
    let start = ((comp.first % w) as i64, (comp.first / w) as i64);
    let border = trace_outer(&own, w, h, start);

    let on_frame = |&(u, v): &(i64, i64)| u == 0 || v == 0 || u == w as i64 - 1 || v == h as i64 - 1;
    let to_point = |&(u, v): &(i64, i64)| Point::new((roi.u_min as i64 + u) as f64, (roi.v_min as i64 + v) as f64);

    let Some(cut) = border.iter().position(on_frame) else {
        // Closed border strictly inside the ROI.
        let pts: Vec<Point> = border.iter().map(to_point).collect();
        let first = (0..pts.len())
            .fold(0, |best, i| if lex_less(pts[i], pts[best]) { i } else { best });
        let rotated: Vec<Point> = pts[first..].iter().chain(&pts[..first]).copied().collect();
        let breaks = vec![false; rotated.len()];
        return Ok(Contour::new(resample(&rotated, &breaks, n, true)));
    };

    // Split the cyclic border into runs of interface pixels.
    let len = border.len();
    let mut pieces: Vec<Vec<Point>> = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    for k in 1..=len {
        let px = &border[(cut + k) % len];
        if on_frame(px) {
            if !current.is_empty() {
                pieces.push(std::mem::take(&mut current));
            }
        } else {
            current.push(to_point(px));
        }
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    if pieces.is_empty() {
        return Err(VisionError::ContourNotDetected);
    }
    for piece in &mut pieces {
        if lex_less(*piece.last().unwrap(), piece[0]) {
            piece.reverse();
        }
    }
    pieces.sort_by(|a, b| (a[0].u, a[0].v).partial_cmp(&(b[0].u, b[0].v)).unwrap());
    let mut vertices = Vec::new();
    let mut breaks = Vec::new();
    for piece in pieces {
        for (i, p) in piece.into_iter().enumerate() {
            breaks.push(i == 0 && !vertices.is_empty());
            vertices.push(p);
        }
    }
    Ok(Contour::new(resample(&vertices, &breaks, n, false)))
}

/// Reorders `candidate` to minimize the summed matched-pair distance to
/// `reference`, searching cyclic shifts in both directions. The earliest
/// ordering wins ties (forward before reversed, smaller shift first).
pub fn match_contours(reference: &Contour, candidate: &Contour) -> Result<MatchedContour> {
    let n = reference.len();
    if candidate.len() != n {
        return Err(VisionError::LengthMismatch(n, candidate.len()));
    }
    let mut best: Option<MatchedContour> = None;
    for reversed in [false, true] {
        let base: Vec<Point> = if reversed {
            candidate.points.iter().rev().copied().collect()
        } else {
            candidate.points.clone()
        };
        for shift in 0..n.max(1) {
            let cost: f64 = (0..n)
                .map(|i| reference.points[i].dist(base[(shift + i) % n]))
                .sum();
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(MatchedContour {
                    contour: Contour::new((0..n).map(|i| base[(shift + i) % n]).collect()),
                    cost,
                    shift,
                    reversed,
                });
            }
        }
    }
    Ok(best.unwrap_or(MatchedContour {
        contour: Contour::default(),
        cost: 0.0,
        shift: 0,
        reversed: false,
    }))
}

/// Mean Euclidean distance over matched pairs.
///
/// # Panics
/// If the contours have different lengths.
pub fn contour_distance(a: &Contour, b: &Contour) -> f64 {
    assert_eq!(a.len(), b.len(), "contours must be matched");
    if a.is_empty() {
        return 0.0;
    }
    a.points.iter().zip(&b.points).map(|(p, q)| p.dist(*q)).sum::<f64>() / a.len() as f64
}

/// Height of the smallest axis-aligned box enclosing both contours.
pub fn pair_bbox_height(a: &Contour, b: &Contour) -> f64 {
    let vs = a.points.iter().chain(&b.points).map(|p| p.v);
    let (lo, hi) = vs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}
