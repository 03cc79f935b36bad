//! Pixel-plane geometry shared by every layer.

use serde::{Deserialize, Serialize};

/// A point in image coordinates: `u` grows to the right, `v` grows downward.
///
/// Coordinates are real-valued because sampled contours, interpolated
/// contours and centroid pushes are not integral.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.u * other.u + self.v * other.v
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.u + t * (other.u - self.u),
            self.v + t * (other.v - self.v),
        )
    }

    pub fn round(self) -> Point {
        Point::new(self.u.round(), self.v.round())
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.u + rhs.u, self.v + rhs.v)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.u - rhs.u, self.v - rhs.v)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.u * rhs, self.v * rhs)
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// Axis-aligned pixel rectangle `[u_min, u_min + width) x [v_min, v_min + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Roi {
    pub u_min: usize,
    pub v_min: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub const fn new(u_min: usize, v_min: usize, width: usize, height: usize) -> Self {
        Self {
            u_min,
            v_min,
            width,
            height,
        }
    }

    /// The whole `width x height` frame.
    pub const fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    /// Exclusive right edge.
    pub fn u_end(&self) -> usize {
        self.u_min + self.width
    }

    /// Exclusive bottom edge.
    pub fn v_end(&self) -> usize {
        self.v_min + self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u >= self.u_min && u < self.u_end() && v >= self.v_min && v < self.v_end()
    }

    /// Containment for a real-valued point, with pixel centers at integers.
    pub fn contains_point(&self, p: Point, tol: f64) -> bool {
        p.u >= self.u_min as f64 - tol
            && p.u <= (self.u_end() as f64 - 1.0) + tol
            && p.v >= self.v_min as f64 - tol
            && p.v <= (self.v_end() as f64 - 1.0) + tol
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.u_end() <= width && self.v_end() <= height
    }

    pub fn intersect(&self, other: &Roi) -> Option<Roi> {
        let u0 = self.u_min.max(other.u_min);
        let v0 = self.v_min.max(other.v_min);
        let u1 = self.u_end().min(other.u_end());
        let v1 = self.v_end().min(other.v_end());
        (u1 > u0 && v1 > v0).then(|| Roi::new(u0, v0, u1 - u0, v1 - v0))
    }

    /// Grows the rectangle by `margin` on every side, clipped to `bounds`.
    pub fn expand(&self, margin: usize, bounds: &Roi) -> Roi {
        let u0 = self.u_min.saturating_sub(margin).max(bounds.u_min);
        let v0 = self.v_min.saturating_sub(margin).max(bounds.v_min);
        let u1 = (self.u_end() + margin).min(bounds.u_end());
        let v1 = (self.v_end() + margin).min(bounds.v_end());
        Roi::new(u0, v0, u1.saturating_sub(u0), v1.saturating_sub(v0))
    }

    pub fn center(&self) -> Point {
        Point::new(
            self.u_min as f64 + (self.width as f64 - 1.0) / 2.0,
            self.v_min as f64 + (self.height as f64 - 1.0) / 2.0,
        )
    }
}
