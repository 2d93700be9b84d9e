//! Planar geometry shared by the scenario model, simulator and planner.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

/// A point or displacement in map coordinates (meters). `x` grows east, `y` grows north.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn manhattan(self, other: Vec2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    /// Counter-clockwise normal.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-12).then(|| Vec2::new(self.x / n, self.y / n))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned half-extents of a footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub half_length: f64,
    pub half_width: f64,
}

impl Extents {
    pub const fn new(half_length: f64, half_width: f64) -> Self {
        Self {
            half_length,
            half_width,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.half_length > 0.0 && self.half_width > 0.0
    }

    /// Half of the footprint's projection onto the unit direction `axis`.
    pub fn support(&self, axis: Vec2) -> f64 {
        self.half_length * axis.x.abs() + self.half_width * axis.y.abs()
    }
}

/// Axis-aligned rectangle given by its center and half-extents.
///
/// Footprints are never rotated with the heading: `half_length` always spans
/// the map x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: Vec2,
    pub extents: Extents,
}

impl Aabb {
    pub const fn new(center: Vec2, extents: Extents) -> Self {
        Self { center, extents }
    }

    pub fn min(&self) -> Vec2 {
        Vec2::new(
            self.center.x - self.extents.half_length,
            self.center.y - self.extents.half_width,
        )
    }

    pub fn max(&self) -> Vec2 {
        Vec2::new(
            self.center.x + self.extents.half_length,
            self.center.y + self.extents.half_width,
        )
    }

    /// Strict-interior intersection: rectangles that only share an edge or a
    /// corner do not overlap.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        let dx = (self.center.x - other.center.x).abs();
        let dy = (self.center.y - other.center.y).abs();
        dx < self.extents.half_length + other.extents.half_length
            && dy < self.extents.half_width + other.extents.half_width
    }

    /// Euclidean gap between the two rectangles; zero when they touch or overlap.
    pub fn gap(&self, other: &Aabb) -> f64 {
        let dx = (self.center.x - other.center.x).abs()
            - (self.extents.half_length + other.extents.half_length);
        let dy = (self.center.y - other.center.y).abs()
            - (self.extents.half_width + other.extents.half_width);
        dx.max(0.0).hypot(dy.max(0.0))
    }

    pub fn contains_rect(&self, inner: &Aabb) -> bool {
        let (a, b) = (self.min(), self.max());
        let (c, d) = (inner.min(), inner.max());
        c.x >= a.x && c.y >= a.y && d.x <= b.x && d.y <= b.y
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        let (a, b) = (self.min(), self.max());
        p.x >= a.x && p.x <= b.x && p.y >= a.y && p.y <= b.y
    }
}

/// Position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub const fn new(position: Vec2, heading: f64) -> Self {
        Self { position, heading }
    }

    /// Expresses a map point in this pose's frame: x forward, y to the left.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let d = p - self.position;
        let (s, c) = self.heading.sin_cos();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    pub fn to_map(&self, local: Vec2) -> Vec2 {
        let (s, c) = self.heading.sin_cos();
        self.position + Vec2::new(c * local.x - s * local.y, s * local.x + c * local.y)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_heading(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 1e-18 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Shortest distance from `p` to a polyline. Infinite for an empty polyline.
pub fn point_polyline_distance(p: Vec2, line: &[Vec2]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.distance(*only),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn polyline_length(line: &[Vec2]) -> f64 {
    line.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn touching_edges_do_not_overlap() {
        let a = Aabb::new(Vec2::new(0.0, 0.0), Extents::new(1.0, 1.0));
        let b = Aabb::new(Vec2::new(2.0, 0.0), Extents::new(1.0, 1.0));
        assert!(!a.overlaps(&b));
        assert_eq!(a.gap(&b), 0.0);
        let c = Aabb::new(Vec2::new(1.999, 0.5), Extents::new(1.0, 1.0));
        assert!(a.overlaps(&c));
    }

    #[test]
    fn gap_is_euclidean_between_corners() {
        let a = Aabb::new(Vec2::new(0.0, 0.0), Extents::new(1.0, 1.0));
        let b = Aabb::new(Vec2::new(5.0, 6.0), Extents::new(1.0, 1.0));
        assert!((a.gap(&b) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pose_round_trip() {
        let pose = Pose::new(Vec2::new(3.0, -2.0), 0.7);
        let p = Vec2::new(10.0, 4.0);
        let back = pose.to_map(pose.to_local(p));
        assert!(back.distance(p) < 1e-12);
        let ahead = Pose::new(Vec2::default(), PI / 2.0).to_local(Vec2::new(0.0, 5.0));
        assert!((ahead.x - 5.0).abs() < 1e-12 && ahead.y.abs() < 1e-12);
    }

    #[test]
    fn heading_wraps() {
        assert_eq!(normalize_heading(0.0), 0.0);
        assert!((normalize_heading(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert!((normalize_heading(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
        assert!(normalize_heading(-1e-300) < TAU);
    }

    #[test]
    fn polyline_distance() {
        let line = [Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)];
        assert!((point_polyline_distance(Vec2::new(5.0, 3.0), &line) - 3.0).abs() < 1e-12);
        assert!((point_polyline_distance(Vec2::new(12.0, 5.0), &line) - 2.0).abs() < 1e-12);
        assert_eq!(polyline_length(&line), 20.0);
        assert!(point_polyline_distance(Vec2::default(), &[]).is_infinite());
    }
}
