//! Planar geometry shared by the simulator, the samplers and the evaluators.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Tolerance used for closed-boundary comparisons.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > EPS).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Heading of the vector in degrees, `(-180, 180]`.
    pub fn heading_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > EPS {
            self * (max / n)
        } else {
            self
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Planar pose; heading is in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl From<[f64; 3]> for Pose2 {
    fn from(a: [f64; 3]) -> Self {
        Pose2::new(a[0], a[1], a[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.heading_deg]
    }
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, heading_deg: f64) -> Self {
        Pose2 { x, y, heading_deg }
    }

    pub fn at(p: Vec2, heading_deg: f64) -> Self {
        Pose2::new(p.x, p.y, heading_deg)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn translated(&self, d: Vec2) -> Pose2 {
        Pose2::new(self.x + d.x, self.y + d.y, self.heading_deg)
    }
}

impl fmt::Display for Pose2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.1}deg)", self.x, self.y, self.heading_deg)
    }
}

/// Axis-aligned rectangle, always stored with `x0 <= x1` and `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Self {
        Rect::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new((self.x0 + self.x1) * 0.5, (self.y0 + self.y1) * 0.5)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn translated(&self, d: Vec2) -> Rect {
        Rect::new(self.x0 + d.x, self.y0 + d.y, self.x1 + d.x, self.y1 + d.y)
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x0, self.y0),
            Vec2::new(self.x1, self.y0),
            Vec2::new(self.x1, self.y1),
            Vec2::new(self.x0, self.y1),
        ]
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    /// Whether the closed segment `a`–`b` touches the closed rectangle.
    /// Liang–Barsky clipping.
    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let checks = [
            (-d.x, a.x - self.x0),
            (d.x, self.x1 - a.x),
            (-d.y, a.y - self.y0),
            (d.y, self.y1 - a.y),
        ];
        for (p, q) in checks {
            if p.abs() < EPS {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Minimum distance between the segment `a`–`b` and the rectangle.
    pub fn distance_to_segment(&self, a: Vec2, b: Vec2) -> f64 {
        if self.intersects_segment(a, b) {
            return 0.0;
        }
        let mut best = self.distance_to(a).min(self.distance_to(b));
        for c in self.corners() {
            best = best.min(point_segment_distance(c, a, b));
        }
        best
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 < EPS * EPS {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Smallest absolute angle between two directions, in degrees.
pub fn angle_between_deg(u: Vec2, v: Vec2) -> f64 {
    let c = u.cross(v);
    let d = u.dot(v);
    c.atan2(d).abs().to_degrees()
}

/// Points from `a` to `b` spaced at most `step` apart, both endpoints included.
pub fn interpolate(a: Vec2, b: Vec2, step: f64) -> Vec<Vec2> {
    let len = a.dist(b);
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_through_rect() {
        let r = Rect::new(1.0, 1.0, 2.0, 2.0);
        assert!(r.intersects_segment(Vec2::new(0.0, 1.5), Vec2::new(3.0, 1.5)));
        assert!(!r.intersects_segment(Vec2::new(0.0, 2.5), Vec2::new(3.0, 2.5)));
        // touching a corner counts
        assert!(r.intersects_segment(Vec2::new(0.0, 3.0), Vec2::new(3.0, 0.0)));
        // fully inside
        assert!(r.intersects_segment(Vec2::new(1.2, 1.2), Vec2::new(1.3, 1.3)));
    }

    #[test]
    fn segment_distance_parallel() {
        let r = Rect::new(1.0, 1.0, 2.0, 2.0);
        let d = r.distance_to_segment(Vec2::new(0.0, 2.5), Vec2::new(3.0, 2.5));
        assert!((d - 0.5).abs() < 1e-12);
        let d = r.distance_to_segment(Vec2::new(3.0, 3.0), Vec2::new(4.0, 3.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let pts = interpolate(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.3);
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0], Vec2::ZERO);
        assert_eq!(*pts.last().unwrap(), Vec2::new(1.0, 0.0));
        assert_eq!(interpolate(Vec2::ZERO, Vec2::ZERO, 0.1).len(), 2);
    }

    #[test]
    fn angles() {
        assert!((angle_between_deg(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)) - 90.0).abs() < 1e-9);
        assert!((angle_between_deg(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)) - 180.0).abs() < 1e-9);
    }
}
