//! Planar geometry shared by every subsystem.
//!
//! All coordinates are meters with the origin at the bottom-left corner of
//! the world, x to the right and y up.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or displacement in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Vec2) -> f64 {
        (self - other).norm_sq()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }

    /// Heading angle in radians, `atan2(y, x)`.
    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
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

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from((x, y): (f64, f64)) -> Self {
        Vec2::new(x, y)
    }
}

/// Axis-aligned rectangle given by its bottom-left corner and extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn min(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn max(&self) -> Vec2 {
        Vec2::new(self.x + self.w, self.y + self.h)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Closed containment.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    /// Overlap with another rectangle, if it has positive area.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x, self.y),
            Vec2::new(self.x + self.w, self.y),
            Vec2::new(self.x + self.w, self.y + self.h),
            Vec2::new(self.x, self.y + self.h),
        ]
    }
}

/// Shoelace signed area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

/// Even-odd point-in-polygon test. Points exactly on the boundary may go
/// either way; callers that need strict interior use [`point_strictly_inside`].
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the closed segment `a`-`b`, together with the
/// segment parameter of the closest point.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return (p.distance(a), 0.0);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (p.distance(a + ab * t), t)
}

/// Interior test that treats points within `1e-9` m of an edge as outside.
pub fn point_strictly_inside(p: Vec2, poly: &[Vec2]) -> bool {
    if !point_in_polygon(p, poly) {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]).0 > 1e-9)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Proper crossing test: the open segments intersect at a single interior
/// point of both. Collinear overlaps and touching endpoints do not count.
pub fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Closed segment intersection, including touching and collinear overlap.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    segments_cross(p1, p2, q1, q2)
        || on_segment(p1, q1, q2)
        || on_segment(p2, q1, q2)
        || on_segment(q1, p1, p2)
        || on_segment(q2, p1, p2)
}

/// True when no two non-adjacent edges of the ring intersect.
pub fn is_simple_polygon(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if poly[i] == poly[(i + 1) % n] {
            return false;
        }
    }
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Clip a simple polygon against an axis-aligned rectangle
/// (Sutherland-Hodgman). The area of the result is the exact overlap area,
/// also for non-convex subjects.
pub fn clip_polygon_to_rect(poly: &[Vec2], rect: &Rect) -> Vec<Vec2> {
    let (x0, y0) = (rect.x, rect.y);
    let (x1, y1) = (rect.x + rect.w, rect.y + rect.h);
    // Each plane keeps points with `dist(p) >= 0`.
    let planes: [&dyn Fn(Vec2) -> f64; 4] = [
        &|p: Vec2| p.x - x0,
        &|p: Vec2| x1 - p.x,
        &|p: Vec2| p.y - y0,
        &|p: Vec2| y1 - p.y,
    ];
    let mut out: Vec<Vec2> = poly.to_vec();
    for dist in planes {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let dc = dist(cur);
            let dp = dist(prev);
            if dc >= 0.0 {
                if dp < 0.0 {
                    out.push(prev.lerp(cur, dp / (dp - dc)));
                }
                out.push(cur);
            } else if dp >= 0.0 {
                out.push(prev.lerp(cur, dp / (dp - dc)));
            }
        }
    }
    out
}

/// Area of overlap between a polygon and a rectangle.
pub fn polygon_rect_overlap_area(poly: &[Vec2], rect: &Rect) -> f64 {
    signed_area(&clip_polygon_to_rect(poly, rect)).abs()
}

/// True when the segment passes through the polygon's interior.
pub fn segment_enters_polygon(a: Vec2, b: Vec2, poly: &[Vec2]) -> bool {
    if point_strictly_inside(a, poly) || point_strictly_inside(b, poly) {
        return true;
    }
    let n = poly.len();
    // Collect crossing parameters along a-b and probe between them.
    let mut ts = vec![0.0, 1.0];
    let ab = b - a;
    for i in 0..n {
        let (c, d) = (poly[i], poly[(i + 1) % n]);
        if segments_cross(a, b, c, d) {
            let cd = d - c;
            let denom = ab.cross(cd);
            if denom != 0.0 {
                ts.push(((c - a).cross(cd) / denom).clamp(0.0, 1.0));
            }
        }
        // Vertices lying on the segment split it too.
        let (dist, t) = point_segment_distance(c, a, b);
        if dist <= 1e-12 {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.windows(2)
        .filter(|w| w[1] - w[0] > 1e-12)
        .any(|w| point_strictly_inside(a.lerp(b, 0.5 * (w[0] + w[1])), poly))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Vec<Vec2> {
        Rect::new(x, y, s, s).corners().to_vec()
    }

    #[test]
    fn shoelace_orientation() {
        let sq = square(0.0, 0.0, 2.0);
        assert_eq!(signed_area(&sq), 4.0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(signed_area(&rev), -4.0);
    }

    #[test]
    fn clipping_matches_rect_overlap() {
        let sq = square(13.0, 13.0, 4.0);
        let cell = Rect::new(12.0, 12.0, 2.0, 2.0);
        assert!((polygon_rect_overlap_area(&sq, &cell) - 1.0).abs() < 1e-12);
        let far = Rect::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(polygon_rect_overlap_area(&sq, &far), 0.0);
        // touching along an edge has zero overlap
        let touching = Rect::new(17.0, 13.0, 2.0, 2.0);
        assert_eq!(polygon_rect_overlap_area(&sq, &touching), 0.0);
    }

    #[test]
    fn concave_clip_area() {
        // L-shaped polygon, area 3
        let l = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        let whole = Rect::new(-1.0, -1.0, 4.0, 4.0);
        assert!((polygon_rect_overlap_area(&l, &whole) - 3.0).abs() < 1e-12);
        let notch = Rect::new(1.0, 1.0, 1.0, 1.0);
        assert!(polygon_rect_overlap_area(&l, &notch) < 1e-12);
    }

    #[test]
    fn simple_polygon_detection() {
        assert!(is_simple_polygon(&square(0.0, 0.0, 1.0)));
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(!is_simple_polygon(&bowtie));
    }

    #[test]
    fn segment_through_square() {
        let sq = square(1.0, 1.0, 2.0);
        assert!(segment_enters_polygon(Vec2::new(0.0, 2.0), Vec2::new(4.0, 2.0), &sq));
        assert!(!segment_enters_polygon(Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), &sq));
        // grazing along an edge stays outside
        assert!(!segment_enters_polygon(Vec2::new(0.0, 1.0), Vec2::new(4.0, 1.0), &sq));
        // diagonal touching a corner only
        assert!(!segment_enters_polygon(Vec2::new(0.0, 2.0), Vec2::new(2.0, 0.0), &sq));
        assert!(segment_enters_polygon(Vec2::new(0.0, 4.0), Vec2::new(4.0, 0.0), &sq));
        assert!(!segment_enters_polygon(Vec2::new(0.0, 2.0), Vec2::new(1.0, 3.0), &sq));
    }

    #[test]
    fn strict_interior() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(point_strictly_inside(Vec2::new(0.5, 0.5), &sq));
        assert!(!point_strictly_inside(Vec2::new(0.0, 0.5), &sq));
        assert!(!point_strictly_inside(Vec2::new(1.5, 0.5), &sq));
    }
}
