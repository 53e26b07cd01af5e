//! Small geometric primitives shared across the pipeline.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// An inverted box that absorbs any point grown into it.
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Point>>(points: I) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb { min: self.min - m, max: self.max + m }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn clamp(&self, p: &Point) -> Point {
        p.sup(&self.min).inf(&self.max)
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            if v < self.min[k] {
                d2 += (self.min[k] - v).powi(2);
            } else if v > self.max[k] {
                d2 += (v - self.max[k]).powi(2);
            }
        }
        d2
    }
}

/// Closest point to `p` on the segment `[a, b]`.
pub fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::MIN_POSITIVE {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point to `p` on triangle `(a, b, c)`.
///
/// Region-based walk over the Voronoi regions of the triangle features.
/// Zero-area triangles fall back to the closest of their three edges.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let n2 = ab.cross(&ac).norm_squared();
    let scale2 = ab.norm_squared().max(ac.norm_squared());
    if n2 <= 1e-24 * scale2 * scale2 || scale2 == 0.0 {
        let cands =
            [closest_point_on_segment(p, a, b), closest_point_on_segment(p, b, c), closest_point_on_segment(p, c, a)];
        return cands.into_iter().min_by(|u, v| (u - p).norm_squared().total_cmp(&(v - p).norm_squared())).unwrap();
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    (closest_point_on_triangle(p, a, b, c) - p).norm()
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Angle in degrees between two vectors; `None` if either is (near) zero.
pub fn angle_deg(u: &Vec3, v: &Vec3) -> Option<f64> {
    let nu = u.norm();
    let nv = v.norm();
    if nu < 1e-300 || nv < 1e-300 {
        return None;
    }
    let cos = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_closest_point_regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let d = point_triangle_distance(&Point::new(0.25, 0.25, 0.5), &a, &b, &c);
        assert!((d - 0.5).abs() < 1e-15);
        // vertex region
        let d = point_triangle_distance(&Point::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        // hypotenuse edge region
        let d = point_triangle_distance(&Point::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_triangle_acts_as_segment() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(2.0, 0.0, 0.0);
        let d = point_triangle_distance(&Point::new(1.5, 1.0, 0.0), &a, &b, &c);
        assert!((d - 1.0).abs() < 1e-12);
        let d = point_triangle_distance(&Point::new(0.0, 0.0, 3.0), &a, &a, &a);
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn aabb_distance_and_clamp() {
        let b = Aabb::new(Point::origin(), Point::new(1.0, 1.0, 1.0));
        assert_eq!(b.distance_squared(&Point::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance_squared(&Point::new(2.0, 0.5, 0.5)) - 1.0).abs() < 1e-15);
        assert_eq!(b.clamp(&Point::new(2.0, -1.0, 0.5)), Point::new(1.0, 0.0, 0.5));
    }
}
