//! Closed-form unsigned distance fields for test shapes.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, Vec3};

/// Built-in shapes with exact unsigned distance functions.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticShape {
    /// Sphere surface.
    Sphere { center: Point, radius: f64 },
    /// Infinite plane `normal . x = offset`; `half_size` bounds the box used
    /// for tracing.
    Plane { normal: Vec3, offset: f64, half_size: f64 },
    /// Open disk of the given radius in the plane z = 0.
    Disk { radius: f64 },
    /// Torus surface around the z axis.
    Torus { major: f64, minor: f64 },
    /// Open tube around the z axis, z in [-half_length, half_length].
    Cylinder { radius: f64, half_length: f64 },
    /// Three rectangles sharing the z axis, at 120 degree spacing.
    ThreeFin { length: f64, half_height: f64 },
    /// Two parallel squares at z = +-gap/2.
    TwoPlates { gap: f64, half_size: f64 },
}

fn fin_direction(i: usize) -> (Vec3, Vec3) {
    let a = 2.0 * PI * i as f64 / 3.0;
    let u = Vec3::new(a.cos(), a.sin(), 0.0);
    let v = Vec3::new(-a.sin(), a.cos(), 0.0);
    (u, v)
}

fn square_distance(p: &Point, z0: f64, a: f64) -> f64 {
    let dx = (p.x.abs() - a).max(0.0);
    let dy = (p.y.abs() - a).max(0.0);
    let dz = p.z - z0;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

impl AnalyticShape {
    pub fn unit_sphere() -> Self {
        AnalyticShape::Sphere { center: Point::origin(), radius: 1.0 }
    }

    pub fn plane_z() -> Self {
        AnalyticShape::Plane { normal: Vec3::z(), offset: 0.0, half_size: 1.0 }
    }

    /// Parses `name` or `name:key=value,key=value`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n, p),
            None => (spec, ""),
        };
        let mut kv = Vec::new();
        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Parameter(format!("expected key=value in '{item}'")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parameter(format!("bad number '{v}' for '{k}'")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("'{k}' must be positive")));
            }
            kv.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: f64| kv.iter().find(|(k, _)| k == key).map(|(_, v)| *v).unwrap_or(default);
        let known: &[&str] = match name {
            "sphere" => &["radius"],
            "plane" => &["size"],
            "disk" => &["radius"],
            "torus" => &["major", "minor"],
            "thin-cylinder" | "cylinder" => &["radius", "length"],
            "three-fin" => &["length", "height"],
            "two-plates" => &["gap", "size"],
            _ => return Err(Error::Parameter(format!("unknown analytic shape '{name}'"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::Parameter(format!("unknown parameter '{k}' for '{name}'")));
        }
        Ok(match name {
            "sphere" => AnalyticShape::Sphere { center: Point::origin(), radius: get("radius", 1.0) },
            "plane" => AnalyticShape::Plane { normal: Vec3::z(), offset: 0.0, half_size: get("size", 2.0) / 2.0 },
            "disk" => AnalyticShape::Disk { radius: get("radius", 1.0) },
            "torus" => AnalyticShape::Torus { major: get("major", 0.5), minor: get("minor", 0.2) },
            "thin-cylinder" | "cylinder" => {
                AnalyticShape::Cylinder { radius: get("radius", 0.005), half_length: get("length", 1.0) / 2.0 }
            }
            "three-fin" => {
                AnalyticShape::ThreeFin { length: get("length", 1.0), half_height: get("height", 1.0) / 2.0 }
            }
            "two-plates" => AnalyticShape::TwoPlates { gap: get("gap", 0.12), half_size: get("size", 1.0) / 2.0 },
            _ => unreachable!(),
        })
    }

    pub fn distance(&self, p: &Point) -> f64 {
        match self {
            AnalyticShape::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            AnalyticShape::Plane { normal, offset, .. } => (normal.dot(&p.coords) - offset).abs(),
            AnalyticShape::Disk { radius } => {
                let rho = p.x.hypot(p.y);
                if rho <= *radius {
                    p.z.abs()
                } else {
                    (rho - radius).hypot(p.z)
                }
            }
            AnalyticShape::Torus { major, minor } => {
                let q = (p.x.hypot(p.y) - major).hypot(p.z);
                (q - minor).abs()
            }
            AnalyticShape::Cylinder { radius, half_length } => {
                let dr = p.x.hypot(p.y) - radius;
                let dz = (p.z.abs() - half_length).max(0.0);
                if dz == 0.0 {
                    dr.abs()
                } else {
                    dr.hypot(dz)
                }
            }
            AnalyticShape::ThreeFin { length, half_height } => (0..3)
                .map(|i| {
                    let (u, v) = fin_direction(i);
                    let t = u.dot(&p.coords);
                    let w = v.dot(&p.coords);
                    let dt = t.clamp(0.0, *length) - t;
                    let dz = p.z.clamp(-half_height, *half_height) - p.z;
                    (w * w + dt * dt + dz * dz).sqrt()
                })
                .fold(f64::INFINITY, f64::min),
            AnalyticShape::TwoPlates { gap, half_size } => {
                square_distance(p, 0.5 * gap, *half_size).min(square_distance(p, -0.5 * gap, *half_size))
            }
        }
    }

    /// Bounding box of the zero set.
    pub fn bounding_box(&self) -> Aabb {
        match self {
            AnalyticShape::Sphere { center, radius } => {
                Aabb::new(center - Vec3::repeat(*radius), center + Vec3::repeat(*radius))
            }
            AnalyticShape::Plane { half_size, .. } => {
                Aabb::new(Point::from(Vec3::repeat(-half_size)), Point::from(Vec3::repeat(*half_size)))
            }
            AnalyticShape::Disk { radius } => {
                Aabb::new(Point::new(-radius, -radius, 0.0), Point::new(*radius, *radius, 0.0))
            }
            AnalyticShape::Torus { major, minor } => {
                let e = major + minor;
                Aabb::new(Point::new(-e, -e, -minor), Point::new(e, e, *minor))
            }
            AnalyticShape::Cylinder { radius, half_length } => {
                Aabb::new(Point::new(-radius, -radius, -half_length), Point::new(*radius, *radius, *half_length))
            }
            AnalyticShape::ThreeFin { length, half_height } => {
                let mut b = Aabb::empty();
                for i in 0..3 {
                    let (u, _) = fin_direction(i);
                    for s in [0.0, *length] {
                        for z in [-half_height, *half_height] {
                            b.grow(&Point::from(u * s + Vec3::z() * z));
                        }
                    }
                }
                b
            }
            AnalyticShape::TwoPlates { gap, half_size } => {
                Aabb::new(Point::new(-half_size, -half_size, -0.5 * gap), Point::new(*half_size, *half_size, 0.5 * gap))
            }
        }
    }

    /// Area-uniform (length-uniform for curves) samples of the zero set.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = match self {
                AnalyticShape::Sphere { center, radius } => {
                    let z: f64 = rng.random_range(-1.0..=1.0);
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    center + Vec3::new(s * phi.cos(), s * phi.sin(), z) * *radius
                }
                AnalyticShape::Plane { normal, offset, half_size } => {
                    let (t1, t2) = tangent_frame(normal);
                    let a = rng.random_range(-*half_size..=*half_size);
                    let b = rng.random_range(-*half_size..=*half_size);
                    Point::from(normal * *offset + t1 * a + t2 * b)
                }
                AnalyticShape::Disk { radius } => {
                    let r = radius * rng.random::<f64>().sqrt();
                    let phi = rng.random_range(0.0..2.0 * PI);
                    Point::new(r * phi.cos(), r * phi.sin(), 0.0)
                }
                AnalyticShape::Torus { major, minor } => {
                    let theta = rng.random_range(0.0..2.0 * PI);
                    let w = (major + minor * theta.cos()) / (major + minor);
                    if rng.random::<f64>() > w {
                        continue;
                    }
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let rho = major + minor * theta.cos();
                    Point::new(rho * phi.cos(), rho * phi.sin(), minor * theta.sin())
                }
                AnalyticShape::Cylinder { radius, half_length } => {
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let z = rng.random_range(-*half_length..=*half_length);
                    Point::new(radius * phi.cos(), radius * phi.sin(), z)
                }
                AnalyticShape::ThreeFin { length, half_height } => {
                    let (u, _) = fin_direction(rng.random_range(0..3));
                    let t = rng.random_range(0.0..=*length);
                    let z = rng.random_range(-*half_height..=*half_height);
                    Point::from(u * t + Vec3::z() * z)
                }
                AnalyticShape::TwoPlates { gap, half_size } => {
                    let z = if rng.random::<bool>() { 0.5 * gap } else { -0.5 * gap };
                    Point::new(
                        rng.random_range(-*half_size..=*half_size),
                        rng.random_range(-*half_size..=*half_size),
                        z,
                    )
                }
            };
            out.push(p);
        }
        out
    }
}

/// Two unit vectors spanning the plane orthogonal to `n`.
pub(crate) fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_shapes() {
        assert_eq!(AnalyticShape::parse("sphere").unwrap(), AnalyticShape::unit_sphere());
        match AnalyticShape::parse("two-plates:gap=0.3").unwrap() {
            AnalyticShape::TwoPlates { gap, half_size } => {
                assert_eq!(gap, 0.3);
                assert_eq!(half_size, 0.5);
            }
            s => panic!("unexpected {s:?}"),
        }
        assert!(AnalyticShape::parse("blob").is_err());
        assert!(AnalyticShape::parse("sphere:radius=-1").is_err());
        assert!(AnalyticShape::parse("sphere:girth=1").is_err());
    }

    #[test]
    fn surface_samples_lie_on_zero_set() {
        let shapes = [
            AnalyticShape::unit_sphere(),
            AnalyticShape::Disk { radius: 1.0 },
            AnalyticShape::Torus { major: 0.5, minor: 0.2 },
            AnalyticShape::Cylinder { radius: 0.01, half_length: 0.5 },
            AnalyticShape::ThreeFin { length: 1.0, half_height: 0.5 },
            AnalyticShape::TwoPlates { gap: 0.1, half_size: 0.5 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in &shapes {
            for p in s.sample_surface(200, &mut rng) {
                assert!(s.distance(&p) < 1e-12, "{s:?} {p}");
                assert!(s.bounding_box().expanded(1e-12).contains(&p));
            }
        }
    }

    #[test]
    fn fin_and_plate_distances() {
        let fin = AnalyticShape::ThreeFin { length: 1.0, half_height: 0.5 };
        // off the +x fin by 0.2 in y; the other fins are farther
        assert!((fin.distance(&Point::new(0.5, 0.2, 0.0)) - 0.2).abs() < 1e-12);
        let plates = AnalyticShape::TwoPlates { gap: 0.2, half_size: 0.5 };
        assert!((plates.distance(&Point::origin()) - 0.1).abs() < 1e-15);
        assert!((plates.distance(&Point::new(0.0, 0.0, 0.4)) - 0.3).abs() < 1e-15);
    }
}
