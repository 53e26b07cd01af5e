//! Unsigned distance fields and their backends.
//!
//! A [`DistanceField`] is immutable after construction and may be queried
//! from many threads at once. Every field carries a [`Frame`]: the pipeline
//! works in a normalized frame where the shape fits the unit cube, and the
//! frame maps results back to input coordinates.

mod analytic;
mod grid;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

pub use analytic::AnalyticShape;
pub use grid::GridField;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, Vec3};
use crate::io;
use crate::spatial::{KdTree, TriangleBvh};

/// Similarity transform between input ("world") coordinates and the
/// normalized frame: `normalized = (world - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Frame {
    pub center: Point,
    pub scale: f64,
}

impl Default for Frame {
    fn default() -> Self {
        Frame::identity()
    }
}

impl Frame {
    pub fn identity() -> Self {
        Frame { center: Point::origin(), scale: 1.0 }
    }

    /// Maps `bounds` into the cube [-0.5, 0.5]^3 with a uniform scale.
    pub fn unit_cube(bounds: &Aabb) -> Self {
        let extent = bounds.extent().max();
        let scale = if extent > 0.0 && extent.is_finite() { 1.0 / extent } else { 1.0 };
        Frame { center: bounds.center(), scale }
    }

    pub fn to_normalized(&self, p: &Point) -> Point {
        Point::from((p - self.center) * self.scale)
    }

    pub fn to_world(&self, p: &Point) -> Point {
        self.center + p.coords / self.scale
    }

    /// Composes `self` (applied first) with `next`.
    pub fn then(&self, next: &Frame) -> Frame {
        Frame { center: self.to_world(&next.center), scale: self.scale * next.scale }
    }
}

#[derive(Debug, Clone)]
pub struct PointCloudField {
    tree: KdTree,
}

impl PointCloudField {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point cloud has no points".into()));
        }
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput("point cloud has non-finite coordinates".into()));
        }
        Ok(PointCloudField { tree: KdTree::new(&points) })
    }

    pub fn points(&self) -> &[Point] {
        self.tree.points()
    }

    pub fn distance(&self, p: &Point) -> f64 {
        self.tree.nearest(p).map(|(_, d)| d).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct TriangleSoupField {
    bvh: TriangleBvh,
}

impl TriangleSoupField {
    pub fn new(triangles: Vec<[Point; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidInput("triangle soup has no faces (load it as a point cloud instead)".into()));
        }
        if triangles.iter().flatten().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput("triangle soup has non-finite coordinates".into()));
        }
        Ok(TriangleSoupField { bvh: TriangleBvh::new(triangles) })
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        self.bvh.triangles()
    }

    pub fn distance(&self, p: &Point) -> f64 {
        self.bvh.distance(p)
    }
}

#[derive(Debug, Clone)]
pub enum Backend {
    Analytic(AnalyticShape),
    Points(PointCloudField),
    Triangles(TriangleSoupField),
    Grid(GridField),
}

impl Backend {
    fn distance(&self, p: &Point) -> f64 {
        match self {
            Backend::Analytic(s) => s.distance(p),
            Backend::Points(f) => f.distance(p),
            Backend::Triangles(f) => f.distance(p),
            Backend::Grid(g) => g.distance(p),
        }
    }

    /// Bounds of the zero set in input coordinates.
    fn shape_bounds(&self) -> Aabb {
        match self {
            Backend::Analytic(s) => s.bounding_box(),
            Backend::Points(f) => Aabb::from_points(f.points()),
            Backend::Triangles(f) => Aabb::from_points(f.triangles().iter().flatten()),
            Backend::Grid(g) => g.zero_set_bounds(),
        }
    }

    /// Whether the backend returns exact Euclidean distances.
    pub fn is_exact(&self) -> bool {
        !matches!(self, Backend::Grid(_))
    }
}

/// A queryable unsigned distance field.
#[derive(Debug)]
pub struct DistanceField {
    backend: Backend,
    frame: Frame,
    bbox: Aabb,
    queries: AtomicU64,
}

impl Clone for DistanceField {
    fn clone(&self) -> Self {
        DistanceField { backend: self.backend.clone(), frame: self.frame, bbox: self.bbox, queries: AtomicU64::new(0) }
    }
}

impl DistanceField {
    pub fn new(backend: Backend) -> Self {
        let bbox = backend.shape_bounds();
        DistanceField { backend, frame: Frame::identity(), bbox, queries: AtomicU64::new(0) }
    }

    pub fn analytic(shape: AnalyticShape) -> Self {
        Self::new(Backend::Analytic(shape))
    }

    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        Ok(Self::new(Backend::Points(PointCloudField::new(points)?)))
    }

    pub fn from_triangles(triangles: Vec<[Point; 3]>) -> Result<Self> {
        Ok(Self::new(Backend::Triangles(TriangleSoupField::new(triangles)?)))
    }

    pub fn from_grid(grid: GridField) -> Self {
        Self::new(Backend::Grid(grid))
    }

    /// Re-expresses the field in the frame where its shape fits the unit cube.
    pub fn normalized(self) -> Self {
        let world_bounds = self.backend.shape_bounds();
        let frame = Frame::unit_cube(&world_bounds);
        let bbox = Aabb::new(frame.to_normalized(&world_bounds.min), frame.to_normalized(&world_bounds.max));
        DistanceField { frame, bbox, ..self }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Bounds of the shape in this field's (possibly normalized) frame.
    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    /// Number of distance evaluations so far (diagnostic only).
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Unchecked evaluation for hot loops; `x` must be finite.
    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let world = self.frame.to_world(x);
        self.backend.distance(&world) * self.frame.scale
    }

    pub fn query(&self, x: &Point) -> Result<f64> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite query point {x:?}")));
        }
        Ok(self.eval(x))
    }

    /// Central-difference gradient with step `h`, not normalized.
    pub fn gradient(&self, x: &Point, h: f64) -> Result<Vec3> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite query point {x:?}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("gradient step must be positive, got {h}")));
        }
        Ok(self.eval_gradient(x, h))
    }

    pub(crate) fn eval_gradient(&self, x: &Point, h: f64) -> Vec3 {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut a = *x;
            let mut b = *x;
            a[k] += h;
            b[k] -= h;
            g[k] = (self.eval(&a) - self.eval(&b)) / (2.0 * h);
        }
        g
    }
}

pub fn load_point_cloud<P: AsRef<Path>>(path: P) -> Result<DistanceField> {
    DistanceField::from_points(io::read_points(path.as_ref())?)
}

pub fn load_triangle_soup<P: AsRef<Path>>(path: P) -> Result<DistanceField> {
    DistanceField::from_triangles(io::read_triangles(path.as_ref())?)
}

pub fn load_grid<P: AsRef<Path>>(path: P) -> Result<DistanceField> {
    let f = std::fs::File::open(path.as_ref())?;
    Ok(DistanceField::from_grid(GridField::read(std::io::BufReader::new(f))?))
}
