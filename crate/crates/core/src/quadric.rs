//! Sphere quadrics: the spherical quadric error (squared distance from a
//! sphere to a tangent plane) and the line quadric (squared distance from
//! the center to a sample's normal line).
//!
//! A sphere is the 4-vector `s = [c, r]` and every quadric evaluates as
//! `½ sᵀ A s − bᵀ s + c`.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};

use crate::geom::{Point, Vec3};
use crate::sampler::OrientedSample;

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricSystem {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub c: f64,
}

impl Default for QuadricSystem {
    fn default() -> Self {
        QuadricSystem { a: Matrix4::zeros(), b: Vector4::zeros(), c: 0.0 }
    }
}

impl std::ops::AddAssign for QuadricSystem {
    fn add_assign(&mut self, o: Self) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }
}

impl QuadricSystem {
    pub fn scaled(&self, w: f64) -> Self {
        QuadricSystem { a: self.a * w, b: self.b * w, c: self.c * w }
    }

    pub fn eval(&self, center: &Point, radius: f64) -> f64 {
        let s = Vector4::new(center.x, center.y, center.z, radius);
        0.5 * s.dot(&(self.a * s)) - self.b.dot(&s) + self.c
    }

    /// Quadric of one sample: `w (Q + μ L)`.
    pub fn for_sample(v: &OrientedSample, mu: f64) -> Self {
        let mut q = sqem_term(&v.position, &v.normal);
        q += line_term(&v.position, &v.normal).scaled(mu);
        q.scaled(v.weight)
    }

    pub fn accumulate<'a, I: IntoIterator<Item = &'a OrientedSample>>(samples: I, mu: f64) -> Self {
        let mut q = QuadricSystem::default();
        for v in samples {
            q += Self::for_sample(v, mu);
        }
        q
    }
}

/// Squared distance from the sphere to the tangent plane `(x, n)`:
/// `(n·(x − c) − r)²`.
pub fn sqem_term(x: &Point, n: &Vec3) -> QuadricSystem {
    let nt = Vector4::new(n.x, n.y, n.z, 1.0);
    let d = n.dot(&x.coords);
    QuadricSystem { a: 2.0 * nt * nt.transpose(), b: 2.0 * d * nt, c: d * d }
}

/// Squared distance from the center to the line `x + t n`; independent of r.
pub fn line_term(x: &Point, n: &Vec3) -> QuadricSystem {
    let p3 = Matrix3::identity() - n * n.transpose();
    let mut p = Matrix4::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&p3);
    let xt = Vector4::new(x.x, x.y, x.z, 0.0);
    let px = p * xt;
    QuadricSystem { a: 2.0 * p, b: 2.0 * px, c: xt.dot(&px) }
}

/// Per-sample assignment cost `(n·(x − c) − r)² + μ ‖(I − nnᵀ)(c − x)‖²`.
#[inline]
pub fn sample_cost(v: &OrientedSample, center: &Point, radius: f64, mu: f64) -> f64 {
    let d = v.position - center;
    let t = v.normal.dot(&d);
    let plane = t - radius;
    let line = (d.norm_squared() - t * t).max(0.0);
    v.weight * (plane * plane + mu * line)
}

/// Pseudo-inverse solve of a symmetric PSD system. Yields `None` when the
/// matrix has no eigenvalue above the cutoff or the result is not finite.
macro_rules! pinv_solve {
    ($m:expr, $rhs:expr, $vec:ty) => {{
        let eig = SymmetricEigen::new($m);
        let rhs = $rhs;
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(top > 0.0 && top.is_finite()) {
            None
        } else {
            let cut = top * PINV_RTOL;
            let mut x = <$vec>::zeros();
            for k in 0..eig.eigenvalues.len() {
                let lam = eig.eigenvalues[k];
                if lam > cut {
                    let u = eig.eigenvectors.column(k);
                    x += u * (u.dot(&rhs) / lam);
                }
            }
            x.iter().all(|v| v.is_finite()).then_some(x)
        }
    }};
}

/// Minimizer of the quadric over `(c, r)`; any minimizer when not unique.
pub fn solve_free(q: &QuadricSystem) -> Option<(Point, f64)> {
    pinv_solve!(q.a, q.b, Vector4<f64>).map(|s| (Point::new(s[0], s[1], s[2]), s[3]))
}

/// Minimizer over the center with the radius held at `r`.
pub fn solve_fixed_radius(q: &QuadricSystem, r: f64) -> Option<Point> {
    let acc: Matrix3<f64> = q.a.fixed_view::<3, 3>(0, 0).into_owned();
    let acr: Vector3<f64> = q.a.fixed_view::<3, 1>(0, 3).into_owned();
    let bc: Vector3<f64> = q.b.fixed_view::<3, 1>(0, 0).into_owned();
    pinv_solve!(acc, bc - acr * r, Vector3<f64>).map(Point::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// Center and radius both optimized.
    FreeRadius,
    /// Free radius rejected; center re-optimized at the previous radius.
    FixedRadius,
    /// Singular system; centroid-based fallback.
    Degenerate,
}

/// Fits a sphere to a cluster with the radius guard `0 < r ≤ r_bar`.
pub fn fit_sphere(cluster: &[&OrientedSample], mu: f64, r_prev: f64, r_bar: f64) -> (Point, f64, FitStatus) {
    let q = QuadricSystem::accumulate(cluster.iter().copied(), mu);
    fit_with_system(&q, cluster, r_prev, r_bar)
}

pub(crate) fn fit_with_system(
    q: &QuadricSystem,
    cluster: &[&OrientedSample],
    r_prev: f64,
    r_bar: f64,
) -> (Point, f64, FitStatus) {
    if let Some((c, r)) = solve_free(q) {
        if r > 0.0 && r <= r_bar {
            return (c, r, FitStatus::FreeRadius);
        }
    }
    if let Some(c) = solve_fixed_radius(q, r_prev) {
        return (c, r_prev, FitStatus::FixedRadius);
    }
    let n = cluster.len().max(1) as f64;
    let centroid = cluster.iter().fold(Vec3::zeros(), |a, v| a + v.position.coords) / n;
    let mean_n = cluster.iter().fold(Vec3::zeros(), |a, v| a + v.normal) / n;
    (Point::from(centroid - mean_n * r_prev), r_prev, FitStatus::Degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqem_examples() {
        let q = sqem_term(&Point::new(0.0, 0.0, 1.0), &Vec3::z());
        assert!((q.eval(&Point::origin(), 0.0) - 1.0).abs() < 1e-15);
        assert!(q.eval(&Point::origin(), 1.0).abs() < 1e-15);
    }

    #[test]
    fn line_examples() {
        let q = line_term(&Point::origin(), &Vec3::z());
        for r in [0.0, 0.3, 7.0] {
            assert!((q.eval(&Point::new(1.0, 0.0, 5.0), r) - 1.0).abs() < 1e-15);
            assert!(q.eval(&Point::new(0.0, 0.0, -2.0), r).abs() < 1e-15);
        }
    }

    #[test]
    fn two_sided_slab() {
        let a = 0.1;
        let s = [
            OrientedSample::new(Point::new(0.0, 0.0, a), Vec3::z()),
            OrientedSample::new(Point::new(0.0, 0.0, -a), -Vec3::z()),
        ];
        let (c, r, st) = fit_sphere(&[&s[0], &s[1]], 0.2, a, 1.0);
        assert_eq!(st, FitStatus::FreeRadius);
        assert!(c.coords.norm() < 1e-12);
        assert!((r - a).abs() < 1e-12);
    }

    #[test]
    fn rejected_radius_keeps_previous() {
        // one-sided planar patch: the free radius is unbounded
        let s: Vec<OrientedSample> = (0..9)
            .map(|i| OrientedSample::new(Point::new((i % 3) as f64 * 0.1, (i / 3) as f64 * 0.1, 0.0), Vec3::z()))
            .collect();
        let refs: Vec<&OrientedSample> = s.iter().collect();
        let (c, r, st) = fit_sphere(&refs, 0.2, 0.05, 0.075);
        assert_eq!(st, FitStatus::FixedRadius);
        assert_eq!(r, 0.05);
        assert!((c.z + 0.05).abs() < 1e-9);
        assert!((c.x - 0.1).abs() < 1e-9 && (c.y - 0.1).abs() < 1e-9);
    }

    #[test]
    fn empty_cluster_is_degenerate() {
        let (_, r, st) = fit_sphere(&[], 0.2, 0.3, 1.0);
        assert_eq!(st, FitStatus::Degenerate);
        assert_eq!(r, 0.3);
    }
}
