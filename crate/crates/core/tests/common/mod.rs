//! Brute-force reference for the sphere fit, shared with the acceptance runner.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use offsetaxis::geom::{Point, Vec3};
use offsetaxis::sampler::OrientedSample;

pub fn unit_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Cluster energy written straight from its definition.
pub fn energy(cluster: &[OrientedSample], mu: f64, s: &Vector4<f64>) -> f64 {
    let c = Point::new(s[0], s[1], s[2]);
    cluster
        .iter()
        .map(|v| {
            let d = v.position - c;
            let plane = v.normal.dot(&d) - s[3];
            let perp = d - v.normal * v.normal.dot(&d);
            v.weight * (plane * plane + mu * perp.norm_squared())
        })
        .sum()
}

/// Newton iterations on central-difference derivatives of `energy`.
pub fn brute_force_minimum(cluster: &[OrientedSample], mu: f64, start: Vector4<f64>) -> Vector4<f64> {
    let h = 1e-3;
    let e = |s: &Vector4<f64>| energy(cluster, mu, s);
    let unit = |i: usize| Vector4::from_fn(|k, _| if k == i { h } else { 0.0 });
    let mut s = start;
    for _ in 0..6 {
        let g = Vector4::from_fn(|i, _| (e(&(s + unit(i))) - e(&(s - unit(i)))) / (2.0 * h));
        let hess = Matrix4::from_fn(|i, j| {
            let (ei, ej) = (unit(i), unit(j));
            (e(&(s + ei + ej)) - e(&(s + ei - ej)) - e(&(s - ei + ej)) + e(&(s - ei - ej))) / (4.0 * h * h)
        });
        let step = hess.full_piv_lu().solve(&g).expect("well-posed cluster");
        s -= step;
        if step.norm() < 1e-13 {
            break;
        }
    }
    s
}

/// Noisy samples from a spherical cap; normals point away from the center.
pub fn random_cluster(rng: &mut ChaCha8Rng) -> Vec<OrientedSample> {
    let center = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let radius = rng.random_range(0.05..0.5);
    let axis = unit_vec(rng);
    let cos_cap = rng.random_range(-0.5..0.3);
    let n = rng.random_range(12..60);
    (0..n)
        .map(|_| {
            let u = loop {
                let u = unit_vec(rng);
                if u.dot(&axis) >= cos_cap {
                    break u;
                }
            };
            let p = center + u * radius * (1.0 + rng.random_range(-0.05..0.05));
            let normal = (u + unit_vec(rng) * 0.1).normalize();
            OrientedSample { position: p, normal, gradient: u, weight: rng.random_range(0.5..2.0) }
        })
        .collect()
}
