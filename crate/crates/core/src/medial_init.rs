//! Initial medial spheres: one shrinking ball per sample, then a greedy
//! covering by decreasing radius.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point};
use crate::io::fmt_g9;
use crate::par;
use crate::sampler::{OrientedSample, SampleGraph};
use crate::spatial::KdTree;

pub const SHRINK_MAX_ITERS: usize = 30;
/// Convergence slack of the shrinking ball, relative to `r_init`.
pub const SHRINK_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MedialSphere {
    pub center: Point,
    pub radius: f64,
    /// The sample the ball was grown from and the sample it last touched.
    pub seeds: [usize; 2],
    /// Set when the ball came from a fallback (isolated sample, no convergence).
    pub flagged: bool,
    pub alive: bool,
}

/// Maximal ball tangent to sample `index` along its inward normal.
///
/// Starts from radius `r_init` and repeatedly shrinks the ball through the
/// nearest sample that lies inside it.
pub fn shrinking_ball(
    index: usize,
    samples: &[OrientedSample],
    tree: &KdTree,
    r_init: f64,
    alpha: f64,
) -> MedialSphere {
    let s = &samples[index];
    let x = s.position;
    let n = s.normal;
    let fallback = |radius: f64, other: usize| MedialSphere {
        center: x - n * radius,
        radius,
        seeds: [index, other],
        flagged: true,
        alive: true,
    };
    let slack = SHRINK_SLACK * r_init;
    let mut r = r_init;
    let mut touched: Option<usize> = None;
    for _ in 0..SHRINK_MAX_ITERS {
        let c = x - n * r;
        let Some((q, dist)) = tree.nearest_filtered(&c, |j| j != index) else {
            return fallback(alpha, index);
        };
        if dist >= r - slack {
            return MedialSphere {
                center: c,
                radius: r,
                seeds: [index, touched.unwrap_or(q)],
                flagged: false,
                alive: true,
            };
        }
        let d = x - samples[q].position;
        let denom = 2.0 * n.dot(&d);
        if denom <= 0.0 {
            // flat or duplicated neighborhood: keep the last valid ball
            return match touched {
                Some(t) => MedialSphere { center: c, radius: r, seeds: [index, t], flagged: false, alive: true },
                None => fallback(alpha, q),
            };
        }
        r = d.norm_squared() / denom;
        touched = Some(q);
    }
    let mut ball = fallback(r.min(alpha), touched.unwrap_or(index));
    ball.center = x - n * ball.radius;
    ball
}

/// Shrinking balls for every sample, starting from the sample-box diagonal.
pub fn candidate_spheres(samples: &[OrientedSample], alpha: f64) -> Result<Vec<MedialSphere>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples("no samples to grow medial balls from".into()));
    }
    let positions: Vec<Point> = samples.iter().map(|s| s.position).collect();
    let tree = KdTree::new(&positions);
    let r_init = Aabb::from_points(&positions).diagonal().max(alpha);
    Ok(par::map_range(samples.len(), |i| shrinking_ball(i, samples, &tree, r_init, alpha)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub selected: Vec<MedialSphere>,
    /// Index into `selected` of the sphere covering each sample.
    pub owner: Vec<usize>,
}

/// Greedy covering: repeatedly picks the largest candidate whose sample is
/// still uncovered and marks every sample within `radius + delta` reachable
/// by flood fill over `graph` from the ball's seeds.
pub fn select_spheres(
    candidates: &[MedialSphere],
    samples: &[OrientedSample],
    graph: &SampleGraph,
    delta: f64,
) -> Result<CoverageResult> {
    let n = samples.len();
    if candidates.len() != n || graph.len() != n {
        return Err(Error::InvalidInput(format!(
            "coverage needs one candidate and one graph node per sample ({} samples, {} candidates, {} nodes)",
            n,
            candidates.len(),
            graph.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| candidates[b].radius.total_cmp(&candidates[a].radius).then(a.cmp(&b)));

    const NONE: usize = usize::MAX;
    let mut owner = vec![NONE; n];
    let mut selected = Vec::new();
    let mut visited = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &i in &order {
        if owner[i] != NONE {
            continue;
        }
        let ball = candidates[i];
        let id = selected.len();
        let reach = ball.radius + delta;
        let inside = |j: usize| (samples[j].position - ball.center).norm() <= reach;
        // the ball's own sample is always covered, so every pick makes progress
        owner[i] = id;
        visited[i] = id;
        queue.push_back(i);
        for &s in &ball.seeds {
            if visited[s] != id && inside(s) {
                visited[s] = id;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            if owner[u] == NONE {
                owner[u] = id;
            }
            for &v in &graph.neighbors[u] {
                if visited[v] != id && inside(v) {
                    visited[v] = id;
                    queue.push_back(v);
                }
            }
        }
        selected.push(ball);
    }
    Ok(CoverageResult { selected, owner })
}

/// Writes spheres as `cx cy cz r` lines; dead spheres are skipped.
pub fn write_spheres(path: &Path, spheres: &[MedialSphere]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in spheres.iter().filter(|s| s.alive) {
        writeln!(w, "{} {} {} {}", fmt_g9(s.center.x), fmt_g9(s.center.y), fmt_g9(s.center.z), fmt_g9(s.radius))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::sampler::build_sample_graph;

    #[test]
    fn symmetric_pair() {
        let a = 0.1;
        let samples = vec![
            OrientedSample::new(Point::new(0.0, 0.0, a), Vec3::z()),
            OrientedSample::new(Point::new(0.0, 0.0, -a), -Vec3::z()),
        ];
        let balls = candidate_spheres(&samples, a).unwrap();
        for b in &balls {
            assert!(b.center.coords.norm() < 1e-12);
            assert!((b.radius - a).abs() < 1e-12);
            assert!(!b.flagged);
        }
        assert_eq!(balls[0].seeds, [0, 1]);
    }

    #[test]
    fn isolated_sample_is_flagged() {
        let samples = vec![OrientedSample::new(Point::new(1.0, 2.0, 3.0), Vec3::x())];
        let b = candidate_spheres(&samples, 0.05).unwrap()[0];
        assert!(b.flagged);
        assert_eq!(b.radius, 0.05);
        assert!((b.center - Point::new(0.95, 2.0, 3.0)).norm() < 1e-15);
    }

    fn ring(n: usize) -> Vec<OrientedSample> {
        (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                let d = Vec3::new(t.cos(), t.sin(), 0.0);
                OrientedSample::new(Point::from(d), d)
            })
            .collect()
    }

    #[test]
    fn huge_delta_selects_one_per_component() {
        let samples = ring(40);
        let g = build_sample_graph(&samples, 4, 179.0).unwrap();
        let balls = candidate_spheres(&samples, 0.5).unwrap();
        let cov = select_spheres(&balls, &samples, &g, 10.0).unwrap();
        assert_eq!(cov.selected.len(), 1);
        assert!(cov.owner.iter().all(|&o| o == 0));
    }

    #[test]
    fn selection_radii_are_non_increasing() {
        let samples = ring(60);
        let g = build_sample_graph(&samples, 6, 179.0).unwrap();
        let balls = candidate_spheres(&samples, 0.5).unwrap();
        let cov = select_spheres(&balls, &samples, &g, 0.01).unwrap();
        assert!(cov.selected.windows(2).all(|w| w[0].radius >= w[1].radius));
        assert!(cov.owner.iter().all(|&o| o < cov.selected.len()));
    }
}
