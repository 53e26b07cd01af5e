//! Oriented sampling of the α-level set `{x : φ(x) = α}`.
//!
//! Random chords of an expanded bounding box are sphere-traced against
//! `f = φ - α`, every sign change is refined by bisection, and the raw hits
//! are thinned to a Poisson-disk set. Normals come from plane fits over a
//! kNN graph whose edges are filtered by the angle between field gradients.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::geom::{angle_deg, Aabb, Point, Vec3};
use crate::io::fmt_g9;
use crate::par;
use crate::spatial::KdTree;

/// Safety factor on the sphere-tracing step.
pub const TRACE_SAFETY: f64 = 0.9;
/// Bisection iterations after a sign change.
pub const BISECTION_STEPS: usize = 20;
const MAX_BISECTION_STEPS: usize = 64;
pub const RAY_BATCH: usize = 1000;
pub const STALL_BATCHES: usize = 10;

/// A point on the α-level set with its unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedSample {
    pub position: Point,
    /// Unit normal, pointing out of the offset volume.
    pub normal: Vec3,
    /// Normalized field gradient at `position` (zero when unreliable).
    pub gradient: Vec3,
    /// Area weight.
    pub weight: f64,
}

impl OrientedSample {
    pub fn new(position: Point, normal: Vec3) -> Self {
        OrientedSample { position, normal, gradient: normal, weight: 1.0 }
    }
}

/// Hit tolerance used when none is configured: `α·1e-3`.
pub fn default_hit_tolerance(alpha: f64) -> f64 {
    alpha * 1e-3
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// All crossings of the level set `φ = alpha` along the segment `from -> to`,
/// in order of increasing distance from `from`.
pub fn trace_segment(field: &DistanceField, alpha: f64, eps_hit: f64, from: &Point, to: &Point) -> Vec<Point> {
    let mut hits = Vec::new();
    let length = (to - from).norm();
    if length == 0.0 {
        return hits;
    }
    let dir = (to - from) / length;
    let at = |t: f64| from + dir * t;
    let s_min = 0.5 * eps_hit;

    let mut t = 0.0;
    let mut f = field.eval(from) - alpha;
    while t < length {
        let step = (TRACE_SAFETY * f.abs()).max(s_min);
        let t1 = (t + step).min(length);
        let f1 = field.eval(&at(t1)) - alpha;
        if (f > 0.0) != (f1 > 0.0) {
            // bracket [lo, hi] keeps the sign change
            let (mut lo, mut hi, mut f_lo) = (t, t1, f);
            let mut best: Option<(f64, f64)> = None;
            for it in 0..MAX_BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                let fm = field.eval(&at(mid)) - alpha;
                if best.is_none_or(|(_, fb)| fm.abs() < fb.abs()) {
                    best = Some((mid, fm));
                }
                if it + 1 >= BISECTION_STEPS && fm.abs() <= eps_hit {
                    break;
                }
                if (fm > 0.0) == (f_lo > 0.0) {
                    lo = mid;
                    f_lo = fm;
                } else {
                    hi = mid;
                }
            }
            if let Some((tm, fm)) = best {
                if fm.abs() <= eps_hit {
                    hits.push(at(tm));
                }
            }
        }
        t = t1;
        f = f1;
    }
    hits
}

fn random_box_point<R: Rng>(b: &Aabb, rng: &mut R) -> Point {
    let e = b.extent();
    let areas = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut face = 5;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            face = i;
            break;
        }
        pick -= a;
    }
    let mut p = Point::new(
        b.min.x + rng.random::<f64>() * e.x,
        b.min.y + rng.random::<f64>() * e.y,
        b.min.z + rng.random::<f64>() * e.z,
    );
    let axis = face / 2;
    p[axis] = if face % 2 == 0 { b.min[axis] } else { b.max[axis] };
    p
}

/// Box through which rays are cast: the shape bounds grown by 2α.
pub fn ray_box(field: &DistanceField, alpha: f64) -> Aabb {
    field.bounding_box().expanded(2.0 * alpha)
}

fn cast_one(field: &DistanceField, alpha: f64, eps_hit: f64, seed: u64, index: u64, bx: &Aabb) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let a = random_box_point(bx, &mut rng);
    let b = random_box_point(bx, &mut rng);
    trace_segment(field, alpha, eps_hit, &a, &b)
}

/// Casts `n_rays` random chords of the expanded bounding box and returns
/// every level-set crossing, ordered by ray index.
pub fn cast_rays(field: &DistanceField, alpha: f64, n_rays: usize, seed: u64) -> Result<Vec<Point>> {
    check_alpha(alpha)?;
    let eps = default_hit_tolerance(alpha);
    let bx = ray_box(field, alpha);
    let hits: Vec<Point> =
        par::map_range(n_rays, |i| cast_one(field, alpha, eps, seed, i as u64, &bx)).into_iter().flatten().collect();
    if hits.is_empty() {
        log::warn!("no level-set crossings found with alpha = {alpha}; the field may exceed alpha everywhere");
    }
    Ok(hits)
}

struct SpacingGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point>,
}

impl SpacingGrid {
    fn new(cell: f64) -> Self {
        SpacingGrid { cell, cells: HashMap::new(), points: Vec::new() }
    }

    fn key(&self, p: &Point) -> [i64; 3] {
        [(p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64, (p.z / self.cell).floor() as i64]
    }

    /// Inserts `p` unless a stored point lies strictly closer than `cell`.
    fn try_insert(&mut self, p: &Point) -> bool {
        let k = self.key(p);
        let r2 = self.cell * self.cell;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&i| (self.points[i] - p).norm_squared() < r2) {
                            return false;
                        }
                    }
                }
            }
        }
        self.cells.entry(k).or_default().push(self.points.len());
        self.points.push(*p);
        true
    }
}

/// Statistics of a ray-casting run.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct RayStats {
    pub rays_cast: usize,
    pub raw_hits: usize,
    pub saturated: bool,
}

/// Casts rays in batches of [`RAY_BATCH`] until `n_rays` are spent or
/// [`STALL_BATCHES`] consecutive batches add no hit farther than `spacing`
/// from all earlier hits.
pub fn cast_rays_until_saturated(
    field: &DistanceField,
    alpha: f64,
    n_rays: usize,
    seed: u64,
    spacing: f64,
) -> Result<(Vec<Point>, RayStats)> {
    check_alpha(alpha)?;
    let eps = default_hit_tolerance(alpha);
    let bx = ray_box(field, alpha);
    let mut grid = SpacingGrid::new(spacing);
    let mut hits = Vec::new();
    let mut stats = RayStats::default();
    let mut stall = 0;
    while stats.rays_cast < n_rays {
        let batch = RAY_BATCH.min(n_rays - stats.rays_cast);
        let start = stats.rays_cast as u64;
        let batch_hits: Vec<Vec<Point>> =
            par::map_range(batch, |i| cast_one(field, alpha, eps, seed, start + i as u64, &bx));
        stats.rays_cast += batch;
        let mut added = 0;
        for p in batch_hits.into_iter().flatten() {
            if grid.try_insert(&p) {
                added += 1;
            }
            hits.push(p);
        }
        if added == 0 {
            stall += 1;
            if stall >= STALL_BATCHES {
                stats.saturated = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    stats.raw_hits = hits.len();
    if hits.is_empty() {
        log::warn!("no level-set crossings found with alpha = {alpha}; the field may exceed alpha everywhere");
    }
    Ok((hits, stats))
}

/// Greedy Poisson-disk thinning in input order: a point is kept iff it is at
/// least `r` away from every point kept before it.
pub fn poisson_thin(points: &[Point], r: f64) -> Vec<Point> {
    poisson_thin_indices(points, r).into_iter().map(|i| points[i]).collect()
}

pub fn poisson_thin_indices(points: &[Point], r: f64) -> Vec<usize> {
    let mut grid = SpacingGrid::new(r);
    points.iter().enumerate().filter(|(_, p)| grid.try_insert(p)).map(|(i, _)| i).collect()
}

/// kNN graph over the samples, filtered by gradient agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    pub k: usize,
    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists derived from `edges`.
    pub neighbors: Vec<Vec<usize>>,
}

impl SampleGraph {
    pub fn from_edges(n: usize, k: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.retain(|e| e.0 != e.1);
        edges.sort_unstable();
        edges.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
        }
        SampleGraph { k, edges, neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Builds the symmetrized kNN graph, keeping `(i, j)` only if the angle
/// between the two field gradients is below `angle_threshold_deg`.
/// Pairs where either gradient vanishes are kept.
pub fn build_sample_graph(samples: &[OrientedSample], k: usize, angle_threshold_deg: f64) -> Result<SampleGraph> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples to build a neighborhood graph, got {}",
            samples.len()
        )));
    }
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    let positions: Vec<Point> = samples.iter().map(|s| s.position).collect();
    let tree = KdTree::new(&positions);
    let k_eff = k.min(samples.len() - 1);
    let per_sample: Vec<Vec<(usize, usize)>> = par::map_range(samples.len(), |i| {
        tree.k_nearest(&positions[i], k_eff + 1)
            .into_iter()
            .filter(|&(j, _)| j != i)
            .take(k_eff)
            .filter(|&(j, _)| {
                angle_deg(&samples[i].gradient, &samples[j].gradient).is_none_or(|a| a < angle_threshold_deg)
            })
            .map(|(j, _)| (i.min(j), i.max(j)))
            .collect()
    });
    let edges = per_sample.into_iter().flatten().collect();
    Ok(SampleGraph::from_edges(samples.len(), k, edges))
}

/// Unit normal of the least-squares plane through `points`, or `None` if
/// fewer than three points are given.
pub fn fit_plane_normal(points: &[Point]) -> Option<Vec3> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    let v: Vec3 = eig.eigenvectors.column(i).into_owned();
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

/// Re-estimates every normal from a plane fit over the sample and its graph
/// neighbors, oriented to agree with the field gradient. Samples with fewer
/// than two neighbors keep their normalized gradient.
pub fn estimate_normals(samples: &mut [OrientedSample], graph: &SampleGraph) {
    let updated: Vec<Vec3> = par::map_range(samples.len(), |i| {
        let s = &samples[i];
        let fallback = || {
            if s.gradient.norm() > 1e-12 {
                s.gradient.normalize()
            } else if s.normal.norm() > 1e-12 {
                s.normal.normalize()
            } else {
                Vec3::z()
            }
        };
        let nb = &graph.neighbors[i];
        if nb.len() < 2 {
            return fallback();
        }
        let mut pts = Vec::with_capacity(nb.len() + 1);
        pts.push(s.position);
        pts.extend(nb.iter().map(|&j| samples[j].position));
        match fit_plane_normal(&pts) {
            Some(n) => {
                if n.dot(&s.gradient) < 0.0 {
                    -n
                } else {
                    n
                }
            }
            None => fallback(),
        }
    });
    for (s, n) in samples.iter_mut().zip(updated) {
        s.normal = n;
    }
}

/// Parameters of the sampling stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    pub alpha: f64,
    /// Poisson-disk radius; must not exceed `alpha`.
    pub radius: f64,
    pub n_rays: usize,
    pub seed: u64,
    pub k: usize,
    pub angle_threshold_deg: f64,
}

impl SamplerParams {
    pub fn new(alpha: f64, radius: f64) -> Self {
        SamplerParams { alpha, radius, n_rays: 200_000, seed: 0, k: 10, angle_threshold_deg: 60.0 }
    }
}

/// Output of the sampling stage.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<OrientedSample>,
    pub graph: SampleGraph,
    pub rays: RayStats,
}

/// Gradient finite-difference step used throughout: `α / 100`.
pub fn gradient_step(alpha: f64) -> f64 {
    alpha / 100.0
}

/// Full sampling stage: rays, Poisson thinning, gradients, graph, normals.
pub fn sample_offset_surface(field: &DistanceField, params: &SamplerParams) -> Result<SampleSet> {
    check_alpha(params.alpha)?;
    if !(params.radius > 0.0) {
        return Err(Error::Parameter(format!("Poisson radius must be positive, got {}", params.radius)));
    }
    if params.radius > params.alpha {
        log::warn!("Poisson radius {} exceeds alpha {}", params.radius, params.alpha);
    }
    let (hits, rays) = cast_rays_until_saturated(field, params.alpha, params.n_rays, params.seed, 0.5 * params.radius)?;
    let kept = poisson_thin(&hits, params.radius);
    if kept.len() < 2 {
        return Err(Error::EmptySamples(format!(
            "only {} sample(s) on the level set phi = {}; raise alpha or check the field",
            kept.len(),
            params.alpha
        )));
    }
    let h = gradient_step(params.alpha);
    let mut samples: Vec<OrientedSample> = par::map_slice(&kept, |p| {
        let g = field.eval_gradient(p, h);
        let norm = g.norm();
        let g = if norm > 1e-12 { g / norm } else { Vec3::zeros() };
        OrientedSample { position: *p, normal: g, gradient: g, weight: 1.0 }
    });
    let graph = build_sample_graph(&samples, params.k, params.angle_threshold_deg)?;
    estimate_normals(&mut samples, &graph);
    Ok(SampleSet { samples, graph, rays })
}

/// Writes samples as ascii PLY with normal, gradient and weight properties.
pub fn write_samples_ply(path: &Path, samples: &[OrientedSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", samples.len())?;
    for p in ["x", "y", "z", "nx", "ny", "nz", "gx", "gy", "gz", "weight"] {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "end_header")?;
    for s in samples {
        let vals = [
            s.position.x,
            s.position.y,
            s.position.z,
            s.normal.x,
            s.normal.y,
            s.normal.z,
            s.gradient.x,
            s.gradient.y,
            s.gradient.z,
            s.weight,
        ];
        let line: Vec<String> = vals.iter().map(|v| fmt_g9(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample dump written by [`write_samples_ply`].
pub fn read_samples_ply(path: &Path) -> Result<Vec<OrientedSample>> {
    let dump = crate::io::read_sample_dump(path)?;
    Ok((0..dump.positions.len())
        .map(|i| {
            let n = dump.normals[i];
            let n = if n.norm() > 1e-12 { n.normalize() } else { Vec3::z() };
            OrientedSample {
                position: dump.positions[i],
                normal: n,
                gradient: dump.gradients.as_ref().map(|g| g[i]).unwrap_or(n),
                weight: dump.weights.as_ref().map(|w| w[i]).unwrap_or(1.0),
            }
        })
        .collect())
}
