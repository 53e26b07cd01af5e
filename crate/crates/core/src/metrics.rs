//! Mesh evaluation: sampled Chamfer and Hausdorff distances, triangle
//! quality and topology counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{triangle_area, Point};
use crate::mesh::Mesh;
use crate::par;
use crate::spatial::KdTree;

pub const DEFAULT_METRIC_SAMPLES: usize = 100_000;
const SAMPLE_CHUNK: usize = 4096;

/// Area-uniform points on the triangles together with length-uniform points
/// on the segments. In a mixed mesh a segment weighs as a strip one mean
/// triangle edge wide.
pub fn sample_mesh(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Point>> {
    let v = &mesh.vertices;
    let tri_w = mesh.triangles.iter().map(|t| triangle_area(&v[t[0]], &v[t[1]], &v[t[2]]));
    let edge_len: Vec<f64> = mesh
        .triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| (v[b] - v[a]).norm())
        .collect();
    let width = if edge_len.is_empty() { 1.0 } else { edge_len.iter().sum::<f64>() / edge_len.len() as f64 };
    let seg_w = mesh.segments.iter().map(|s| (v[s[1]] - v[s[0]]).norm() * width);
    let n_tri = mesh.triangles.len();
    let mut cdf = Vec::with_capacity(n_tri + mesh.segments.len());
    let mut acc = 0.0;
    for w in tri_w.chain(seg_w) {
        acc += w;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidInput("cannot sample a mesh with no triangle area or segment length".into()));
    }
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let out: Vec<Vec<Point>> = par::map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
        (0..count)
            .map(|_| {
                let pick = rng.random::<f64>() * acc;
                let k = cdf.partition_point(|&x| x <= pick).min(cdf.len() - 1);
                if k < n_tri {
                    let t = mesh.triangles[k];
                    let (mut a, mut b) = (rng.random::<f64>(), rng.random::<f64>());
                    if a + b > 1.0 {
                        a = 1.0 - a;
                        b = 1.0 - b;
                    }
                    let (p0, p1, p2) = (v[t[0]], v[t[1]], v[t[2]]);
                    p0 + (p1 - p0) * a + (p2 - p0) * b
                } else {
                    let s = mesh.segments[k - n_tri];
                    let t = rng.random::<f64>();
                    v[s[0]] + (v[s[1]] - v[s[0]]) * t
                }
            })
            .collect()
    });
    Ok(out.into_iter().flatten().collect())
}

/// Mean of the two directional mean nearest-neighbor distances, and the
/// larger of the two directional maxima.
pub fn chamfer_hausdorff_points(a: &[Point], b: &[Point]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("distance between empty point sets".into()));
    }
    let directional = |from: &[Point], to: &[Point]| {
        let tree = KdTree::new(to);
        let d = par::map_slice(from, |p| tree.nearest(p).map_or(f64::INFINITY, |(_, d)| d));
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let max = d.iter().fold(0.0f64, |m, &x| m.max(x));
        (mean, max)
    };
    let (ma, xa) = directional(a, b);
    let (mb, xb) = directional(b, a);
    Ok((0.5 * (ma + mb), xa.max(xb)))
}

/// Sampled Chamfer and Hausdorff distances between two meshes. Both meshes
/// are sampled with the same seed, so the result is symmetric.
pub fn chamfer_hausdorff(a: &Mesh, b: &Mesh, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("cannot compare an empty mesh".into()));
    }
    let pa = sample_mesh(a, n_samples, seed)?;
    let pb = sample_mesh(b, n_samples, seed)?;
    chamfer_hausdorff_points(&pa, &pb)
}

/// `4√3 A / (l₁² + l₂² + l₃²)`: 1 for equilateral, 0 for degenerate.
pub fn triangle_quality_single(a: &Point, b: &Point, c: &Point) -> f64 {
    let l2 = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
    if l2 == 0.0 {
        return 0.0;
    }
    4.0 * 3f64.sqrt() * triangle_area(a, b, c) / l2
}

/// Area-weighted mean triangle quality.
pub fn triangle_quality(mesh: &Mesh) -> Result<f64> {
    if mesh.triangles.is_empty() {
        return Err(Error::InvalidInput("triangle quality needs at least one triangle".into()));
    }
    let v = &mesh.vertices;
    let (mut num, mut den) = (0.0, 0.0);
    for t in &mesh.triangles {
        let (a, b, c) = (&v[t[0]], &v[t[1]], &v[t[2]]);
        let area = triangle_area(a, b, c);
        num += area * triangle_quality_single(a, b, c);
        den += area;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct TopologyReport {
    pub v_count: usize,
    /// Triangle edges and segments, counted once.
    pub e_count: usize,
    pub f_count: usize,
    pub segment_count: usize,
    pub euler_char: i64,
    /// Edges with three or more incident triangles.
    pub nm_edge_count: usize,
    /// Edges with exactly one incident triangle.
    pub boundary_edge_count: usize,
    pub patch_count: usize,
    /// Connected components over triangles and segments.
    pub component_count: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn count_roots<I: IntoIterator<Item = usize>>(&mut self, items: I) -> usize {
        items.into_iter().map(|i| self.find(i)).collect::<BTreeSet<_>>().len()
    }
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

pub fn topology_report(mesh: &Mesh) -> TopologyReport {
    let mut edge_tris: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (i, t) in mesh.triangles.iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edge_tris.entry(edge_key(a, b)).or_default().push(i);
        }
    }
    let mut edges: BTreeSet<[usize; 2]> = edge_tris.keys().copied().collect();
    edges.extend(mesh.segments.iter().map(|s| edge_key(s[0], s[1])));

    let mut patches = UnionFind::new(mesh.triangles.len());
    let mut nm = 0;
    let mut boundary = 0;
    for tris in edge_tris.values() {
        match tris.len() {
            1 => boundary += 1,
            2 => patches.union(tris[0], tris[1]),
            _ => nm += 1,
        }
    }
    let patch_count = patches.count_roots(0..mesh.triangles.len());

    let mut comps = UnionFind::new(mesh.vertices.len());
    let mut used = BTreeSet::new();
    for e in &edges {
        comps.union(e[0], e[1]);
        used.insert(e[0]);
        used.insert(e[1]);
    }
    let component_count = comps.count_roots(used);

    let (v, e, f) = (mesh.vertices.len(), edges.len(), mesh.triangles.len());
    TopologyReport {
        v_count: v,
        e_count: e,
        f_count: f,
        segment_count: mesh.segments.len(),
        euler_char: v as i64 - e as i64 + f as i64,
        nm_edge_count: nm,
        boundary_edge_count: boundary,
        patch_count,
        component_count,
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Everything reported about one output mesh.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeshReport {
    #[serde(flatten)]
    pub topology: TopologyReport,
    /// Against the reference, in mesh units.
    pub chamfer: Option<f64>,
    pub hausdorff: Option<f64>,
    pub tri_quality_mean: Option<f64>,
    pub runtime: Vec<StageTime>,
}

impl MeshReport {
    pub fn new(mesh: &Mesh) -> Self {
        MeshReport {
            topology: topology_report(mesh),
            chamfer: None,
            hausdorff: None,
            tri_quality_mean: triangle_quality(mesh).ok(),
            runtime: Vec::new(),
        }
    }

    pub fn to_table(&self) -> String {
        let t = &self.topology;
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        let mut s = String::new();
        let rows: [(&str, String); 13] = [
            ("vertices", t.v_count.to_string()),
            ("edges", t.e_count.to_string()),
            ("triangles", t.f_count.to_string()),
            ("segments", t.segment_count.to_string()),
            ("euler characteristic", t.euler_char.to_string()),
            ("non-manifold edges", t.nm_edge_count.to_string()),
            ("boundary edges", t.boundary_edge_count.to_string()),
            ("manifold patches", t.patch_count.to_string()),
            ("components", t.component_count.to_string()),
            ("chamfer", opt(self.chamfer)),
            ("hausdorff", opt(self.hausdorff)),
            ("chamfer (1e-3)", opt(self.chamfer.map(|c| c * 1e3))),
            ("triangle quality", opt(self.tri_quality_mean)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<24}{v}");
        }
        for st in &self.runtime {
            let _ = writeln!(s, "{:<24}{:.3} s", format!("time {}", st.stage), st.seconds);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_strip(n_pages: usize) -> Mesh {
        // pages share the edge from (0,0,0) to (0,0,1)
        let mut m = Mesh { vertices: vec![Point::origin(), Point::new(0.0, 0.0, 1.0)], ..Default::default() };
        for p in 0..n_pages {
            let t = p as f64 * std::f64::consts::TAU / n_pages as f64;
            let base = m.vertices.len();
            m.vertices.push(Point::new(t.cos(), t.sin(), 0.0));
            m.vertices.push(Point::new(t.cos(), t.sin(), 1.0));
            m.triangles.push([0, base, base + 1]);
            m.triangles.push([0, base + 1, 1]);
        }
        m
    }

    #[test]
    fn quality_examples() {
        let e = triangle_quality_single(
            &Point::origin(),
            &Point::new(1.0, 0.0, 0.0),
            &Point::new(0.5, 3f64.sqrt() / 2.0, 0.0),
        );
        assert!((e - 1.0).abs() < 1e-12);
        let d = triangle_quality_single(&Point::origin(), &Point::new(1.0, 0.0, 0.0), &Point::new(2.0, 0.0, 0.0));
        assert_eq!(d, 0.0);
        let r = triangle_quality_single(&Point::origin(), &Point::new(1.0, 0.0, 0.0), &Point::new(0.0, 1.0, 0.0));
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_triangle_topology() {
        let m = Mesh {
            vertices: vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            triangles: vec![[0, 1, 2]],
            ..Default::default()
        };
        let t = topology_report(&m);
        assert_eq!((t.euler_char, t.nm_edge_count, t.patch_count, t.boundary_edge_count), (1, 0, 1, 3));
    }

    #[test]
    fn tetrahedron_surface() {
        let m = Mesh {
            vertices: vec![
                Point::origin(),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
            ..Default::default()
        };
        let t = topology_report(&m);
        assert_eq!((t.euler_char, t.nm_edge_count, t.patch_count, t.component_count), (2, 0, 1, 1));
    }

    #[test]
    fn book_of_three_pages() {
        let t = topology_report(&quad_strip(3));
        assert_eq!(t.nm_edge_count, 1);
        assert_eq!(t.patch_count, 3);
    }

    #[test]
    fn parallel_squares() {
        let square = |z: f64| Mesh {
            vertices: vec![
                Point::new(0.0, 0.0, z),
                Point::new(1.0, 0.0, z),
                Point::new(1.0, 1.0, z),
                Point::new(0.0, 1.0, z),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            ..Default::default()
        };
        let (cd, hd) = chamfer_hausdorff(&square(0.0), &square(0.1), 20_000, 3).unwrap();
        assert!((cd - 0.1).abs() < 1e-3, "{cd}");
        assert!((hd - 0.1).abs() < 1e-3, "{hd}");
        let (cd0, _) = chamfer_hausdorff(&square(0.0), &square(0.0), 5_000, 3).unwrap();
        assert_eq!(cd0, 0.0);
        assert!(chamfer_hausdorff(&Mesh::default(), &square(0.0), 5_000, 3).is_err());
    }

    #[test]
    fn segments_sampled_when_no_faces() {
        let m = Mesh {
            vertices: vec![Point::origin(), Point::new(1.0, 0.0, 0.0)],
            segments: vec![[0, 1]],
            ..Default::default()
        };
        let p = sample_mesh(&m, 1000, 1).unwrap();
        assert_eq!(p.len(), 1000);
        assert!(p.iter().all(|q| q.y == 0.0 && q.z == 0.0 && (0.0..=1.0).contains(&q.x)));
    }
}
