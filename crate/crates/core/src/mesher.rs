//! Medial complex from the sphere adjacency graph, thinning of its
//! tetrahedra and high-UDF faces, and conversion to an output mesh.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use crate::error::Result;
use crate::field::{DistanceField, Frame};
use crate::geom::{angle_deg, triangle_area, Point};
use crate::mesh::{Mesh, MeshFormat};
use crate::optimizer::SphereState;
use crate::par;

/// Faces with at most this area score zero.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MedialComplex {
    pub vertices: Vec<Point>,
    pub radii: Vec<f64>,
    pub edges: BTreeSet<[usize; 2]>,
    pub triangles: BTreeSet<[usize; 3]>,
    pub tets: BTreeSet<[usize; 4]>,
}

fn tri_edges(t: &[usize; 3]) -> [[usize; 2]; 3] {
    [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]]
}

fn tet_faces(t: &[usize; 4]) -> [[usize; 3]; 4] {
    [[t[0], t[1], t[2]], [t[0], t[1], t[3]], [t[0], t[2], t[3]], [t[1], t[2], t[3]]]
}

/// Intersection of two sorted lists, keeping values above `floor`.
fn common_above(a: &[usize], b: &[usize], floor: usize) -> Vec<usize> {
    let (mut i, mut j) = (a.partition_point(|&x| x <= floor), b.partition_point(|&x| x <= floor));
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl MedialComplex {
    /// Clique complex of a graph given by sorted neighbor lists: edges,
    /// 3-cliques as triangles and 4-cliques as tetrahedra.
    pub fn from_graph(vertices: Vec<Point>, radii: Vec<f64>, neighbors: &[Vec<usize>]) -> Self {
        let edges: Vec<[usize; 2]> = neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, l)| l.iter().filter(move |&&b| b > a).map(move |&b| [a, b]))
            .collect();
        let per_edge: Vec<(Vec<[usize; 3]>, Vec<[usize; 4]>)> = par::map_slice(&edges, |&[a, b]| {
            let third = common_above(&neighbors[a], &neighbors[b], b);
            let mut tris = Vec::with_capacity(third.len());
            let mut tets = Vec::new();
            for (k, &c) in third.iter().enumerate() {
                tris.push([a, b, c]);
                for &d in &third[k + 1..] {
                    if neighbors[c].binary_search(&d).is_ok() {
                        tets.push([a, b, c, d]);
                    }
                }
            }
            (tris, tets)
        });
        let mut complex = MedialComplex { vertices, radii, edges: edges.into_iter().collect(), ..Default::default() };
        for (tris, tets) in per_edge {
            complex.triangles.extend(tris);
            complex.tets.extend(tets);
        }
        complex
    }

    /// Vertices no edge refers to are left for cleanup and not counted.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<usize> = self.edges.iter().flatten().copied().collect();
        used.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64 - self.tets.len() as i64
    }

    /// Every triangle's edges and every tet's faces are present.
    pub fn is_closed(&self) -> bool {
        self.triangles.iter().all(|t| tri_edges(t).iter().all(|e| self.edges.contains(e)))
            && self.tets.iter().all(|t| tet_faces(t).iter().all(|f| self.triangles.contains(f)))
    }

    pub fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        triangle_area(&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]])
    }

    /// Mesh of the remaining triangles plus triangle-free edges as segments,
    /// with unreferenced vertices dropped.
    pub fn to_mesh(&self) -> Mesh {
        let mut covered: BTreeSet<[usize; 2]> = BTreeSet::new();
        for t in &self.triangles {
            covered.extend(tri_edges(t));
        }
        let segments: Vec<[usize; 2]> = self.edges.iter().filter(|e| !covered.contains(*e)).copied().collect();
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            t.iter().for_each(|&v| used[v] = true);
        }
        for s in &segments {
            s.iter().for_each(|&v| used[v] = true);
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut mesh = Mesh { radii: Some(Vec::new()), ..Default::default() };
        for (i, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            remap[i] = mesh.vertices.len();
            mesh.vertices.push(self.vertices[i]);
            if let Some(r) = mesh.radii.as_mut() {
                r.push(self.radii[i]);
            }
        }
        mesh.triangles = self.triangles.iter().map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]]).collect();
        mesh.segments = segments.iter().map(|s| [remap[s[0]], remap[s[1]]]).collect();
        mesh
    }
}

/// Complex over the alive spheres of an optimized state.
pub fn build_complex(state: &SphereState) -> MedialComplex {
    let mut remap = vec![usize::MAX; state.spheres.len()];
    let mut vertices = Vec::new();
    let mut radii = Vec::new();
    for (i, s) in state.spheres.iter().enumerate().filter(|(_, s)| s.alive) {
        remap[i] = vertices.len();
        vertices.push(s.center);
        radii.push(s.radius);
    }
    let mut neighbors = vec![Vec::new(); vertices.len()];
    for (i, l) in state.adjacency.iter().enumerate() {
        if remap[i] == usize::MAX {
            continue;
        }
        neighbors[remap[i]] = l.iter().filter(|&&j| remap[j] != usize::MAX).map(|&j| remap[j]).collect();
        neighbors[remap[i]].sort_unstable();
    }
    MedialComplex::from_graph(vertices, radii, &neighbors)
}

/// Area of the face times the mean field value over its vertices and edge
/// midpoints.
pub fn face_score(a: &Point, b: &Point, c: &Point, field: &DistanceField) -> f64 {
    let area = triangle_area(a, b, c);
    if area <= DEGENERATE_AREA {
        return 0.0;
    }
    let q = [*a, *b, *c, nalgebra::center(a, b), nalgebra::center(a, c), nalgebra::center(b, c)];
    area * q.iter().map(|p| field.eval(p)).sum::<f64>() / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct ThinStats {
    pub tet_face_collapses: usize,
    pub face_edge_collapses: usize,
    /// Tetrahedra without a free face, removed on their own.
    pub forced_tet_removals: usize,
    /// Apexes of folded face pairs welded into one vertex.
    pub vertex_merges: usize,
    /// Edge / free vertex collapses of short spurs off the surface.
    pub whisker_collapses: usize,
    pub tets_before: usize,
}

/// Heap entry: off-medial faces first, then larger score, then
/// lexicographically smaller simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate<K> {
    off: bool,
    score: f64,
    key: K,
}

impl<K: Ord> Eq for Candidate<K> where K: PartialEq {}

impl<K: Ord> PartialOrd for Candidate<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> Ord for Candidate<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.off.cmp(&other.off).then_with(|| self.score.total_cmp(&other.score)).then_with(|| other.key.cmp(&self.key))
    }
}

/// Removes all tetrahedra by free-face collapses in decreasing face score,
/// then collapses free edges of faces scoring above `alpha` times the mean
/// face area.
pub fn thin(complex: &mut MedialComplex, field: &DistanceField, alpha: f64) -> ThinStats {
    let mut stats = ThinStats { tets_before: complex.tets.len(), ..Default::default() };
    let all_faces: Vec<[usize; 3]> = complex.triangles.iter().copied().collect();
    let scores: Vec<(f64, bool)> = par::map_slice(&all_faces, |t| {
        let s = face_score(&complex.vertices[t[0]], &complex.vertices[t[1]], &complex.vertices[t[2]], field);
        (s, is_off_medial(complex, t, field, alpha))
    });
    let mut score: HashMap<[usize; 3], f64> = all_faces.iter().copied().zip(scores.iter().map(|s| s.0)).collect();
    let mut off: HashMap<[usize; 3], bool> = all_faces.iter().copied().zip(scores.iter().map(|s| s.1)).collect();
    let had_face: HashSet<[usize; 2]> = all_faces.iter().flat_map(tri_edges).collect();
    let mean_area = if all_faces.is_empty() {
        0.0
    } else {
        all_faces.iter().map(|t| complex.triangle_area(t)).sum::<f64>() / all_faces.len() as f64
    };

    // tetrahedron / face pairs
    let mut face_tets: HashMap<[usize; 3], BTreeSet<[usize; 4]>> = HashMap::new();
    for t in &complex.tets {
        for f in tet_faces(t) {
            face_tets.entry(f).or_default().insert(*t);
        }
    }
    let mut heap: BinaryHeap<Candidate<[usize; 3]>> = face_tets
        .iter()
        .filter(|(_, ts)| ts.len() == 1)
        .map(|(f, _)| Candidate { off: off[f], score: score[f], key: *f })
        .collect();
    let remove_tet = |tet: &[usize; 4],
                      face_tets: &mut HashMap<[usize; 3], BTreeSet<[usize; 4]>>,
                      heap: &mut BinaryHeap<Candidate<[usize; 3]>>| {
        for f in tet_faces(tet) {
            if let Some(ts) = face_tets.get_mut(&f) {
                ts.remove(tet);
                if ts.len() == 1 {
                    heap.push(Candidate { off: off[&f], score: score[&f], key: f });
                }
            }
        }
    };
    while !complex.tets.is_empty() {
        if let Some(Candidate { key: f, .. }) = heap.pop() {
            let Some(ts) = face_tets.get(&f) else { continue };
            if ts.len() != 1 || !complex.triangles.contains(&f) {
                continue;
            }
            let tet = *ts.iter().next().unwrap_or(&[0; 4]);
            complex.tets.remove(&tet);
            complex.triangles.remove(&f);
            face_tets.remove(&f);
            remove_tet(&tet, &mut face_tets, &mut heap);
            stats.tet_face_collapses += 1;
        } else {
            // locked: drop the tet whose best face scores highest
            let locked = complex
                .tets
                .iter()
                .map(|t| (tet_faces(t).iter().map(|f| score[f]).fold(f64::MIN, f64::max), *t))
                .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
                .map(|(_, t)| t);
            let Some(tet) = locked else { break };
            complex.tets.remove(&tet);
            remove_tet(&tet, &mut face_tets, &mut heap);
            stats.forced_tet_removals += 1;
        }
    }

    // face / edge pairs: faces at high field values, and excess faces left
    // over from nearly flat tetrahedra
    let threshold = alpha * mean_area;
    loop {
        let mut edge_faces: HashMap<[usize; 2], BTreeSet<[usize; 3]>> = HashMap::new();
        for t in &complex.triangles {
            for e in tri_edges(t) {
                edge_faces.entry(e).or_default().insert(*t);
            }
        }
        let mut heap: BinaryHeap<Candidate<([usize; 3], [usize; 2])>> = edge_faces
            .iter()
            .filter(|(_, fs)| fs.len() == 1)
            .filter_map(|(e, fs)| fs.iter().next().map(|f| Candidate { off: off[f], score: score[f], key: (*f, *e) }))
            .collect();
        while let Some(Candidate { key: (f, e), .. }) = heap.pop() {
            let free = edge_faces.get(&e).is_some_and(|fs| fs.len() == 1 && fs.contains(&f));
            if !free || !complex.triangles.contains(&f) {
                continue;
            }
            if let Some(attach) = hanging_vertex(complex, &f, &edge_faces) {
                // flap held by a single vertex: face, far edge, then both spokes
                complex.triangles.remove(&f);
                for e in tri_edges(&f) {
                    complex.edges.remove(&e);
                    edge_faces.remove(&e);
                }
                debug_assert!(f.contains(&attach));
                stats.face_edge_collapses += 1;
                stats.whisker_collapses += 2;
                continue;
            }
            if !(score[&f] > threshold || off[&f] || is_excess(&f, &edge_faces, &complex.vertices)) {
                continue;
            }
            complex.triangles.remove(&f);
            complex.edges.remove(&e);
            edge_faces.remove(&e);
            for other in tri_edges(&f) {
                if let Some(fs) = edge_faces.get_mut(&other) {
                    fs.remove(&f);
                    if let (1, Some(&g)) = (fs.len(), fs.iter().next()) {
                        heap.push(Candidate { off: off[&g], score: score[&g], key: (g, other) });
                    }
                }
            }
            stats.face_edge_collapses += 1;
        }
        // a face folded onto a neighbor with no free edge left is a sheet
        // lying over itself; weld the two apexes together
        let fold = complex
            .triangles
            .iter()
            .filter_map(|f| folded_partner(f, &edge_faces, &complex.vertices).map(|g| (*f, g)))
            .max_by(|a, b| score[&a.0].total_cmp(&score[&b.0]).then_with(|| b.0.cmp(&a.0)));
        let Some((f, g)) = fold else { break };
        let apex = |t: &[usize; 3], o: &[usize; 3]| t.iter().copied().find(|x| !o.contains(x));
        let (Some(from), Some(to)) = (apex(&f, &g), apex(&g, &f)) else { break };
        merge_vertex(complex, from, to);
        for t in &complex.triangles {
            score.entry(*t).or_insert_with(|| {
                face_score(&complex.vertices[t[0]], &complex.vertices[t[1]], &complex.vertices[t[2]], field)
            });
            off.entry(*t).or_insert_with(|| is_off_medial(complex, t, field, alpha));
        }
        stats.vertex_merges += 1;
    }

    // one-edge whiskers left behind by the collapses above: a bare edge that
    // once bounded faces, with a free end and the other end on the surface
    let on_face: HashSet<usize> = complex.triangles.iter().flatten().copied().collect();
    let with_face: HashSet<[usize; 2]> = complex.triangles.iter().flat_map(tri_edges).collect();
    let mut degree: HashMap<usize, usize> = HashMap::new();
    for e in &complex.edges {
        e.iter().for_each(|v| *degree.entry(*v).or_default() += 1);
    }
    complex.edges.retain(|e| {
        let free_end = |i: usize| degree[&e[i]] == 1 && on_face.contains(&e[1 - i]);
        let whisker = !with_face.contains(e) && had_face.contains(e) && (free_end(0) || free_end(1));
        stats.whisker_collapses += whisker as usize;
        !whisker
    });
    stats
}

/// Faces whose radius mismatch exceeds this fraction of `alpha` do not lie
/// on the medial structure.
pub const OFF_MEDIAL_TOL: f64 = 0.25;
/// Faces below this triangle quality are treated as degenerate.
pub const SLIVER_QUALITY: f64 = 0.35;

/// Largest excess, over the quadrature points, of `alpha + φ` over the radius
/// interpolated from the face's spheres, in units of `alpha`. A medial point
/// at field value φ carries a sphere of radius at least `alpha + φ`; faces
/// cutting across empty space see φ grow while the radii do not.
pub fn radius_mismatch(complex: &MedialComplex, f: &[usize; 3], field: &DistanceField, alpha: f64) -> f64 {
    let (v, r) = (&complex.vertices, &complex.radii);
    let mut pts: Vec<(Point, f64)> = f.iter().map(|&i| (v[i], r[i])).collect();
    for [a, b] in tri_edges(f) {
        pts.push((nalgebra::center(&v[a], &v[b]), 0.5 * (r[a] + r[b])));
    }
    pts.iter().map(|(p, rad)| alpha + field.eval(p) - rad).fold(f64::MIN, f64::max) / alpha
}

/// For a face whose three edges are all free, the only vertex it shares with
/// the rest of the complex, if exactly one does.
fn hanging_vertex(
    complex: &MedialComplex,
    f: &[usize; 3],
    edge_faces: &HashMap<[usize; 2], BTreeSet<[usize; 3]>>,
) -> Option<usize> {
    if tri_edges(f).iter().any(|e| edge_faces.get(e).is_none_or(|fs| fs.len() != 1)) {
        return None;
    }
    let own = tri_edges(f);
    let attached: Vec<usize> =
        f.iter().copied().filter(|&v| complex.edges.iter().any(|e| e.contains(&v) && !own.contains(e))).collect();
    match attached.as_slice() {
        [v] => Some(*v),
        _ => None,
    }
}

fn is_off_medial(complex: &MedialComplex, f: &[usize; 3], field: &DistanceField, alpha: f64) -> bool {
    is_sliver(complex, f) || radius_mismatch(complex, f, field, alpha) > OFF_MEDIAL_TOL
}

fn is_sliver(complex: &MedialComplex, f: &[usize; 3]) -> bool {
    let [a, b, c] = f.map(|i| complex.vertices[i]);
    let l2 = (b - a).norm_squared() + (c - b).norm_squared() + (a - c).norm_squared();
    l2 == 0.0 || 4.0 * 3f64.sqrt() * triangle_area(&a, &b, &c) / l2 < SLIVER_QUALITY
}

/// Interior angle below which two faces sharing an edge count as folded.
pub const FOLD_ANGLE_DEG: f64 = 30.0;
/// Interior angle above which two faces continue one sheet across an edge.
pub const SHEET_ANGLE_DEG: f64 = 150.0;

/// Angle between two faces hinged on `edge`, measured between the
/// directions from the edge to the opposite vertices (180 for a flat pair,
/// 0 for faces lying on top of each other).
pub fn hinge_angle_deg(edge: [&Point; 2], p: &Point, q: &Point) -> Option<f64> {
    let u = (edge[1] - edge[0]).try_normalize(0.0)?;
    let perp = |x: &Point| {
        let d = x - edge[0];
        d - u * d.dot(&u)
    };
    angle_deg(&perp(p), &perp(q))
}

/// A face is excess when it folds back onto a neighbor, when it hangs off an
/// edge across which two other faces already continue a sheet, or when it
/// is a flap between edges that remain non-manifold without it.
fn is_excess(f: &[usize; 3], edge_faces: &HashMap<[usize; 2], BTreeSet<[usize; 3]>>, v: &[Point]) -> bool {
    excess_reason(f, edge_faces, v).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Excess {
    Flap,
    Fold,
    ThroughSheet,
}

fn excess_reason(
    f: &[usize; 3],
    edge_faces: &HashMap<[usize; 2], BTreeSet<[usize; 3]>>,
    v: &[Point],
) -> Option<Excess> {
    // a flap between non-manifold edges that stay non-manifold without it
    let counts = tri_edges(f).map(|e| edge_faces.get(&e).map_or(0, |fs| fs.len()));
    let free = counts.iter().filter(|&&c| c == 1).count();
    if (1..3).contains(&free) && counts.iter().all(|&c| c == 1 || c >= 4) {
        return Some(Excess::Flap);
    }
    let hinge = |e: &[usize; 2], t: &[usize; 3], g: &[usize; 3]| {
        let opposite = |t: &[usize; 3]| t.iter().copied().find(|x| !e.contains(x));
        let (p, q) = (opposite(t)?, opposite(g)?);
        hinge_angle_deg([&v[e[0]], &v[e[1]]], &v[p], &v[q])
    };
    // f is the only face of its own sheet along some junction edge
    let holds_junction = tri_edges(f).iter().any(|e| {
        edge_faces.get(e).is_some_and(|fs| {
            fs.len() == 3 && fs.iter().filter(|g| *g != f).all(|g| hinge(e, f, g).is_some_and(|a| a >= FOLD_ANGLE_DEG))
        })
    });
    tri_edges(f).iter().find_map(|e| {
        let hinge = |t: &[usize; 3], g: &[usize; 3]| hinge(e, t, g);
        let fs = edge_faces.get(e)?;
        let others: Vec<&[usize; 3]> = fs.iter().filter(|g| *g != f).collect();
        if !holds_junction && others.iter().any(|g| hinge(f, g).is_some_and(|a| a < FOLD_ANGLE_DEG)) {
            return Some(Excess::Fold);
        }
        others
            .iter()
            .enumerate()
            .any(|(i, g)| others[i + 1..].iter().any(|h| hinge(g, h).is_some_and(|a| a >= SHEET_ANGLE_DEG)))
            .then_some(Excess::ThroughSheet)
    })
}

/// A neighbor of `f` across one of its edges lying within the fold angle.
fn folded_partner(
    f: &[usize; 3],
    edge_faces: &HashMap<[usize; 2], BTreeSet<[usize; 3]>>,
    v: &[Point],
) -> Option<[usize; 3]> {
    tri_edges(f).iter().find_map(|e| {
        let opposite = |t: &[usize; 3]| t.iter().copied().find(|x| !e.contains(x));
        edge_faces.get(e)?.iter().filter(|g| *g != f).copied().find(|g| {
            let (Some(p), Some(q)) = (opposite(f), opposite(g)) else { return false };
            hinge_angle_deg([&v[e[0]], &v[e[1]]], &v[p], &v[q]).is_some_and(|a| a < FOLD_ANGLE_DEG)
        })
    })
}

/// Replaces vertex `from` by `to` in every edge and triangle, dropping
/// simplices that degenerate.
fn merge_vertex(complex: &mut MedialComplex, from: usize, to: usize) {
    let sub = |x: usize| if x == from { to } else { x };
    complex.edges = std::mem::take(&mut complex.edges)
        .into_iter()
        .filter_map(|[a, b]| {
            let (a, b) = (sub(a), sub(b));
            (a != b).then(|| [a.min(b), a.max(b)])
        })
        .collect();
    complex.triangles = std::mem::take(&mut complex.triangles)
        .into_iter()
        .filter_map(|t| {
            let mut t = t.map(sub);
            t.sort_unstable();
            (t[0] != t[1] && t[1] != t[2]).then_some(t)
        })
        .collect();
}

/// Drops vertices no simplex refers to, compacting indices.
pub fn cleanup(complex: &MedialComplex) -> MedialComplex {
    let mut used = vec![false; complex.vertices.len()];
    for e in &complex.edges {
        e.iter().for_each(|&v| used[v] = true);
    }
    for t in &complex.triangles {
        t.iter().for_each(|&v| used[v] = true);
    }
    let mut remap = vec![usize::MAX; used.len()];
    let mut out = MedialComplex::default();
    for (i, _) in used.iter().enumerate().filter(|(_, u)| **u) {
        remap[i] = out.vertices.len();
        out.vertices.push(complex.vertices[i]);
        out.radii.push(complex.radii[i]);
    }
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    for e in &complex.edges {
        let v = sorted(vec![remap[e[0]], remap[e[1]]]);
        out.edges.insert([v[0], v[1]]);
    }
    for t in &complex.triangles {
        let v = sorted(t.iter().map(|&i| remap[i]).collect());
        out.triangles.insert([v[0], v[1], v[2]]);
    }
    for t in &complex.tets {
        let v = sorted(t.iter().map(|&i| remap[i]).collect());
        out.tets.insert([v[0], v[1], v[2], v[3]]);
    }
    out
}

/// Writes the complex in the input frame.
pub fn write_mesh(complex: &MedialComplex, frame: &Frame, path: &Path, format: MeshFormat) -> Result<()> {
    complex.to_mesh().to_world(frame).write(path, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticShape;

    fn k(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
    }

    fn pts(n: usize) -> Vec<Point> {
        [Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0), Point::new(0.0, 0.0, 1.0)][..n].to_vec()
    }

    #[test]
    fn clique_counts() {
        let c3 = MedialComplex::from_graph(pts(3), vec![0.1; 3], &k(3));
        assert_eq!((c3.edges.len(), c3.triangles.len(), c3.tets.len()), (3, 1, 0));
        let c4 = MedialComplex::from_graph(pts(4), vec![0.1; 4], &k(4));
        assert_eq!((c4.edges.len(), c4.triangles.len(), c4.tets.len()), (6, 4, 1));
        assert!(c4.is_closed());
    }

    #[test]
    fn single_tet_collapses() {
        let field = DistanceField::analytic(AnalyticShape::unit_sphere());
        let mut c = MedialComplex::from_graph(pts(4), vec![0.1; 4], &k(4));
        assert_eq!(c.euler_characteristic(), 1);
        let st = thin(&mut c, &field, 0.05);
        assert!(c.tets.is_empty());
        assert_eq!(st.forced_tet_removals, 0);
        assert!(c.is_closed());
        assert_eq!(c.euler_characteristic(), 1);
        assert!(c.triangles.len() <= 3);
    }

    #[test]
    fn low_score_triangles_survive() {
        let field = DistanceField::analytic(AnalyticShape::plane_z());
        let mut c = MedialComplex::from_graph(pts(3), vec![0.1; 3], &k(3));
        let before = c.clone();
        thin(&mut c, &field, 0.05);
        assert_eq!(c, before);
    }

    #[test]
    fn constant_and_linear_scores() {
        let a = Point::new(0.0, 0.0, 1.0);
        let b = Point::new(2.0, 0.0, 1.0);
        let c = Point::new(0.0, 1.0, 3.0);
        // plane z = 0 gives phi = z on the upper side: mean of vertex z is exact
        let field = DistanceField::analytic(AnalyticShape::plane_z());
        let area = triangle_area(&a, &b, &c);
        let want = area * (1.0 + 1.0 + 3.0) / 3.0;
        assert!((face_score(&a, &b, &c, &field) - want).abs() < 1e-12);
    }

    #[test]
    fn cleanup_and_segments() {
        let mut c = MedialComplex::from_graph(pts(3), vec![0.1; 3], &k(3));
        c.vertices.push(Point::new(5.0, 5.0, 5.0));
        c.radii.push(0.1);
        c.vertices.push(Point::new(6.0, 5.0, 5.0));
        c.radii.push(0.1);
        c.edges.insert([2, 4]);
        let m = cleanup(&c).to_mesh();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.segments, vec![[2, 3]]);
    }
}
