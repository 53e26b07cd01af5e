use crate::geom::{point_triangle_distance, Aabb, Point};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    // leaf: triangles order[start..end]; inner: children
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Bounding-volume hierarchy over a triangle soup answering exact
/// point-to-triangle distance queries.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Point; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

impl TriangleBvh {
    pub fn new(triangles: Vec<[Point; 3]>) -> Self {
        let n = triangles.len();
        let mut bvh =
            TriangleBvh { triangles, order: (0..n).collect(), nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1) };
        if n > 0 {
            let centroids: Vec<Point> =
                bvh.triangles.iter().map(|t| Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0)).collect();
            bvh.build(&centroids, 0, n);
        }
        bvh
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        &self.triangles
    }

    fn build(&mut self, centroids: &[Point], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.triangles[t] {
                bounds.grow(p);
            }
            cbounds.grow(&centroids[t]);
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode { bounds, start, end, children: None });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = cbounds.longest_axis();
        let mid = start + (end - start) / 2;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Distance from `q` to the nearest triangle (`+inf` for an empty soup).
    pub fn distance(&self, q: &Point) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        self.query(0, q, &mut best);
        best
    }

    fn query(&self, node: usize, q: &Point, best: &mut f64) {
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &t in &self.order[n.start..n.end] {
                    let [a, b, c] = &self.triangles[t];
                    let d = point_triangle_distance(q, a, b, c);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Some((l, r)) => {
                let dl = self.nodes[l].bounds.distance_squared(q);
                let dr = self.nodes[r].bounds.distance_squared(q);
                let (first, df, second, ds) = if dl <= dr { (l, dl, r, dr) } else { (r, dr, l, dl) };
                if df < *best * *best {
                    self.query(first, q, best);
                }
                if ds < *best * *best {
                    self.query(second, q, best);
                }
            }
        }
    }
}
