//! Alternating minimization of the sphere energy: cluster assignment
//! against frozen spheres, then closed-form per-sphere fits against frozen
//! clusters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::io::fmt_g9;
use crate::medial_init::{CoverageResult, MedialSphere};
use crate::par;
use crate::quadric::{fit_with_system, sample_cost, FitStatus, QuadricSystem};
use crate::sampler::{OrientedSample, SampleGraph};
use crate::spatial::KdTree;

/// Energy rise between iterations that aborts the optimization.
pub const ENERGY_INCREASE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerParams {
    pub mu: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams { mu: 0.2, tol: 1e-10, max_iters: 150 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub total_energy: f64,
    pub changed_assignments: usize,
    pub active_spheres: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereState {
    pub spheres: Vec<MedialSphere>,
    /// Sphere index of every sample.
    pub assignment: Vec<usize>,
    /// Sorted neighbor lists over alive spheres.
    pub adjacency: Vec<Vec<usize>>,
    pub iteration: usize,
    pub history: Vec<IterationLog>,
    pub last_status: Vec<FitStatus>,
}

impl SphereState {
    pub fn new(spheres: Vec<MedialSphere>, assignment: Vec<usize>, graph: &SampleGraph) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&a| a >= spheres.len()) {
            return Err(Error::InvalidInput(format!("assignment refers to sphere {bad} of {}", spheres.len())));
        }
        if assignment.len() != graph.len() {
            return Err(Error::InvalidInput("assignment and sample graph sizes differ".into()));
        }
        let mut state = SphereState {
            last_status: vec![FitStatus::FreeRadius; spheres.len()],
            spheres,
            assignment,
            adjacency: Vec::new(),
            iteration: 0,
            history: Vec::new(),
        };
        state.deactivate_empty();
        state.rebuild_adjacency(graph);
        Ok(state)
    }

    pub fn from_coverage(cov: CoverageResult, graph: &SampleGraph) -> Result<Self> {
        Self::new(cov.selected, cov.owner, graph)
    }

    pub fn active_count(&self) -> usize {
        self.spheres.iter().filter(|s| s.alive).count()
    }

    pub fn energy_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.total_energy).collect()
    }

    /// Sample indices of every sphere's cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.spheres.len()];
        for (j, &i) in self.assignment.iter().enumerate() {
            c[i].push(j);
        }
        c
    }

    fn deactivate_empty(&mut self) {
        let mut count = vec![0usize; self.spheres.len()];
        for &a in &self.assignment {
            count[a] += 1;
        }
        for (s, &c) in self.spheres.iter_mut().zip(&count) {
            if c == 0 {
                s.alive = false;
            }
        }
    }

    /// Two spheres are adjacent when a graph edge joins their clusters.
    pub fn rebuild_adjacency(&mut self, graph: &SampleGraph) {
        let mut adj = vec![Vec::new(); self.spheres.len()];
        for &(u, v) in &graph.edges {
            let (a, b) = (self.assignment[u], self.assignment[v]);
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        self.adjacency = adj;
    }

    /// Undirected adjacency edges `(a, b)` with `a < b`.
    pub fn adjacency_edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (a, l) in self.adjacency.iter().enumerate() {
            e.extend(l.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        e
    }

    /// Total energy of the current spheres and assignment.
    pub fn total_energy(&self, samples: &[OrientedSample], mu: f64) -> f64 {
        self.assignment
            .iter()
            .zip(samples)
            .map(|(&i, v)| sample_cost(v, &self.spheres[i].center, self.spheres[i].radius, mu))
            .sum()
    }
}

/// `1.5 ×` the radius of the alive sphere whose center is closest to sphere
/// `index` (its own radius when it is the only one).
pub fn radius_bound(index: usize, spheres: &[MedialSphere]) -> f64 {
    let c = spheres[index].center;
    let mut best: Option<(f64, usize)> = None;
    for (j, s) in spheres.iter().enumerate() {
        if j == index || !s.alive {
            continue;
        }
        let d = (s.center - c).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    1.5 * best.map_or(spheres[index].radius, |(_, j)| spheres[j].radius)
}

/// [`radius_bound`] for every alive sphere, using a kd-tree.
pub fn radius_bounds(spheres: &[MedialSphere]) -> Vec<f64> {
    let alive: Vec<usize> = (0..spheres.len()).filter(|&i| spheres[i].alive).collect();
    let centers: Vec<Point> = alive.iter().map(|&i| spheres[i].center).collect();
    let tree = KdTree::new(&centers);
    let mut out = vec![0.0; spheres.len()];
    let found = par::map_slice(&alive, |&i| {
        let nearest = tree.nearest_filtered(&spheres[i].center, |k| alive[k] != i);
        1.5 * nearest.map_or(spheres[i].radius, |(k, _)| spheres[alive[k]].radius)
    });
    for (&i, b) in alive.iter().zip(found) {
        out[i] = b;
    }
    out
}

/// Reassigns every sample to its cheapest sphere. A full pass considers all
/// alive spheres; a local pass only the current sphere and its neighbors.
/// Ties go to the lower sphere index. Returns the number of changed samples.
pub fn assign_clusters(
    state: &mut SphereState,
    samples: &[OrientedSample],
    graph: &SampleGraph,
    mu: f64,
    full: bool,
) -> usize {
    let alive: Vec<usize> = (0..state.spheres.len()).filter(|&i| state.spheres[i].alive).collect();
    let spheres = &state.spheres;
    let adjacency = &state.adjacency;
    let current = &state.assignment;
    let new_assignment: Vec<usize> = par::map_range(samples.len(), |j| {
        let v = &samples[j];
        let cur = current[j];
        let mut best = (sample_cost(v, &spheres[cur].center, spheres[cur].radius, mu), cur);
        let mut consider = |i: usize| {
            let s = &spheres[i];
            let d = sample_cost(v, &s.center, s.radius, mu);
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
        };
        if full {
            alive.iter().for_each(|&i| consider(i));
        } else {
            adjacency[cur].iter().filter(|&&i| spheres[i].alive).for_each(|&i| consider(i));
        }
        best.1
    });
    let changed = new_assignment.iter().zip(current).filter(|(a, b)| a != b).count();
    state.assignment = new_assignment;
    state.deactivate_empty();
    state.rebuild_adjacency(graph);
    changed
}

/// Refits every alive sphere to its cluster; returns the new total energy.
pub fn fit_spheres(state: &mut SphereState, samples: &[OrientedSample], mu: f64) -> f64 {
    let clusters = state.clusters();
    let bounds = radius_bounds(&state.spheres);
    let spheres = &state.spheres;
    let fits: Vec<Option<(Point, f64, FitStatus, f64)>> = par::map_range(spheres.len(), |i| {
        if !spheres[i].alive {
            return None;
        }
        let members: Vec<&OrientedSample> = clusters[i].iter().map(|&j| &samples[j]).collect();
        let q = QuadricSystem::accumulate(members.iter().copied(), mu);
        let (c, r, status) = fit_with_system(&q, &members, spheres[i].radius, bounds[i]);
        let e: f64 = members.iter().map(|v| sample_cost(v, &c, r, mu)).sum();
        Some((c, r, status, e))
    });
    let mut total = 0.0;
    for (i, f) in fits.into_iter().enumerate() {
        if let Some((c, r, status, e)) = f {
            let s = &mut state.spheres[i];
            s.center = c;
            s.radius = r;
            state.last_status[i] = status;
            total += e;
        }
    }
    total
}

/// Runs the alternation until the energy change drops below `tol` or
/// `max_iters` is reached. The first assignment pass is full, later ones
/// local.
pub fn optimize(
    state: &mut SphereState,
    samples: &[OrientedSample],
    graph: &SampleGraph,
    params: &OptimizerParams,
) -> Result<()> {
    if state.assignment.len() != samples.len() {
        return Err(Error::InvalidInput("sphere state does not match the sample set".into()));
    }
    if !(params.mu >= 0.0) {
        return Err(Error::Parameter(format!("mu must be non-negative, got {}", params.mu)));
    }
    while state.iteration < params.max_iters {
        let full = state.iteration == 0;
        let changed = assign_clusters(state, samples, graph, params.mu, full);
        let energy = fit_spheres(state, samples, params.mu);
        state.iteration += 1;
        let prev = state.history.last().map(|h| h.total_energy);
        state.history.push(IterationLog {
            iteration: state.iteration,
            total_energy: energy,
            changed_assignments: changed,
            active_spheres: state.active_count(),
        });
        log::debug!("iteration {}: energy {energy:.6e}, {changed} reassigned", state.iteration);
        if let Some(prev) = prev {
            if energy > prev + ENERGY_INCREASE_LIMIT {
                return Err(Error::EnergyIncrease { iteration: state.iteration, before: prev, after: energy });
            }
            if (prev - energy).abs() < params.tol {
                break;
            }
        }
    }
    Ok(())
}

/// Writes `iter,total_energy,changed_assignments,active_spheres` rows.
pub fn write_energy_log(path: &Path, history: &[IterationLog]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,total_energy,changed_assignments,active_spheres")?;
    for h in history {
        writeln!(w, "{},{},{},{}", h.iteration, fmt_g9(h.total_energy), h.changed_assignments, h.active_spheres)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn ball(x: f64, r: f64) -> MedialSphere {
        MedialSphere { center: Point::new(x, 0.0, 0.0), radius: r, seeds: [0, 0], flagged: false, alive: true }
    }

    #[test]
    fn bounds_examples() {
        let s = vec![ball(0.0, 0.1), ball(1.0, 0.2)];
        assert_eq!(radius_bound(0, &s), 1.5 * 0.2);
        assert_eq!(radius_bound(1, &s), 1.5 * 0.1);
        assert_eq!(radius_bounds(&s), vec![1.5 * 0.2, 1.5 * 0.1]);
        assert_eq!(radius_bound(0, &s[..1]), 1.5 * 0.1);
    }

    #[test]
    fn line_term_decides_between_far_spheres() {
        let samples: Vec<OrientedSample> = (0..8)
            .map(|i| {
                let z = if i % 2 == 0 { 0.1 } else { -0.1 };
                OrientedSample::new(Point::new(1.0 + 0.01 * i as f64, 0.0, z), Vec3::new(0.0, 0.0, z.signum()))
            })
            .collect();
        let graph = SampleGraph::from_edges(8, 10, vec![]);
        let mut state = SphereState::new(vec![ball(-1.0, 0.1), ball(1.0, 0.1)], vec![0; 8], &graph).unwrap();
        state.spheres[1].alive = true;
        assign_clusters(&mut state, &samples, &graph, 0.2, true);
        assert!(state.assignment.iter().all(|&a| a == 1));
        assert!(!state.spheres[0].alive);
    }

    #[test]
    fn optimal_single_sphere_converges_fast() {
        let a = 0.1;
        let samples = vec![
            OrientedSample::new(Point::new(0.0, 0.0, a), Vec3::z()),
            OrientedSample::new(Point::new(0.0, 0.0, -a), -Vec3::z()),
        ];
        let graph = SampleGraph::from_edges(2, 10, vec![(0, 1)]);
        let mut state = SphereState::new(vec![ball(0.0, a)], vec![0, 0], &graph).unwrap();
        optimize(&mut state, &samples, &graph, &OptimizerParams::default()).unwrap();
        assert!(state.iteration <= 2);
        assert!(state.history.last().unwrap().total_energy < 1e-20);
    }
}
