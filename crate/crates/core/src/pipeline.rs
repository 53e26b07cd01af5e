//! End-to-end reconstruction: field, sampling, sphere initialization,
//! optimization, meshing and evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{self, AnalyticShape, DistanceField};
use crate::geom::Point;
use crate::io;
use crate::medial_init::{candidate_spheres, select_spheres, write_spheres};
use crate::mesh::{Mesh, MeshFormat};
use crate::mesher::{build_complex, cleanup, thin, MedialComplex, ThinStats};
use crate::metrics::{chamfer_hausdorff_points, sample_mesh, MeshReport, StageTime, DEFAULT_METRIC_SAMPLES};
use crate::optimizer::{optimize, write_energy_log, OptimizerParams, SphereState};
use crate::par;
use crate::quadric::FitStatus;
use crate::sampler::{
    build_sample_graph, sample_offset_surface, write_samples_ply, OrientedSample, SampleGraph, SamplerParams,
};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Analytic(AnalyticShape),
    Points(PathBuf),
    Triangles(PathBuf),
    Grid(PathBuf),
}

impl InputSpec {
    /// Parses `analytic:<shape>[:k=v,...]`, `points:<path>`,
    /// `triangles:<path>`, `grid:<path>` or a bare path (kind guessed from
    /// the extension).
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("analytic:") {
            return Ok(InputSpec::Analytic(AnalyticShape::parse(rest)?));
        }
        if let Some(p) = s.strip_prefix("points:") {
            return Ok(InputSpec::Points(p.into()));
        }
        if let Some(p) = s.strip_prefix("triangles:") {
            return Ok(InputSpec::Triangles(p.into()));
        }
        if let Some(p) = s.strip_prefix("grid:") {
            return Ok(InputSpec::Grid(p.into()));
        }
        let path = PathBuf::from(s);
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        Ok(match ext.as_str() {
            "xyz" | "pts" => InputSpec::Points(path),
            "obj" | "ply" => InputSpec::Triangles(path),
            "udf" | "grid" => InputSpec::Grid(path),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "cannot tell the kind of input '{s}'; prefix it with points:, triangles:, grid: or analytic:"
                )))
            }
        })
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, InputSpec::Analytic(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<InputSpec>,
    pub input_label: String,
    pub alpha: f64,
    pub r: f64,
    pub delta: f64,
    pub mu: f64,
    pub k: usize,
    pub angle_threshold_deg: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub n_rays: usize,
    pub seed: u64,
    /// Rescale the input into the unit cube; `None` normalizes file inputs
    /// and leaves analytic shapes as they are.
    pub normalize: Option<bool>,
    /// Samples per mesh for Chamfer/Hausdorff; 0 disables them.
    pub metric_samples: usize,
    pub output: Option<PathBuf>,
    pub format: Option<MeshFormat>,
    pub report: Option<PathBuf>,
    pub dump_samples: Option<PathBuf>,
    pub dump_spheres: Option<PathBuf>,
    pub energy_log: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            input_label: String::new(),
            alpha: 0.05,
            r: 0.03,
            delta: 0.02,
            mu: 0.2,
            k: 10,
            angle_threshold_deg: 60.0,
            tol: 1e-10,
            max_iters: 150,
            n_rays: 200_000,
            seed: 0,
            normalize: None,
            metric_samples: DEFAULT_METRIC_SAMPLES,
            output: None,
            format: None,
            report: None,
            dump_samples: None,
            dump_spheres: None,
            energy_log: None,
            threads: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parameter(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parameter(format!("bad boolean '{value}' for '{key}'"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.into(),
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Sets one option by name (dashes and underscores are interchangeable).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let path = || Some(PathBuf::from(value.trim()));
        match key.as_str() {
            "input" => {
                self.input = Some(InputSpec::parse(value.trim())?);
                self.input_label = value.trim().to_string();
            }
            "alpha" => self.alpha = parse_num(&key, value)?,
            "r" | "radius" => self.r = parse_num(&key, value)?,
            "delta" => self.delta = parse_num(&key, value)?,
            "mu" => self.mu = parse_num(&key, value)?,
            "k" => self.k = parse_num(&key, value)?,
            "angle_threshold_deg" | "angle_threshold" => self.angle_threshold_deg = parse_num(&key, value)?,
            "tol" => self.tol = parse_num(&key, value)?,
            "max_iters" => self.max_iters = parse_num(&key, value)?,
            "n_rays" => self.n_rays = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "normalize" => self.normalize = Some(parse_bool(&key, value)?),
            "metric_samples" => self.metric_samples = parse_num(&key, value)?,
            "output" => self.output = path(),
            "format" => {
                self.format = Some(match value.trim().to_ascii_lowercase().as_str() {
                    "obj" => MeshFormat::Obj,
                    "ply" => MeshFormat::Ply,
                    other => return Err(Error::Parameter(format!("unknown mesh format '{other}'"))),
                })
            }
            "report" => self.report = path(),
            "dump_samples" => self.dump_samples = path(),
            "dump_spheres" => self.dump_spheres = path(),
            "energy_log" => self.energy_log = path(),
            "threads" => self.threads = Some(parse_num(&key, value)?),
            _ => return Err(Error::Parameter(format!("unknown option '{key}'"))),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in parse_config_text(&text, path)? {
            self.set(&k, &v).map_err(|e| match e {
                Error::Parameter(m) => Error::Parse { path: path.into(), line: 0, message: m },
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.r > 0.0 && self.r <= self.alpha) {
            return bad(format!("r must satisfy 0 < r <= alpha, got r = {} with alpha = {}", self.r, self.alpha));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be non-negative, got {}", self.mu));
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg <= 180.0) {
            return bad(format!("angle threshold must lie in (0, 180], got {}", self.angle_threshold_deg));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be non-negative, got {}", self.tol));
        }
        if self.n_rays == 0 {
            return bad("n_rays must be positive".into());
        }
        if self.metric_samples != 0 && self.metric_samples < 1000 {
            return bad(format!("metric_samples must be 0 or at least 1000, got {}", self.metric_samples));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.input.is_none() {
            return bad("no input given".into());
        }
        Ok(())
    }

    pub fn sampler_params(&self) -> SamplerParams {
        SamplerParams {
            alpha: self.alpha,
            radius: self.r,
            n_rays: self.n_rays,
            seed: self.seed,
            k: self.k,
            angle_threshold_deg: self.angle_threshold_deg,
        }
    }

    pub fn optimizer_params(&self) -> OptimizerParams {
        OptimizerParams { mu: self.mu, tol: self.tol, max_iters: self.max_iters }
    }
}

/// Loads the field and, if requested, moves it into the unit-cube frame.
pub fn load_field(input: &InputSpec, normalize: Option<bool>) -> Result<DistanceField> {
    let f = match input {
        InputSpec::Analytic(s) => DistanceField::analytic(s.clone()),
        InputSpec::Points(p) => field::load_point_cloud(p)?,
        InputSpec::Triangles(p) => field::load_triangle_soup(p)?,
        InputSpec::Grid(p) => field::load_grid(p)?,
    };
    Ok(if normalize.unwrap_or(!input.is_analytic()) { f.normalized() } else { f })
}

/// Points on the true shape in input coordinates, when it is known.
pub fn reference_points(input: &InputSpec, n: usize, seed: u64) -> Result<Option<Vec<Point>>> {
    Ok(match input {
        InputSpec::Analytic(s) => Some(s.sample_surface(n, &mut ChaCha8Rng::seed_from_u64(seed))),
        InputSpec::Points(p) => Some(io::read_points(p)?),
        InputSpec::Triangles(p) => {
            let tris = io::read_triangles(p)?;
            let mut mesh = Mesh::default();
            for t in tris {
                let b = mesh.vertices.len();
                mesh.vertices.extend(t);
                mesh.triangles.push([b, b + 1, b + 2]);
            }
            Some(sample_mesh(&mesh, n, seed)?)
        }
        InputSpec::Grid(_) => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct FitCounts {
    pub free_radius: usize,
    pub fixed_radius: usize,
    pub degenerate: usize,
}

impl FitCounts {
    fn from_state(state: &SphereState) -> Self {
        let mut c = FitCounts::default();
        for (s, st) in state.spheres.iter().zip(&state.last_status) {
            if !s.alive {
                continue;
            }
            match st {
                FitStatus::FreeRadius => c.free_radius += 1,
                FitStatus::FixedRadius => c.fixed_radius += 1,
                FitStatus::Degenerate => c.degenerate += 1,
            }
        }
        c
    }
}

/// JSON report of one run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunReport {
    pub input: String,
    pub alpha: f64,
    pub r: f64,
    pub delta: f64,
    pub mu: f64,
    pub seed: u64,
    pub normalized: bool,
    pub frame_scale: f64,
    pub rays_cast: usize,
    pub raw_hits: usize,
    pub sample_count: usize,
    pub selected_spheres: usize,
    pub active_spheres: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_energy: f64,
    pub fits: FitCounts,
    pub thinning: ThinStats,
    pub tets_remaining: usize,
    #[serde(flatten)]
    pub mesh: MeshReport,
}

/// Everything a run produces, in the working frame unless noted.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<OrientedSample>,
    pub graph: SampleGraph,
    pub state: SphereState,
    pub complex: MedialComplex,
    /// Output mesh in input coordinates.
    pub mesh: Mesh,
    pub report: RunReport,
}

struct Timer(Vec<StageTime>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(Vec::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push(StageTime { stage: stage.into(), seconds: (now - self.1).as_secs_f64() });
        self.1 = now;
    }
}

/// Sphere initialization and optimization on a fixed sample set.
pub fn fit_spheres_to_samples(
    samples: &[OrientedSample],
    graph: &SampleGraph,
    alpha: f64,
    delta: f64,
    params: &OptimizerParams,
) -> Result<(SphereState, usize)> {
    let candidates = candidate_spheres(samples, alpha).map_err(|e| e.in_stage("medial_init"))?;
    let coverage = select_spheres(&candidates, samples, graph, delta).map_err(|e| e.in_stage("medial_init"))?;
    let selected = coverage.selected.len();
    let mut state = SphereState::from_coverage(coverage, graph).map_err(|e| e.in_stage("medial_init"))?;
    optimize(&mut state, samples, graph, params).map_err(|e| e.in_stage("optimizer"))?;
    Ok((state, selected))
}

/// Meshes an optimized state: clique complex, thinning, cleanup.
pub fn mesh_state(state: &SphereState, field: &DistanceField, alpha: f64) -> (MedialComplex, ThinStats) {
    let mut complex = build_complex(state);
    let stats = thin(&mut complex, field, alpha);
    (cleanup(&complex), stats)
}

/// Runs the whole pipeline and writes every requested output file.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    par::with_threads(config.threads, || run_inner(config))
}

fn run_inner(config: &RunConfig) -> Result<RunOutput> {
    let input = config.input.as_ref().ok_or_else(|| Error::Parameter("no input given".into()))?;
    let mut timer = Timer::new();
    let field = load_field(input, config.normalize).map_err(|e| e.in_stage("field"))?;
    let frame = *field.frame();
    timer.lap("field");

    let set = sample_offset_surface(&field, &config.sampler_params()).map_err(|e| e.in_stage("sampler"))?;
    if let Some(p) = &config.dump_samples {
        write_samples_ply(p, &set.samples).map_err(|e| e.in_stage("sampler"))?;
    }
    log::info!("{} samples from {} rays", set.samples.len(), set.rays.rays_cast);
    timer.lap("sampler");

    let candidates = candidate_spheres(&set.samples, config.alpha).map_err(|e| e.in_stage("medial_init"))?;
    let coverage =
        select_spheres(&candidates, &set.samples, &set.graph, config.delta).map_err(|e| e.in_stage("medial_init"))?;
    let selected = coverage.selected.len();
    let mut state = SphereState::from_coverage(coverage, &set.graph).map_err(|e| e.in_stage("medial_init"))?;
    log::info!("{selected} spheres selected");
    timer.lap("medial_init");

    let params = config.optimizer_params();
    optimize(&mut state, &set.samples, &set.graph, &params).map_err(|e| e.in_stage("optimizer"))?;
    if let Some(p) = &config.energy_log {
        write_energy_log(p, &state.history).map_err(|e| e.in_stage("optimizer"))?;
    }
    if let Some(p) = &config.dump_spheres {
        let world: Vec<_> = state
            .spheres
            .iter()
            .map(|s| {
                let mut s = *s;
                s.center = frame.to_world(&s.center);
                s.radius /= frame.scale;
                s
            })
            .collect();
        write_spheres(p, &world).map_err(|e| e.in_stage("optimizer"))?;
    }
    timer.lap("optimizer");

    let (complex, thin_stats) = mesh_state(&state, &field, config.alpha);
    let mesh = complex.to_mesh().to_world(&frame);
    if let Some(p) = &config.output {
        let format = match config.format {
            Some(f) => f,
            None => MeshFormat::from_path(p).map_err(|e| e.in_stage("mesher"))?,
        };
        mesh.write(p, format).map_err(|e| e.in_stage("mesher"))?;
    }
    timer.lap("mesher");

    let mut mesh_report = MeshReport::new(&mesh);
    if config.metric_samples > 0 && !mesh.is_empty() {
        if let Some(reference) =
            reference_points(input, config.metric_samples, config.seed).map_err(|e| e.in_stage("metrics"))?
        {
            let ours = sample_mesh(&mesh, config.metric_samples, config.seed).map_err(|e| e.in_stage("metrics"))?;
            let (cd, hd) = chamfer_hausdorff_points(&ours, &reference).map_err(|e| e.in_stage("metrics"))?;
            mesh_report.chamfer = Some(cd);
            mesh_report.hausdorff = Some(hd);
        }
    }
    timer.lap("metrics");
    mesh_report.runtime = timer.0;

    let last = state.history.last();
    let converged = state.history.len() >= 2 && {
        let n = state.history.len();
        (state.history[n - 2].total_energy - state.history[n - 1].total_energy).abs() < config.tol
    };
    let report = RunReport {
        input: config.input_label.clone(),
        alpha: config.alpha,
        r: config.r,
        delta: config.delta,
        mu: config.mu,
        seed: config.seed,
        normalized: frame.scale != 1.0 || frame.center != Point::origin(),
        frame_scale: frame.scale,
        rays_cast: set.rays.rays_cast,
        raw_hits: set.rays.raw_hits,
        sample_count: set.samples.len(),
        selected_spheres: selected,
        active_spheres: state.active_count(),
        iterations: state.iteration,
        converged,
        final_energy: last.map_or(0.0, |h| h.total_energy),
        fits: FitCounts::from_state(&state),
        thinning: thin_stats,
        tets_remaining: complex.tets.len(),
        mesh: mesh_report,
    };
    if let Some(p) = &config.report {
        write_report(p, &report).map_err(|e| e.in_stage("report"))?;
    }
    Ok(RunOutput { samples: set.samples, graph: set.graph, state, complex, mesh, report })
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Rebuilds the kNN graph for externally supplied samples.
pub fn graph_for_samples(samples: &[OrientedSample], k: usize, angle_threshold_deg: f64) -> Result<SampleGraph> {
    build_sample_graph(samples, k, angle_threshold_deg)
}
