use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use offsetaxis::io::read_mesh;
use offsetaxis::medial_init::write_spheres;
use offsetaxis::metrics::{chamfer_hausdorff, topology_report, triangle_quality, TopologyReport};
use offsetaxis::optimizer::write_energy_log;
use offsetaxis::par;
use offsetaxis::pipeline::{fit_spheres_to_samples, graph_for_samples, load_field, run, RunConfig};
use offsetaxis::sampler::{read_samples_ply, sample_offset_surface, write_samples_ply};

/// Mixed-dimensional mesh reconstruction from unsigned distance fields.
#[derive(Parser, Debug)]
#[command(name = "offsetaxis", version)]
struct Cli {
    /// Worker threads; 1 runs everything on the calling thread's pool.
    #[arg(long, global = true, env = "OFFSETAXIS_THREADS")]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the whole pipeline and write a mesh.
    Reconstruct(ReconstructArgs),
    /// Compare two mesh files.
    Evaluate(EvaluateArgs),
    /// Sample the offset surface and dump oriented samples as PLY.
    Sample(SampleArgs),
    /// Fit medial spheres to a sample dump and write `cx cy cz r` lines.
    Fit(FitArgs),
}

/// Options shared with the `key = value` config file. A flag given on the
/// command line overrides the same key from the file.
#[derive(Args, Debug, Default)]
struct Params {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// analytic:<shape>[:k=v,...], points:<file>, triangles:<file> or grid:<file>.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Poisson-disk radius of the samples.
    #[arg(long)]
    r: Option<f64>,
    /// Coverage distance of the sphere selection.
    #[arg(long)]
    delta: Option<f64>,
    /// Weight of the line quadric.
    #[arg(long)]
    mu: Option<f64>,
    /// Neighbors in the sample graph.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    angle_threshold_deg: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    n_rays: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rescale the input into the unit cube (default: files yes, analytic no).
    #[arg(long)]
    normalize: Option<bool>,
}

impl Params {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        push("input", self.input.clone());
        push("alpha", self.alpha.map(|x| x.to_string()));
        push("r", self.r.map(|x| x.to_string()));
        push("delta", self.delta.map(|x| x.to_string()));
        push("mu", self.mu.map(|x| x.to_string()));
        push("k", self.k.map(|x| x.to_string()));
        push("angle_threshold_deg", self.angle_threshold_deg.map(|x| x.to_string()));
        push("tol", self.tol.map(|x| x.to_string()));
        push("max_iters", self.max_iters.map(|x| x.to_string()));
        push("n_rays", self.n_rays.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("normalize", self.normalize.map(|x| x.to_string()));
        v
    }
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    params: Params,
    /// Output mesh (.obj or .ply).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    dump_samples: Option<PathBuf>,
    #[arg(long)]
    dump_spheres: Option<PathBuf>,
    /// Per-iteration energy CSV.
    #[arg(long)]
    energy_log: Option<PathBuf>,
    /// Samples per mesh for Chamfer/Hausdorff; 0 skips them.
    #[arg(long)]
    metric_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    mesh_a: PathBuf,
    mesh_b: PathBuf,
    #[arg(long, default_value_t = offsetaxis::metrics::DEFAULT_METRIC_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    params: Params,
    /// Sample dump (.ply), in the working frame.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    params: Params,
    /// Sample dump written by `sample`.
    #[arg(long)]
    samples: PathBuf,
    /// Sphere dump, one `cx cy cz r` line per sphere.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    energy_log: Option<PathBuf>,
}

fn build_config(params: &Params, threads: Option<usize>, extra: Vec<(&'static str, String)>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &params.config {
        cfg.load_file(path).with_context(|| format!("reading config {}", path.display()))?;
    }
    for (k, v) in params.pairs().into_iter().chain(extra) {
        cfg.set(k, &v).with_context(|| format!("option --{}", k.replace('_', "-")))?;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn path_pair(k: &'static str, p: &Option<PathBuf>) -> Option<(&'static str, String)> {
    p.as_ref().map(|p| (k, p.display().to_string()))
}

fn reconstruct(args: &ReconstructArgs, threads: Option<usize>) -> Result<()> {
    let extra: Vec<_> = [
        path_pair("output", &args.output),
        path_pair("report", &args.report),
        path_pair("dump_samples", &args.dump_samples),
        path_pair("dump_spheres", &args.dump_spheres),
        path_pair("energy_log", &args.energy_log),
        args.metric_samples.map(|n| ("metric_samples", n.to_string())),
    ]
    .into_iter()
    .flatten()
    .collect();
    let cfg = build_config(&args.params, threads, extra)?;
    if cfg.output.is_none() {
        bail!("no output mesh given (use --output or 'output = ...' in the config)");
    }
    let out = run(&cfg)?;
    println!("{}", out.report.mesh.to_table());
    Ok(())
}

#[derive(serde::Serialize)]
struct EvaluateReport {
    mesh_a: String,
    mesh_b: String,
    samples: usize,
    seed: u64,
    chamfer: f64,
    hausdorff: f64,
    tri_quality_a: Option<f64>,
    tri_quality_b: Option<f64>,
    topology_a: TopologyReport,
    topology_b: TopologyReport,
}

fn evaluate(args: &EvaluateArgs, threads: Option<usize>) -> Result<()> {
    let load = |p: &Path| read_mesh(p).with_context(|| format!("loading {}", p.display()));
    let (a, b) = (load(&args.mesh_a)?, load(&args.mesh_b)?);
    let (cd, hd) = par::with_threads(threads, || chamfer_hausdorff(&a, &b, args.samples, args.seed))?;
    let report = EvaluateReport {
        mesh_a: args.mesh_a.display().to_string(),
        mesh_b: args.mesh_b.display().to_string(),
        samples: args.samples,
        seed: args.seed,
        chamfer: cd,
        hausdorff: hd,
        tri_quality_a: triangle_quality(&a).ok(),
        tri_quality_b: triangle_quality(&b).ok(),
        topology_a: topology_report(&a),
        topology_b: topology_report(&b),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &args.report {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sample(args: &SampleArgs, threads: Option<usize>) -> Result<()> {
    let cfg = build_config(&args.params, threads, Vec::new())?;
    cfg.validate()?;
    let input = cfg.input.as_ref().expect("validated");
    let field = load_field(input, cfg.normalize)?;
    let set = par::with_threads(cfg.threads, || sample_offset_surface(&field, &cfg.sampler_params()))?;
    write_samples_ply(&args.output, &set.samples)?;
    let frame = field.frame();
    println!(
        "{} samples from {} rays; frame scale {} center [{}, {}, {}]",
        set.samples.len(),
        set.rays.rays_cast,
        frame.scale,
        frame.center.x,
        frame.center.y,
        frame.center.z
    );
    Ok(())
}

fn fit(args: &FitArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = build_config(&args.params, threads, Vec::new())?;
    // `fit` never reads the field; any placeholder satisfies validation.
    if cfg.input.is_none() {
        cfg.set("input", "analytic:sphere")?;
    }
    cfg.validate()?;
    let samples = read_samples_ply(&args.samples).with_context(|| format!("loading {}", args.samples.display()))?;
    let (state, selected) = par::with_threads(cfg.threads, || -> offsetaxis::Result<_> {
        let graph = graph_for_samples(&samples, cfg.k, cfg.angle_threshold_deg)?;
        fit_spheres_to_samples(&samples, &graph, cfg.alpha, cfg.delta, &cfg.optimizer_params())
    })?;
    write_spheres(&args.output, &state.spheres)?;
    if let Some(p) = &args.energy_log {
        write_energy_log(p, &state.history)?;
    }
    println!(
        "{} samples, {selected} spheres selected, {} active after {} iterations",
        samples.len(),
        state.active_count(),
        state.iteration
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Reconstruct(a) => reconstruct(a, cli.threads),
        Command::Evaluate(a) => evaluate(a, cli.threads),
        Command::Sample(a) => sample(a, cli.threads),
        Command::Fit(a) => fit(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
