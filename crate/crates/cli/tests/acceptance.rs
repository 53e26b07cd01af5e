//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary so the lines always reach stdout.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::Vector4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use offsetaxis::field::{AnalyticShape, DistanceField};
use offsetaxis::geom::{Point, Vec3};
use offsetaxis::metrics::{chamfer_hausdorff_points, sample_mesh};
use offsetaxis::pipeline::{fit_spheres_to_samples, mesh_state, reference_points, run, RunConfig, RunOutput};
use offsetaxis::quadric::{fit_sphere, FitStatus};
use offsetaxis::sampler::{
    cast_rays, default_hit_tolerance, poisson_thin, sample_offset_surface, trace_segment, OrientedSample,
};

#[path = "../../core/tests/common/mod.rs"]
mod common;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cfg(pairs: &[(&str, &str)]) -> RunConfig {
    let mut c = RunConfig::default();
    c.set("threads", "1").unwrap();
    for (k, v) in pairs {
        c.set(k, v).unwrap();
    }
    c
}

/// One end-to-end run on a single worker, with its wall time.
fn timed_run(pairs: &[(&str, &str)]) -> (RunOutput, f64) {
    let t = Instant::now();
    let out = run(&cfg(pairs)).unwrap_or_else(|e| panic!("run {pairs:?} failed: {e}"));
    (out, t.elapsed().as_secs_f64())
}

fn median_radius_error(out: &RunOutput, alpha: f64) -> f64 {
    let mut e: Vec<f64> =
        out.state.spheres.iter().filter(|s| s.alive).map(|s| (s.radius - alpha).abs() / alpha).collect();
    e.sort_by(f64::total_cmp);
    e[e.len() / 2]
}

fn quadric_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut de, mut ds, mut all_free) = (0.0f64, 0.0f64, true);
    for _ in 0..100 {
        let cluster = common::random_cluster(&mut rng);
        let refs: Vec<&OrientedSample> = cluster.iter().collect();
        let (c, r, st) = fit_sphere(&refs, 0.2, 0.1, f64::INFINITY);
        all_free &= st == FitStatus::FreeRadius;
        let ours = Vector4::new(c.x, c.y, c.z, r);
        let oracle = common::brute_force_minimum(&cluster, 0.2, Vector4::new(0.0, 0.0, 0.0, 0.1));
        de = de.max((common::energy(&cluster, 0.2, &ours) - common::energy(&cluster, 0.2, &oracle)).abs());
        ds = ds.max((ours - oracle).amax());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        all_free && de < 1e-6 && ds < 1e-4 && secs < 10.0,
        format!("max energy gap {de:.1e}, max (c,r) gap {ds:.1e}, {secs:.2} s"),
    )
}

fn symmetry() -> Outcome {
    let a = 0.07;
    let slab: Vec<OrientedSample> = [(0.3, -0.2), (-0.1, 0.4), (0.0, 0.0)]
        .iter()
        .flat_map(|&(x, y)| {
            [OrientedSample::new(Point::new(x, y, a), Vec3::z()), OrientedSample::new(Point::new(x, y, -a), -Vec3::z())]
        })
        .collect();
    let refs: Vec<&OrientedSample> = slab.iter().collect();
    let (c, r, _) = fit_sphere(&refs, 0.2, 0.01, 1.0);
    let slab_err = c.z.abs().max((r - a).abs());

    let center = Point::new(0.2, -0.4, 0.1);
    let rad = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shell: Vec<OrientedSample> = (0..40)
        .map(|_| {
            let u = common::unit_vec(&mut rng);
            OrientedSample::new(center + u * rad, u)
        })
        .collect();
    let refs: Vec<&OrientedSample> = shell.iter().collect();
    let (c, r, _) = fit_sphere(&refs, 0.2, 0.1, 1.0);
    let sphere_err = (c - center).norm().max((r - rad).abs());
    outcome(slab_err < 1e-9 && sphere_err < 1e-9, format!("slab error {slab_err:.1e}, sphere error {sphere_err:.1e}"))
}

fn monotone(runs: &[(&str, &RunOutput)]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut max_iters = 0;
    let mut bad = Vec::new();
    for (name, out) in runs {
        let h = out.state.energy_history();
        for w in h.windows(2).skip(1) {
            worst = worst.max(w[1] - w[0]);
        }
        max_iters = max_iters.max(out.state.iteration);
        if h.windows(2).skip(1).any(|w| w[1] > w[0] + 1e-9) || out.state.iteration > 150 || !out.report.converged {
            bad.push(*name);
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} runs, largest step-to-step change {worst:+.1e}, at most {max_iters} iterations, failing {bad:?}",
            runs.len()
        ),
    )
}

fn radius_law(runs: &[(&str, &RunOutput)]) -> Outcome {
    let med: Vec<(String, f64)> = runs.iter().map(|(n, o)| (n.to_string(), median_radius_error(o, 0.05))).collect();
    let pass = med.iter().all(|(_, m)| *m < 0.1);
    let detail = med.iter().map(|(n, m)| format!("{n} {m:.2e}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("median |r-alpha|/alpha: {detail}"))
}

fn two_plates() -> Outcome {
    let gap = 0.12;
    let input = format!("analytic:two-plates:gap={gap}");
    let (wide, _) =
        timed_run(&[("input", &input), ("alpha", "0.07"), ("r", "0.03"), ("seed", "1"), ("metric_samples", "0")]);
    let (narrow, _) =
        timed_run(&[("input", &input), ("alpha", "0.03"), ("r", "0.02"), ("seed", "1"), ("metric_samples", "0")]);
    let (cw, cn) = (wide.report.mesh.topology.component_count, narrow.report.mesh.topology.component_count);
    outcome(cw == 1 && cn == 2, format!("gap {gap}: alpha 0.07 -> {cw} component(s), alpha 0.03 -> {cn}"))
}

fn delta_sweep() -> Outcome {
    let c = cfg(&[("input", "analytic:sphere"), ("seed", "1")]);
    let field = DistanceField::analytic(AnalyticShape::unit_sphere());
    let set = sample_offset_surface(&field, &c.sampler_params()).unwrap();
    let reference = reference_points(c.input.as_ref().unwrap(), 100_000, 1).unwrap().unwrap();
    let mut rows = Vec::new();
    for delta in [0.04, 0.02, 0.01] {
        let (state, selected) =
            fit_spheres_to_samples(&set.samples, &set.graph, c.alpha, delta, &c.optimizer_params()).unwrap();
        let mesh = mesh_state(&state, &field, c.alpha).0.to_mesh();
        let pts = sample_mesh(&mesh, 100_000, 1).unwrap();
        let (cd, _) = chamfer_hausdorff_points(&pts, &reference).unwrap();
        rows.push((delta, selected, cd));
    }
    let pass = rows.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 <= w[0].2);
    let detail = rows.iter().map(|(d, s, cd)| format!("delta {d}: {s} spheres, CD {cd:.5}")).collect::<Vec<_>>();
    outcome(pass, detail.join("; "))
}

fn sampling() -> Outcome {
    let f = DistanceField::analytic(AnalyticShape::unit_sphere());
    let alpha = 0.05;
    let eps = default_hit_tolerance(alpha);
    let hits = cast_rays(&f, alpha, 20_000, 17).unwrap();
    let worst_hit = hits.iter().map(|p| (f.eval(p) - alpha).abs()).fold(0.0, f64::max);
    let r = 0.03;
    let kept = poisson_thin(&hits, r);
    let mut min_gap = f64::INFINITY;
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            min_gap = min_gap.min((kept[i] - kept[j]).norm());
        }
    }
    let line = trace_segment(&f, alpha, eps, &Point::new(-2.0, 0.0, 0.0), &Point::new(2.0, 0.0, 0.0));
    let want = [-1.05, -0.95, 0.95, 1.05];
    let four = line.len() == 4 && line.iter().zip(want).all(|(p, w)| (p.x - w).abs() <= eps);
    outcome(
        worst_hit <= eps && min_gap >= r && four,
        format!(
            "{} hits, max |phi-alpha| {worst_hit:.1e} (eps {eps:.0e}), {} kept with min spacing {min_gap:.4} >= {r}, shell ray hits {}",
            hits.len(),
            kept.len(),
            line.len()
        ),
    )
}

fn cli_reconstruct(dir: &Path, name: &str, threads: &str) -> Vec<u8> {
    let mesh = dir.join(format!("{name}.obj"));
    let status = Command::new(env!("CARGO_BIN_EXE_offsetaxis"))
        .args(["--threads", threads, "reconstruct", "--input", "analytic:three-fin", "--seed", "4"])
        .args(["--metric-samples", "0", "-o"])
        .arg(&mesh)
        .output()
        .expect("spawn offsetaxis");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(mesh).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = cli_reconstruct(dir.path(), "a", "1");
    let b = cli_reconstruct(dir.path(), "b", "1");
    let c = cli_reconstruct(dir.path(), "c", "8");
    outcome(
        a == b && a == c && !a.is_empty(),
        format!("repeat identical: {}, --threads 1 vs 8 identical: {} ({} bytes)", a == b, a == c, a.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("{} [{n:2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "quadric oracle equivalence", quadric_oracle());
    report(2, "symmetry exactness", symmetry());

    let (sphere, t_sphere) = timed_run(&[("input", "analytic:sphere"), ("seed", "1")]);
    let (torus, t_torus) = timed_run(&[("input", "analytic:torus"), ("seed", "1")]);
    let (disk, t_disk) = timed_run(&[("input", "analytic:disk"), ("seed", "1")]);
    let (fin, _) = timed_run(&[("input", "analytic:three-fin"), ("seed", "1"), ("angle_threshold_deg", "75")]);
    let (tube, _) = timed_run(&[("input", "analytic:thin-cylinder"), ("seed", "1")]);

    report(
        3,
        "monotone energy and convergence",
        monotone(&[
            ("sphere", &sphere),
            ("torus", &torus),
            ("disk", &disk),
            ("three-fin", &fin),
            ("thin-cylinder", &tube),
        ]),
    );
    report(4, "exact-field radius law", radius_law(&[("sphere", &sphere), ("torus", &torus), ("disk", &disk)]));

    let (s, t, d) = (&sphere.report, &torus.report, &disk.report);
    let st = &s.mesh.topology;
    let pass5 = st.euler_char == 2
        && st.nm_edge_count == 0
        && st.patch_count == 1
        && s.tets_remaining == 0
        && st.segment_count == 0
        && t.mesh.topology.euler_char == 0
        && d.mesh.topology.euler_char == 1
        && d.mesh.topology.boundary_edge_count > 0
        && [t_sphere, t_torus, t_disk].iter().all(|&x| x < 120.0);
    report(
        5,
        "closed/open topology",
        outcome(
            pass5,
            format!(
                "sphere chi {} nm {} patches {} tets {} segments {} ({t_sphere:.1} s); torus chi {} ({t_torus:.1} s); disk chi {} boundary edges {} ({t_disk:.1} s)",
                st.euler_char,
                st.nm_edge_count,
                st.patch_count,
                s.tets_remaining,
                st.segment_count,
                t.mesh.topology.euler_char,
                d.mesh.topology.euler_char,
                d.mesh.topology.boundary_edge_count
            ),
        ),
    );

    let ft = &fin.report.mesh.topology;
    report(
        6,
        "three-fin non-manifold topology",
        outcome(
            ft.nm_edge_count >= 1 && ft.patch_count == 3,
            format!(
                "seed 1, angle threshold 75 deg: {} non-manifold edges, {} patches",
                ft.nm_edge_count, ft.patch_count
            ),
        ),
    );

    let tt = &tube.report;
    report(
        7,
        "mixed dimension",
        outcome(
            tt.mesh.topology.segment_count >= 1 && tt.tets_remaining == 0,
            format!(
                "thin cylinder: {} segments, {} triangles, {} tets",
                tt.mesh.topology.segment_count, tt.mesh.topology.f_count, tt.tets_remaining
            ),
        ),
    );

    let (cd, hd) = (s.mesh.chamfer.unwrap_or(f64::NAN), s.mesh.hausdorff.unwrap_or(f64::NAN));
    report(
        8,
        "geometric accuracy",
        outcome(
            hd < 0.05 && cd < 0.025,
            format!("sphere Hausdorff {hd:.4} < 0.05, Chamfer {cd:.4} < 0.025 (100k samples)"),
        ),
    );

    report(9, "alpha behavior", two_plates());
    report(10, "delta behavior", delta_sweep());
    report(11, "sampling properties", sampling());
    report(12, "determinism", determinism());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
