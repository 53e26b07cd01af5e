use std::fs;

use offsetaxis::field::{AnalyticShape, GridField};
use offsetaxis::geom::{Point, Vec3};
use offsetaxis::io::read_mesh;
use offsetaxis::metrics::topology_report;
use offsetaxis::pipeline::{parse_config_text, run, RunConfig};
use offsetaxis::Error;

fn config(pairs: &[(&str, &str)]) -> RunConfig {
    let mut c = RunConfig::default();
    for (k, v) in pairs {
        c.set(k, v).unwrap();
    }
    c
}

#[test]
fn radius_above_alpha_is_rejected_before_work() {
    let c = config(&[("input", "analytic:sphere"), ("alpha", "0.05"), ("r", "0.06")]);
    assert!(matches!(run(&c), Err(Error::Parameter(_))));
}

#[test]
fn config_file_round_trip() {
    let text = "# comment\ninput = analytic:torus\nalpha = 0.04   # trailing\nmax-iters = 20\n\nnormalize = no\n";
    let pairs = parse_config_text(text, "x.cfg".as_ref()).unwrap();
    let mut c = RunConfig::default();
    for (k, v) in &pairs {
        c.set(k, v).unwrap();
    }
    assert_eq!(c.alpha, 0.04);
    assert_eq!(c.max_iters, 20);
    assert_eq!(c.normalize, Some(false));
    assert!(parse_config_text("alpha 0.1", "x.cfg".as_ref()).is_err());
    assert!(c.set("no_such_key", "1").is_err());
}

#[test]
fn grid_sampled_sphere_keeps_topology() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = AnalyticShape::unit_sphere();
    let h = 0.02;
    let n = 131;
    let grid =
        GridField::from_fn([n; 3], Point::new(-1.3, -1.3, -1.3), Vec3::repeat(h), |p| sphere.distance(p)).unwrap();
    let path = dir.path().join("sphere.udf");
    grid.write(std::io::BufWriter::new(fs::File::create(&path).unwrap())).unwrap();

    let out_path = dir.path().join("grid.obj");
    let c = config(&[
        ("input", &format!("grid:{}", path.display())),
        ("normalize", "false"),
        ("seed", "1"),
        ("metric_samples", "0"),
        ("output", out_path.to_str().unwrap()),
    ]);
    let out = run(&c).unwrap();
    let analytic = run(&config(&[("input", "analytic:sphere"), ("seed", "1"), ("metric_samples", "0")])).unwrap();
    let (g, a) = (out.report.mesh.topology, analytic.report.mesh.topology);
    assert_eq!((g.euler_char, g.nm_edge_count, g.patch_count), (2, 0, 1));
    assert_eq!((a.euler_char, a.nm_edge_count, a.patch_count), (2, 0, 1));
    assert_eq!(topology_report(&read_mesh(&out_path).unwrap()).euler_char, 2);
}

#[test]
fn energy_is_monotone_on_torus() {
    let out = run(&config(&[("input", "analytic:torus"), ("seed", "3"), ("metric_samples", "0")])).unwrap();
    let h = out.state.energy_history();
    assert!(h.len() >= 2 && h.len() <= 150);
    for w in h.windows(2).skip(1) {
        assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
    }
    assert_eq!(out.report.mesh.topology.euler_char, 0);
}
