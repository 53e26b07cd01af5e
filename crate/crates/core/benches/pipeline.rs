//! Stage timings on one worker versus the full pool.
//!
//! Build with `--no-default-features` to time the sequential fallback instead
//! of a one-thread rayon pool.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use offsetaxis::field::{AnalyticShape, DistanceField};
use offsetaxis::metrics::chamfer_hausdorff;
use offsetaxis::optimizer::OptimizerParams;
use offsetaxis::par;
use offsetaxis::pipeline::{fit_spheres_to_samples, mesh_state};
use offsetaxis::sampler::{cast_rays, sample_offset_surface, SamplerParams};

fn pools() -> Vec<(String, Option<usize>)> {
    vec![("one_thread".to_string(), Some(1)), (format!("pool_{}", par::current_threads()), None)]
}

fn bench_stages(c: &mut Criterion) {
    let field = DistanceField::analytic(AnalyticShape::unit_sphere());
    let alpha = 0.05;
    let mut params = SamplerParams::new(alpha, 0.03);
    params.n_rays = 50_000;
    params.seed = 1;
    let set = sample_offset_surface(&field, &params).expect("sphere samples");
    let opt = OptimizerParams { mu: 0.2, tol: 1e-10, max_iters: 150 };
    let (state, _) = fit_spheres_to_samples(&set.samples, &set.graph, alpha, 0.02, &opt).expect("fit");
    let mesh = mesh_state(&state, &field, alpha).0.to_mesh();

    let mut g = c.benchmark_group("stages");
    g.sample_size(10);
    for (label, threads) in pools() {
        g.bench_with_input(BenchmarkId::new("cast_rays_20k", &label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || cast_rays(&field, alpha, 20_000, 7).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("sample_offset_surface", &label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || sample_offset_surface(&field, &params).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("fit_spheres", &label), &threads, |b, &t| {
            b.iter(|| {
                par::with_threads(t, || fit_spheres_to_samples(&set.samples, &set.graph, alpha, 0.02, &opt).unwrap())
            })
        });
        g.bench_with_input(BenchmarkId::new("mesh_state", &label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || mesh_state(black_box(&state), &field, alpha)))
        });
        g.bench_with_input(BenchmarkId::new("chamfer_20k", &label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || chamfer_hausdorff(&mesh, &mesh, 20_000, 3).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_stages);
criterion_main!(benches);
