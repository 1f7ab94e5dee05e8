//! Sequential vs rayon render throughput on the reference layout with a
//! reduced sample budget. Both paths produce bit-identical maps; this
//! measures what the pool actually buys.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pupilray::scene_file::parse_scene;
use pupilray::tracer::{render_retina_par, render_retina_seq, ClassFilter};
use pupilray::Scene;

fn bench_scene(samples_per_pixel: usize) -> Scene {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenes/reference.scene"
    ))
    .expect("reference scene readable");
    let mut scene = parse_scene(&text).expect("reference scene valid");
    scene.source.samples_per_pixel = samples_per_pixel;
    scene
}

fn renders(c: &mut Criterion) {
    let mut group = c.benchmark_group("render");
    group.sample_size(10);
    for samples in [64, 256] {
        let scene = bench_scene(samples);
        group.bench_with_input(BenchmarkId::new("sequential", samples), &scene, |b, s| {
            b.iter(|| render_retina_seq(s, 7, ClassFilter::All).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("parallel", samples), &scene, |b, s| {
            b.iter(|| render_retina_par(s, 7, ClassFilter::All).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, renders);
criterion_main!(benches);
