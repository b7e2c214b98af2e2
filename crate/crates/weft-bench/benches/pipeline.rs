use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use weft_bench::bench_params;
use weft_core::fit::{texture_stats_loss, total_loss, ImagePair, render_params};
use weft_core::oracle::{walk_slab, SlabConfig, WalkConfig};
use weft_core::microflake::Fiber;
use weft_core::render::CaptureScene;
use weft_core::{MultiShadowing, Rgb, Vec3};

fn fit_scene() -> CaptureScene {
    let mut scene = CaptureScene::default();
    scene.resolution = 64;
    scene.patch_w_inches = 0.5;
    scene.patch_h_inches = 0.5;
    scene
}

fn bench_render(c: &mut Criterion) {
    let scene = fit_scene();
    let params = bench_params();
    c.bench_function("render_pair_64", |b| {
        b.iter(|| render_params(&scene, &params, MultiShadowing::default()))
    });
}

fn bench_loss(c: &mut Criterion) {
    let scene = fit_scene();
    let params = bench_params();
    let target = render_params(&scene, &params, MultiShadowing::default());
    let mut moved = params;
    moved.weft.k_s = Rgb::splat(0.3);
    let probe = render_params(&scene, &moved, MultiShadowing::default());
    c.bench_function("texture_stats_64", |b| {
        b.iter(|| texture_stats_loss(&probe.reflect, &target.reflect))
    });
    c.bench_function("total_loss_64", |b| {
        b.iter_batched(
            || (probe.clone(), ImagePair { reflect: target.reflect.clone(), transmit: target.transmit.clone() }),
            |(p, t)| total_loss(&p, &t, &moved),
            BatchSize::SmallInput,
        )
    });
}

fn bench_walk(c: &mut Criterion) {
    let slab = SlabConfig {
        fiber: Fiber::new(Vec3::X, 0.5),
        thickness: 2.0,
        albedo: Rgb::splat(0.8),
    };
    let cfg = WalkConfig { n_paths: 50_000, seed: 1, ..Default::default() };
    c.bench_function("slab_walk_50k", |b| b.iter(|| walk_slab(&slab, Vec3::Z, &cfg)));
}

criterion_group!(benches, bench_render, bench_loss, bench_walk);
criterion_main!(benches);
