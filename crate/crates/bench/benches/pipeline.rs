use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lunarmanip_bench::{base_cloud, rock_scene};
use lunarmanip_core::geometry::{deproject_pixel, project_point, PixelDepth};
use lunarmanip_core::pointcloud::{estimate_normals, fit_plane_ransac};
use lunarmanip_core::scene::render_view;
use lunarmanip_core::task::run_stacking_task;
use lunarmanip_core::{detect_grasps, CameraIntrinsics, GraspConfig, HandGeometry, SensorModel, TaskConfig};

fn geometry(c: &mut Criterion) {
    let intr = CameraIntrinsics::default();
    c.bench_function("project_deproject", |b| {
        b.iter(|| {
            let p = deproject_pixel(&intr, PixelDepth::new(black_box(321.5), 200.25, 812.0)).unwrap();
            project_point(&intr, &p).unwrap()
        })
    });
}

fn pointcloud(c: &mut Criterion) {
    let cloud = base_cloud(1, 20_000);
    c.bench_function("normals_20k", |b| b.iter(|| estimate_normals(black_box(&cloud), 15).unwrap()));
    c.bench_function("ransac_20k", |b| {
        b.iter(|| fit_plane_ransac(black_box(&cloud), 200, 5.0, 1).unwrap())
    });
}

fn grasps(c: &mut Criterion) {
    let hand = HandGeometry::default();
    let cfg = GraspConfig::default();
    let mut group = c.benchmark_group("detect_grasps");
    group.sample_size(20);
    for n in [5_000, 20_000] {
        let cloud = base_cloud(2, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| detect_grasps(cloud, &hand, &cfg, None).unwrap())
        });
    }
    group.finish();
}

fn scene(c: &mut Criterion) {
    let scene = rock_scene(3);
    let sensor = SensorModel::nominal();
    let mut group = c.benchmark_group("scene");
    group.sample_size(10);
    group.bench_function("render_base_view", |b| {
        b.iter(|| render_view(&scene, &scene.base_camera, &sensor, 1))
    });
    let cfg = TaskConfig::default();
    group.bench_function("stacking_trial", |b| b.iter(|| run_stacking_task(&scene, &cfg, 3)));
    group.finish();
}

criterion_group!(benches, geometry, pointcloud, grasps, scene);
criterion_main!(benches);
