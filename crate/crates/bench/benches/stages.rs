use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mvtrack_bench::{planted_matches, poses_and_points, small_dataset};
use mvtrack_core::calib::{correspondences, solve_pose};
use mvtrack_core::fuse::{detect_peaks, fuse_views, splat_view};
use mvtrack_core::geometry::{ground_homography, project_point, CameraIntrinsics, ProjectionMatrix};
use mvtrack_core::pipeline::{grid_for, run_sequence, DropoutMode, PipelineParams};
use mvtrack_core::register::{estimate_homography_ransac, register_view, RegisterParams};
use mvtrack_core::track::associate;
use nalgebra::Vector2;

fn projection(c: &mut Criterion) {
    let k = CameraIntrinsics::drone_default();
    let cases = poses_and_points(1000, 1);
    c.bench_function("project 1000 ground points", |b| {
        b.iter(|| {
            for (pose, x) in &cases {
                black_box(project_point(&ProjectionMatrix::compose(&k, pose), x).ok());
            }
        })
    });
    c.bench_function("ground homography 1000 views", |b| {
        b.iter(|| {
            for (pose, x) in &cases {
                let h = ground_homography(&ProjectionMatrix::compose(&k, pose)).unwrap();
                black_box(h.apply(&Vector2::new(x.x, x.y)).ok());
            }
        })
    });
}

fn calibration(c: &mut Criterion) {
    let ds = small_dataset(2);
    let corr = correspondences(&ds.captures[0][0]);
    c.bench_function("solve pose from board corners", |b| b.iter(|| solve_pose(black_box(&corr), &ds.intrinsics).unwrap()));
}

fn registration(c: &mut Criterion) {
    let (src, dst, m) = planted_matches(100, 40, 3);
    let p = RegisterParams::default();
    c.bench_function("ransac 100 matches 40% outliers", |b| b.iter(|| estimate_homography_ransac(&src, &dst, &m, &p, 7).unwrap()));
    let ds = small_dataset(4);
    c.bench_function("register view to reference", |b| b.iter(|| register_view(&ds.captures[3][0], &ds.captures[0][0], &p, 7).unwrap()));
}

fn fusion(c: &mut Criterion) {
    let ds = small_dataset(2);
    let params = PipelineParams::default();
    let grid = grid_for(&ds, &params).unwrap();
    let views: Vec<_> = ds.captures[0]
        .iter()
        .zip(&ds.true_poses[0])
        .map(|(cap, pose)| {
            let h = ground_homography(&ProjectionMatrix::compose(&ds.intrinsics, pose)).unwrap();
            (cap.pedestrians.iter().map(|p| p.foot).collect::<Vec<_>>(), h)
        })
        .collect();
    c.bench_function("splat, fuse and detect 8 views", |b| {
        b.iter(|| {
            let layers: Vec<_> = views.iter().map(|(feet, h)| splat_view(feet, h, &ds.intrinsics, &grid, params.fuse.sigma)).collect();
            let map = fuse_views(&layers).unwrap();
            black_box(detect_peaks(&map, 0, params.fuse.threshold, params.fuse.nms_radius))
        })
    });
}

fn tracking(c: &mut Criterion) {
    let pred: Vec<Vector2<f64>> = (0..40).map(|i| Vector2::new((i % 8) as f64 * 2.0, (i / 8) as f64 * 2.0)).collect();
    let dets: Vec<Vector2<f64>> = pred.iter().map(|p| p + Vector2::new(0.1, -0.1)).collect();
    c.bench_function("associate 40 tracks", |b| b.iter(|| associate(black_box(&pred), black_box(&dets), 1.5)));
}

fn end_to_end(c: &mut Criterion) {
    let ds = small_dataset(10);
    let params = PipelineParams::default();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("10 frames simple preset", |b| b.iter(|| run_sequence(&ds, 0, 0.0, DropoutMode::PerFrame, &params).unwrap()));
    g.finish();
}

criterion_group!(benches, projection, calibration, registration, fusion, tracking, end_to_end);
criterion_main!(benches);
