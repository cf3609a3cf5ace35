//! Fixtures shared by the benchmarks.

use mvtrack_core::geometry::{CameraIntrinsics, CameraPose};
use mvtrack_core::register::MatchSet;
use mvtrack_core::simworld::generate;
use mvtrack_core::{Dataset, ScenarioConfig};
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A short run of the simple preset.
pub fn small_dataset(frames: usize) -> Dataset {
    generate(&ScenarioConfig { frame_count: frames, ..ScenarioConfig::simple() }).expect("preset is valid")
}

/// Random downward-looking poses and ground points in front of them.
pub fn poses_and_points(n: usize, seed: u64) -> Vec<(CameraPose, Vector3<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = Vector3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(5.0..10.0));
            let pose = CameraPose::from_yaw_pitch(c, rng.random_range(-3.0..3.0), rng.random_range(0.6..1.4));
            let x = c + pose.boresight() * rng.random_range(5.0..15.0);
            (pose, Vector3::new(x.x, x.y, 0.0))
        })
        .collect()
}

/// `n` correspondences under a fixed homography, the last `outliers` of
/// them replaced by random pairs.
pub fn planted_matches(n: usize, outliers: usize, seed: u64) -> (Vec<Vector2<f64>>, Vec<Vector2<f64>>, MatchSet) {
    let k = CameraIntrinsics::drone_default();
    let h = Matrix3::new(1.02, 0.03, 12.0, -0.02, 0.98, -7.0, 1.5e-5, -1.0e-5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || Vector2::new(rng.random_range(0.0..k.width as f64), rng.random_range(0.0..k.height as f64));
    let mut src = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    for i in 0..n {
        let p = pick();
        let q = if i + outliers < n {
            let w = h * Vector3::new(p.x, p.y, 1.0);
            Vector2::new(w.x / w.z, w.y / w.z)
        } else {
            pick()
        };
        src.push(p);
        dst.push(q);
    }
    let matches = MatchSet { pairs: (0..n).map(|i| (i, i)).collect(), ratios: vec![0.0; n] };
    (src, dst, matches)
}
