use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{project_point, CameraIntrinsics, CameraPose, ProjectionMatrix};
use crate::simworld::config::ScenarioConfig;
use crate::simworld::los::{line_of_sight, Aabb};
use crate::simworld::world::{DroneState, Landmark, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct CornerObservation {
    pub corner_id: u32,
    pub world: Vector3<f64>,
    pub pixel: Vector2<f64>,
}

/// A detected person in one view. Identity is not part of the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianObservation {
    pub foot: Vector2<f64>,
    /// `[x_min, y_min, x_max, y_max]`, pixels, clipped to the image.
    pub bbox: [f64; 4],
}

/// Keypoints (`2 × n`) and descriptors (`d × n`) stored column-per-feature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub keypoints: Vec<Vector2<f64>>,
    pub dim: usize,
    /// Row-major `n × dim`.
    pub descriptors: Vec<f64>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.descriptors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, kp: Vector2<f64>, desc: &[f64]) {
        debug_assert!(self.dim == desc.len() || self.keypoints.is_empty());
        self.dim = desc.len();
        self.keypoints.push(kp);
        self.descriptors.extend_from_slice(desc);
    }
}

/// Everything one drone reports for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCapture {
    pub frame: usize,
    pub drone: usize,
    pub timestamp: f64,
    pub corners: Vec<CornerObservation>,
    pub pedestrians: Vec<PedestrianObservation>,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityRecord {
    pub frame: usize,
    pub drone: usize,
    pub pedestrian: u32,
    pub flag: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bbox: Option<[f64; 4]>,
}

/// Simulator-side identities behind a capture, never written with the
/// observations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaptureTruth {
    pub pedestrian_ids: Vec<u32>,
    pub landmark_ids: Vec<u32>,
    pub visibility: Vec<VisibilityRecord>,
}

/// Static scene content that every capture observes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub boards: Vec<(u32, Vector3<f64>)>,
    pub landmarks: Vec<Landmark>,
    pub obstacles: Vec<Aabb>,
}

impl Scene {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let mut boards = Vec::new();
        for cb in &cfg.checkerboards {
            for c in cb.corners() {
                boards.push((boards.len() as u32, c));
            }
        }
        Self { boards, landmarks: crate::simworld::world::make_landmarks(cfg), obstacles: cfg.obstacles() }
    }
}

/// Deterministic RNG for one `(frame, drone)` capture, independent of the
/// order captures are taken in.
pub fn capture_rng(seed: u64, frame: usize, drone: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca97_0000_0000);
    rng.set_stream(((frame as u64) << 16) | drone as u64);
    rng
}

fn visible_pixel(
    p: &ProjectionMatrix,
    k: &CameraIntrinsics,
    center: &Vector3<f64>,
    x: &Vector3<f64>,
    obstacles: &[Aabb],
) -> Option<Vector2<f64>> {
    let uv = project_point(p, x).ok()?;
    if !k.contains(&uv) || !line_of_sight(center, x, obstacles) {
        return None;
    }
    Some(uv)
}

/// Box of the pedestrian's bounding cylinder-box projected and clipped to
/// the image. `None` if any of its corners is behind the camera.
pub fn pedestrian_bbox(p: &ProjectionMatrix, k: &CameraIntrinsics, foot: &Vector2<f64>, radius: f64, height: f64) -> Option<[f64; 4]> {
    let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for dx in [-radius, radius] {
        for dy in [-radius, radius] {
            for z in [0.0, height] {
                let uv = project_point(p, &Vector3::new(foot.x + dx, foot.y + dy, z)).ok()?;
                bb[0] = bb[0].min(uv.x);
                bb[1] = bb[1].min(uv.y);
                bb[2] = bb[2].max(uv.x);
                bb[3] = bb[3].max(uv.y);
            }
        }
    }
    let (w, h) = (k.width as f64, k.height as f64);
    Some([bb[0].clamp(0.0, w), bb[1].clamp(0.0, h), bb[2].clamp(0.0, w), bb[3].clamp(0.0, h)])
}

/// Observes the frozen world from one drone.
pub fn capture_frame(
    cfg: &ScenarioConfig,
    scene: &Scene,
    world: &WorldState,
    drone: &DroneState,
    rng: &mut ChaCha8Rng,
) -> (FrameCapture, CaptureTruth) {
    let k = cfg.intrinsics();
    let pose: CameraPose = drone.pose();
    let p = ProjectionMatrix::compose(&k, &pose);
    let center = drone.position;
    let sigma = cfg.pixel_noise_sigma;
    let pix_noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let noisy = |uv: Vector2<f64>, rng: &mut ChaCha8Rng| -> Option<Vector2<f64>> {
        if sigma == 0.0 {
            return Some(uv);
        }
        let n = uv + Vector2::new(pix_noise.sample(rng), pix_noise.sample(rng));
        k.contains(&n).then_some(n)
    };

    let mut cap = FrameCapture {
        frame: world.frame,
        drone: drone.id,
        timestamp: world.time,
        corners: Vec::new(),
        pedestrians: Vec::new(),
        features: FeatureSet { dim: cfg.descriptor_dim, ..Default::default() },
    };
    let mut truth = CaptureTruth::default();

    for (id, x) in &scene.boards {
        if let Some(uv) = visible_pixel(&p, &k, &center, x, &scene.obstacles) {
            if let Some(uv) = noisy(uv, rng) {
                cap.corners.push(CornerObservation { corner_id: *id, world: *x, pixel: uv });
            }
        }
    }

    for ped in &world.pedestrians {
        let foot3 = Vector3::new(ped.position.x, ped.position.y, 0.0);
        let seen = visible_pixel(&p, &k, &center, &foot3, &scene.obstacles);
        let bbox = seen.map(|uv| {
            pedestrian_bbox(&p, &k, &ped.position, cfg.pedestrian_radius, cfg.pedestrian_height).unwrap_or([uv.x, uv.y, uv.x, uv.y])
        });
        truth.visibility.push(VisibilityRecord {
            frame: world.frame,
            drone: drone.id,
            pedestrian: ped.id,
            flag: seen.is_some() as u8,
            bbox,
        });
        if let (Some(uv), Some(bb)) = (seen, bbox) {
            if let Some(foot) = noisy(uv, rng) {
                cap.pedestrians.push(PedestrianObservation { foot, bbox: bb });
                truth.pedestrian_ids.push(ped.id);
            }
        }
    }

    let desc_sigma = cfg.descriptor_noise_sigma;
    let desc_noise = Normal::new(0.0, desc_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut desc = vec![0.0; cfg.descriptor_dim];
    for lm in &scene.landmarks {
        let Some(uv) = visible_pixel(&p, &k, &center, &lm.position, &scene.obstacles) else { continue };
        let Some(uv) = noisy(uv, rng) else { continue };
        if desc_sigma > 0.0 {
            for (d, base) in desc.iter_mut().zip(&lm.descriptor) {
                *d = base + desc_noise.sample(rng);
            }
            let n = desc.iter().map(|x| x * x).sum::<f64>().sqrt();
            desc.iter_mut().for_each(|x| *x /= n);
        } else {
            desc.copy_from_slice(&lm.descriptor);
        }
        cap.features.push(uv, &desc);
        truth.landmark_ids.push(lm.id);
    }
    (cap, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::world::Pedestrian;

    fn quiet(cfg: ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig { pixel_noise_sigma: 0.0, descriptor_noise_sigma: 0.0, ..cfg }
    }

    #[test]
    fn zero_noise_pixels_equal_projection() {
        let cfg = quiet(ScenarioConfig::simple());
        let scene = Scene::new(&cfg);
        let world = WorldState::new(&cfg);
        let k = cfg.intrinsics();
        for d in &world.drones {
            let (cap, truth) = capture_frame(&cfg, &scene, &world, d, &mut capture_rng(1, 0, d.id));
            let p = d.camera(&k);
            for c in &cap.corners {
                assert_eq!(c.pixel, project_point(&p, &c.world).unwrap());
            }
            for (obs, id) in cap.pedestrians.iter().zip(&truth.pedestrian_ids) {
                let ped = &world.pedestrians[*id as usize];
                assert_eq!(obs.foot, project_point(&p, &Vector3::new(ped.position.x, ped.position.y, 0.0)).unwrap());
            }
            for (kp, id) in cap.features.keypoints.iter().zip(&truth.landmark_ids) {
                assert_eq!(*kp, project_point(&p, &scene.landmarks[*id as usize].position).unwrap());
            }
        }
    }

    #[test]
    fn observations_are_in_image_and_visible() {
        let cfg = ScenarioConfig::complex();
        let scene = Scene::new(&cfg);
        let mut world = WorldState::new(&cfg);
        let k = cfg.intrinsics();
        for _ in 0..5 {
            for d in &world.drones {
                let (cap, truth) = capture_frame(&cfg, &scene, &world, d, &mut capture_rng(3, world.frame, d.id));
                assert!(cap.corners.iter().all(|c| k.contains(&c.pixel)));
                assert!(cap.pedestrians.iter().all(|o| k.contains(&o.foot)));
                assert!(cap.features.keypoints.iter().all(|p| k.contains(p)));
                for id in &truth.pedestrian_ids {
                    let rec = truth.visibility.iter().find(|r| r.pedestrian == *id).unwrap();
                    assert_eq!(rec.flag, 1);
                }
                assert_eq!(truth.visibility.len(), cfg.pedestrian_count);
            }
            world.step(&cfg, cfg.capture_interval);
        }
    }

    #[test]
    fn fully_visible_board_yields_all_corners() {
        let mut cfg = quiet(ScenarioConfig::simple());
        cfg.checkerboards.truncate(1);
        cfg.checkerboards[0].center = [0.0, 0.0, 0.0];
        let scene = Scene::new(&cfg);
        let world = WorldState::new(&cfg);
        let (cap, _) = capture_frame(&cfg, &scene, &world, &world.drones[0], &mut capture_rng(0, 0, 0));
        assert_eq!(cap.corners.len(), 35);
    }

    #[test]
    fn occluded_pedestrian_is_absent_for_blocked_drone_only() {
        let mut cfg = quiet(ScenarioConfig::complex());
        cfg.pedestrian_count = 1;
        let scene = Scene::new(&cfg);
        let mut world = WorldState::new(&cfg);
        // Stand right behind the column as seen from drone 0.
        let home = world.drones[0].position;
        let dir = -home.xy().normalize();
        world.pedestrians[0] = Pedestrian { id: 0, position: dir * 4.0, speed: 1.0, waypoint: dir * 4.0 };
        let foot = Vector3::new(dir.x * 4.0, dir.y * 4.0, 0.0);
        let obstacles = cfg.obstacles();
        let mut seen_by_someone = false;
        for d in &world.drones {
            let (cap, truth) = capture_frame(&cfg, &scene, &world, d, &mut capture_rng(0, 0, d.id));
            let los = line_of_sight(&d.position, &foot, &obstacles);
            let uv = project_point(&d.camera(&cfg.intrinsics()), &foot).ok();
            let in_image = uv.is_some_and(|uv| cfg.intrinsics().contains(&uv));
            assert_eq!(truth.visibility[0].flag == 1, los && in_image, "drone {}", d.id);
            assert_eq!(cap.pedestrians.len(), truth.visibility[0].flag as usize);
            if d.id == 0 {
                assert!(!los);
                assert!(cap.pedestrians.is_empty());
            }
            seen_by_someone |= truth.visibility[0].flag == 1;
        }
        assert!(seen_by_someone);
    }
}
