use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{CameraIntrinsics, CameraPose, ProjectionMatrix};
use crate::simworld::config::ScenarioConfig;
use crate::simworld::control::{pid_step, velocity_command, PidState};

/// Arrival radius for pedestrian waypoints and drone patrol targets, meters.
pub const ARRIVAL_RADIUS: f64 = 0.2;
const MAX_WAYPOINT_DRAWS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Pedestrian {
    pub id: u32,
    pub position: Vector2<f64>,
    pub speed: f64,
    pub waypoint: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub position: Vector3<f64>,
    pub target: Vector3<f64>,
    pub yaw: f64,
    pub pitch: f64,
    pub yaw_pid: PidState,
    pub pitch_pid: PidState,
}

impl DroneState {
    pub fn pose(&self) -> CameraPose {
        CameraPose::from_yaw_pitch(self.position, self.yaw, self.pitch)
    }

    pub fn camera(&self, k: &CameraIntrinsics) -> ProjectionMatrix {
        ProjectionMatrix::compose(k, &self.pose())
    }
}

/// Static textured ground points that stand in for image features.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: u32,
    pub position: Vector3<f64>,
    /// Unit-norm descriptor.
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub frame: usize,
    pub time: f64,
    pub pedestrians: Vec<Pedestrian>,
    pub drones: Vec<DroneState>,
    rng: ChaCha8Rng,
}

/// Yaw and downward pitch that point a camera at `center` from `at`.
pub fn look_at_angles(at: &Vector3<f64>, center: &Vector3<f64>) -> (f64, f64) {
    let d = center - at;
    let yaw = d.y.atan2(d.x);
    let pitch = (-d.z).atan2(d.xy().norm());
    (yaw, pitch)
}

fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    r
}

/// Landmark field drawn once per scenario seed, on its own RNG stream so it
/// does not depend on the pedestrian or drone draws.
pub fn make_landmarks(cfg: &ScenarioConfig) -> Vec<Landmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(1);
    let h = cfg.arena_half_extent;
    let mut out = Vec::with_capacity(cfg.landmark_count);
    while out.len() < cfg.landmark_count {
        let p = Vector3::new(rng.random_range(-h..h), rng.random_range(-h..h), 0.0);
        let descriptor = random_unit(&mut rng, cfg.descriptor_dim);
        if cfg.obstruction.is_some_and(|b| b.footprint_contains(p.x, p.y, 0.0)) {
            continue;
        }
        out.push(Landmark { id: out.len() as u32, position: p, descriptor });
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl WorldState {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let h = cfg.arena_half_extent;
        let margin = cfg.pedestrian_radius;
        let mut pedestrians = Vec::with_capacity(cfg.pedestrian_count);
        for id in 0..cfg.pedestrian_count {
            let position = loop {
                let p = Vector2::new(rng.random_range(-h..h), rng.random_range(-h..h));
                if !cfg.obstruction.is_some_and(|b| b.footprint_contains(p.x, p.y, margin)) {
                    break p;
                }
            };
            let speed = rng.random_range(cfg.pedestrian_speed[0]..=cfg.pedestrian_speed[1]);
            let waypoint = draw_waypoint(cfg, &mut rng, &position);
            pedestrians.push(Pedestrian { id: id as u32, position, speed, waypoint });
        }
        let center = Vector3::zeros();
        let mut drones = Vec::with_capacity(cfg.drone_count);
        for id in 0..cfg.drone_count {
            let position = cfg.drone_home(id);
            let target = draw_target(cfg, &mut rng, id);
            let (yaw, pitch) = look_at_angles(&position, &center);
            drones.push(DroneState { id, position, target, yaw, pitch, yaw_pid: PidState::default(), pitch_pid: PidState::default() });
        }
        Self { frame: 0, time: 0.0, pedestrians, drones, rng }
    }

    /// Advances every agent by `dt` seconds.
    pub fn step(&mut self, cfg: &ScenarioConfig, dt: f64) {
        debug_assert!(dt > 0.0);
        for i in 0..self.pedestrians.len() {
            let mut p = self.pedestrians[i].clone();
            step_pedestrian(cfg, &mut self.rng, &mut p, dt);
            self.pedestrians[i] = p;
        }
        let k = cfg.intrinsics();
        let center = Vector3::zeros();
        for d in &mut self.drones {
            if (d.target - d.position).norm() <= ARRIVAL_RADIUS {
                d.target = draw_target(cfg, &mut self.rng, d.id);
            }
            let to_target = d.target - d.position;
            let v = velocity_command(&d.position, &d.target, cfg.v_max);
            if v.norm() * dt >= to_target.norm() {
                d.position = d.target;
            } else {
                d.position += v * dt;
            }

            // Gimbal: angular error to the scene center, expressed in image
            // pixels, drives one PID per axis; the output is an angle step.
            let (want_yaw, want_pitch) = look_at_angles(&d.position, &center);
            let e_yaw = k.fx * wrap_angle(want_yaw - d.yaw);
            let e_pitch = k.fy * (want_pitch - d.pitch);
            d.yaw = wrap_angle(d.yaw + pid_step(e_yaw, dt, &cfg.pid_gains, cfg.pid_integral_limit, &mut d.yaw_pid));
            d.pitch += pid_step(e_pitch, dt, &cfg.pid_gains, cfg.pid_integral_limit, &mut d.pitch_pid);
        }
        self.frame += 1;
        self.time += dt;
    }
}

fn draw_target(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, drone: usize) -> Vector3<f64> {
    let home = cfg.drone_home(drone);
    let a = &cfg.airspace;
    let dx = if a.xy_half_extent > 0.0 { rng.random_range(-a.xy_half_extent..=a.xy_half_extent) } else { 0.0 };
    let dy = if a.xy_half_extent > 0.0 { rng.random_range(-a.xy_half_extent..=a.xy_half_extent) } else { 0.0 };
    let z = if a.z_max > a.z_min { rng.random_range(a.z_min..=a.z_max) } else { a.z_min };
    Vector3::new(home.x + dx, home.y + dy, z)
}

/// Uniform in-arena waypoint whose straight path from `from` clears the
/// obstruction footprint (padded by the body radius).
fn draw_waypoint(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, from: &Vector2<f64>) -> Vector2<f64> {
    let h = cfg.arena_half_extent;
    let margin = cfg.pedestrian_radius;
    let mut last = *from;
    for _ in 0..MAX_WAYPOINT_DRAWS {
        let w = Vector2::new(rng.random_range(-h..h), rng.random_range(-h..h));
        last = w;
        match &cfg.obstruction {
            None => return w,
            Some(b) => {
                if b.footprint_contains(w.x, w.y, margin) {
                    continue;
                }
                if footprint_entry(b, margin, from, &w).is_none() {
                    return w;
                }
            }
        }
    }
    // Every draw crossed the footprint; stepping clips the motion anyway.
    if cfg.obstruction.is_some_and(|b| b.footprint_contains(last.x, last.y, margin)) {
        *from
    } else {
        last
    }
}

/// Parameter in `[0, 1]` where the 2D segment `a → b` enters the padded
/// footprint, if it does.
fn footprint_entry(b: &crate::simworld::los::Aabb, margin: f64, a: &Vector2<f64>, c: &Vector2<f64>) -> Option<f64> {
    let lo = [b.min.x - margin, b.min.y - margin];
    let hi = [b.max.x + margin, b.max.y + margin];
    let d = c - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        if d[k] == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

fn step_pedestrian(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, p: &mut Pedestrian, dt: f64) {
    if (p.waypoint - p.position).norm() <= ARRIVAL_RADIUS {
        p.waypoint = draw_waypoint(cfg, rng, &p.position);
    }
    let to = p.waypoint - p.position;
    let dist = to.norm();
    let step = p.speed * dt;
    let next = if dist <= step { p.waypoint } else { p.position + to * (step / dist) };
    if let Some(b) = &cfg.obstruction {
        if let Some(t) = footprint_entry(b, cfg.pedestrian_radius, &p.position, &next) {
            // stop short of the padded footprint and pick another goal
            let back = (t - 1e-6).max(0.0);
            p.position += (next - p.position) * back;
            p.waypoint = draw_waypoint(cfg, rng, &p.position);
            return;
        }
    }
    p.position = next;
    let h = cfg.arena_half_extent;
    p.position.x = p.position.x.clamp(-h, h);
    p.position.y = p.position.y.clamp(-h, h);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pedestrian_walks_toward_waypoint() {
        let cfg = ScenarioConfig { pedestrian_count: 0, ..ScenarioConfig::simple() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Pedestrian { id: 0, position: Vector2::zeros(), speed: 1.0, waypoint: Vector2::new(1.0, 0.0) };
        step_pedestrian(&cfg, &mut rng, &mut p, 0.5);
        assert_eq!(p.position, Vector2::new(0.5, 0.0));
        // no overshoot
        step_pedestrian(&cfg, &mut rng, &mut p, 0.75);
        assert_eq!(p.position, Vector2::new(1.0, 0.0));
    }

    #[test]
    fn drone_at_target_redraws_deterministically() {
        let cfg = ScenarioConfig { pedestrian_count: 0, ..ScenarioConfig::simple() };
        let run = || {
            let mut w = WorldState::new(&cfg);
            w.drones[0].position = w.drones[0].target;
            let before = w.drones[0].target;
            w.step(&cfg, 0.5);
            assert_ne!(w.drones[0].target, before);
            w.drones[0].target
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn pedestrians_stay_in_arena_and_out_of_obstruction() {
        let cfg = ScenarioConfig::complex();
        let b = cfg.obstruction.unwrap();
        let mut w = WorldState::new(&cfg);
        for _ in 0..1000 {
            w.step(&cfg, cfg.capture_interval);
            for p in &w.pedestrians {
                assert!(cfg.in_arena(&p.position), "{:?}", p.position);
                assert!(!b.footprint_contains(p.position.x, p.position.y, 0.0), "{:?}", p.position);
            }
        }
    }

    #[test]
    fn drones_respect_envelope_and_speed() {
        let cfg = ScenarioConfig::simple();
        let mut w = WorldState::new(&cfg);
        let dt = cfg.capture_interval;
        for _ in 0..500 {
            let before: Vec<_> = w.drones.iter().map(|d| d.position).collect();
            w.step(&cfg, dt);
            for (d, b) in w.drones.iter().zip(&before) {
                assert!(cfg.in_airspace(d.id, &d.position));
                assert!((d.position - b).norm() <= cfg.v_max * dt + 1e-9);
            }
        }
    }

    #[test]
    fn gimbal_keeps_scene_center_in_view() {
        let cfg = ScenarioConfig::complex();
        let k = cfg.intrinsics();
        let mut w = WorldState::new(&cfg);
        for _ in 0..400 {
            w.step(&cfg, cfg.capture_interval);
            for d in &w.drones {
                let uv = crate::geometry::project_point(&d.camera(&k), &Vector3::zeros()).unwrap();
                assert!(k.contains(&uv), "drone {} center at {uv:?}", d.id);
            }
        }
    }

    #[test]
    fn landmarks_are_unit_and_seeded() {
        let cfg = ScenarioConfig::complex();
        let a = make_landmarks(&cfg);
        assert_eq!(a.len(), 400);
        assert!(a.iter().all(|l| (l.descriptor.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12));
        assert!(a.iter().all(|l| !cfg.obstruction.unwrap().footprint_contains(l.position.x, l.position.y, 0.0)));
        assert_eq!(a, make_landmarks(&cfg));
    }
}
