use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::geometry::CameraIntrinsics;
use crate::simworld::control::PidGains;
use crate::simworld::los::Aabb;

/// Per-drone flight box. Each drone patrols `home ± xy_half_extent` in x/y
/// and `[z_min, z_max]` in altitude. Homes sit evenly on a circle of
/// `ring_radius` around the arena center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Airspace {
    pub xy_half_extent: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub ring_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub hfov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraSpec {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::from_hfov(self.hfov_deg, self.width, self.height)
    }
}

/// A planar board lying on the ground. `rows × cols` inner corners centered on
/// `center`, rotated by `yaw` about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkerboard {
    pub center: [f64; 3],
    pub yaw: f64,
    pub rows: usize,
    pub cols: usize,
    pub square_size: f64,
}

impl Checkerboard {
    pub fn corner_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Inner-corner world coordinates, row-major.
    pub fn corners(&self) -> Vec<Vector3<f64>> {
        let (s, c) = self.yaw.sin_cos();
        let mut out = Vec::with_capacity(self.corner_count());
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = (k as f64 - (self.cols as f64 - 1.0) / 2.0) * self.square_size;
                let b = (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.square_size;
                out.push(Vector3::new(self.center[0] + c * a - s * b, self.center[1] + s * a + c * b, self.center[2]));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Arena is `[-h, h]²` on the ground plane.
    pub arena_half_extent: f64,
    pub pedestrian_count: usize,
    /// Uniform per-agent walking speed range, m/s.
    pub pedestrian_speed: [f64; 2],
    /// Body radius and height used for 2D boxes and obstruction clearance.
    pub pedestrian_radius: f64,
    pub pedestrian_height: f64,
    pub obstruction: Option<Aabb>,
    pub drone_count: usize,
    pub capture_interval: f64,
    pub frame_count: usize,
    pub airspace: Airspace,
    pub v_max: f64,
    pub pid_gains: PidGains,
    pub pid_integral_limit: f64,
    pub camera: CameraSpec,
    pub pixel_noise_sigma: f64,
    pub landmark_count: usize,
    pub descriptor_dim: usize,
    pub descriptor_noise_sigma: f64,
    pub checkerboards: Vec<Checkerboard>,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::simple()
    }
}

fn corner_boards(offset: f64) -> Vec<Checkerboard> {
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .enumerate()
        .map(|(i, (sx, sy))| Checkerboard {
            center: [sx * offset, sy * offset, 0.0],
            yaw: i as f64 * std::f64::consts::FRAC_PI_2,
            rows: 5,
            cols: 7,
            square_size: 0.5,
        })
        .collect()
}

impl ScenarioConfig {
    /// Open 15 × 15 m arena, 10 pedestrians, 8 drones.
    pub fn simple() -> Self {
        Self {
            name: "simple".into(),
            arena_half_extent: 7.5,
            pedestrian_count: 10,
            pedestrian_speed: [0.8, 1.6],
            pedestrian_radius: 0.3,
            pedestrian_height: 1.7,
            obstruction: None,
            drone_count: 8,
            capture_interval: 0.5,
            frame_count: 1000,
            airspace: Airspace { xy_half_extent: 3.0, z_min: 7.0, z_max: 8.0, ring_radius: 11.0 },
            v_max: 1.5,
            pid_gains: PidGains::default(),
            pid_integral_limit: 1e4,
            camera: CameraSpec { hfov_deg: 70.0, width: 1920, height: 1080 },
            pixel_noise_sigma: 0.5,
            landmark_count: 400,
            descriptor_dim: 32,
            descriptor_noise_sigma: 0.05,
            checkerboards: corner_boards(5.0),
            rng_seed: 7,
        }
    }

    /// 30 × 30 m arena, 40 pedestrians, a central column.
    pub fn complex() -> Self {
        Self {
            name: "complex".into(),
            arena_half_extent: 15.0,
            pedestrian_count: 40,
            obstruction: Some(Aabb::new(Vector3::new(-2.5, -2.5, 0.0), Vector3::new(2.5, 2.5, 8.0))),
            airspace: Airspace { xy_half_extent: 3.0, z_min: 7.0, z_max: 8.0, ring_radius: 20.0 },
            checkerboards: corner_boards(11.0),
            ..Self::simple()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "simple" => Some(Self::simple()),
            "complex" => Some(Self::complex()),
            _ => None,
        }
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        self.camera.intrinsics()
    }

    pub fn drone_home(&self, drone: usize) -> Vector3<f64> {
        let angle = std::f64::consts::TAU * drone as f64 / self.drone_count as f64 + std::f64::consts::FRAC_PI_8;
        Vector3::new(
            self.airspace.ring_radius * angle.cos(),
            self.airspace.ring_radius * angle.sin(),
            0.5 * (self.airspace.z_min + self.airspace.z_max),
        )
    }

    pub fn in_airspace(&self, drone: usize, p: &Vector3<f64>) -> bool {
        let home = self.drone_home(drone);
        let a = &self.airspace;
        let tol = 1e-9;
        (p.x - home.x).abs() <= a.xy_half_extent + tol
            && (p.y - home.y).abs() <= a.xy_half_extent + tol
            && p.z >= a.z_min - tol
            && p.z <= a.z_max + tol
    }

    pub fn in_arena(&self, p: &Vector2<f64>) -> bool {
        p.x.abs() <= self.arena_half_extent && p.y.abs() <= self.arena_half_extent
    }

    pub fn obstacles(&self) -> Vec<Aabb> {
        self.obstruction.iter().copied().collect()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: &str| Err(DataError::Config(m.to_string()));
        if !(self.capture_interval > 0.0) {
            return fail("capture_interval must be > 0");
        }
        if self.frame_count < 2 {
            return fail("frame_count must be >= 2");
        }
        if self.drone_count < 1 {
            return fail("drone_count must be >= 1");
        }
        if !(self.arena_half_extent > 0.0) {
            return fail("arena_half_extent must be > 0");
        }
        if !(self.airspace.z_min <= self.airspace.z_max) || !(self.airspace.z_min > 0.0) {
            return fail("airspace z range must be non-empty and above ground");
        }
        if !(self.airspace.xy_half_extent >= 0.0) {
            return fail("airspace xy_half_extent must be >= 0");
        }
        if !(self.v_max > 0.0) {
            return fail("v_max must be > 0");
        }
        let [lo, hi] = self.pedestrian_speed;
        if !(lo > 0.0 && lo <= hi) {
            return fail("pedestrian_speed must be an increasing positive range");
        }
        if !(self.pixel_noise_sigma >= 0.0) || !(self.descriptor_noise_sigma >= 0.0) {
            return fail("noise sigmas must be >= 0");
        }
        if self.descriptor_dim == 0 {
            return fail("descriptor_dim must be >= 1");
        }
        if CameraIntrinsics::from_hfov(self.camera.hfov_deg, self.camera.width, self.camera.height).validate().is_err()
            || !(self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 180.0)
        {
            return fail("camera spec is invalid");
        }
        if let Some(b) = &self.obstruction {
            let h = self.arena_half_extent;
            if b.min.x < -h || b.min.y < -h || b.max.x > h || b.max.y > h || !b.is_valid() {
                return fail("obstruction must be a valid box inside the arena");
            }
            // leave room to walk around it
            if (b.max.x - b.min.x) >= 2.0 * h - 2.0 * self.pedestrian_radius
                || (b.max.y - b.min.y) >= 2.0 * h - 2.0 * self.pedestrian_radius
            {
                return fail("obstruction leaves no walkable space");
            }
        }
        for cb in &self.checkerboards {
            if cb.rows == 0 || cb.cols == 0 || !(cb.square_size > 0.0) {
                return fail("checkerboards need rows, cols >= 1 and square_size > 0");
            }
        }
        Ok(())
    }
}
