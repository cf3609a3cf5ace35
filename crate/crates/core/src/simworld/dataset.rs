//! In-memory dataset and its directory layout:
//!
//! ```text
//! scenario.json
//! calib/frame_<F>_drone_<D>.json    intrinsics + true pose
//! obs/frame_<F>_drone_<D>.jsonl     corner / pedestrian / landmark records
//! gt/positions.jsonl                frame, id, x, y
//! gt/visibility.jsonl               frame, drone, pedestrian, flag, bbox?
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::geometry::{CameraIntrinsics, CameraPose};
use crate::io::{read_json, read_jsonl, sig9, sig9_vec, write_json, write_jsonl};
use crate::simworld::capture::{
    capture_frame, capture_rng, CaptureTruth, CornerObservation, FeatureSet, FrameCapture, PedestrianObservation, Scene, VisibilityRecord,
};
use crate::simworld::config::ScenarioConfig;
use crate::simworld::world::WorldState;

/// A ground-plane position keyed by frame and identity. Ground truth and
/// tracker output share this record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionRecord {
    pub frame: usize,
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

impl PositionRecord {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rounded(self) -> Self {
        Self { x: sig9(self.x), y: sig9(self.y), ..self }
    }
}

/// Camera calibration file: intrinsics plus row-major pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub held_over: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correspondences: Option<usize>,
}

impl CalibRecord {
    pub fn new(k: &CameraIntrinsics, pose: &CameraPose) -> Self {
        let r = &pose.rotation;
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i * 3 + j] = sig9(r[(i, j)]);
            }
        }
        Self {
            fx: sig9(k.fx),
            fy: sig9(k.fy),
            cx: sig9(k.cx),
            cy: sig9(k.cy),
            width: k.width,
            height: k.height,
            rotation,
            translation: [sig9(pose.translation.x), sig9(pose.translation.y), sig9(pose.translation.z)],
            rms: None,
            held_over: None,
            correspondences: None,
        }
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics { fx: self.fx, fy: self.fy, cx: self.cx, cy: self.cy, width: self.width, height: self.height }
    }

    /// Pose as stored; rounding means it is orthonormal only to ~1e-9.
    pub fn pose(&self) -> CameraPose {
        CameraPose { rotation: Matrix3::from_row_slice(&self.rotation), translation: Vector3::from_row_slice(&self.translation) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationRecord {
    CheckerboardCorner { u: f64, v: f64, corner_id: u32, x: f64, y: f64, z: f64 },
    Pedestrian { u: f64, v: f64, bbox: [f64; 4] },
    Landmark { u: f64, v: f64, descriptor: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: ScenarioConfig,
    pub intrinsics: CameraIntrinsics,
    /// `captures[frame][drone]`.
    pub captures: Vec<Vec<FrameCapture>>,
    /// `true_poses[frame][drone]`, for evaluation only.
    pub true_poses: Vec<Vec<CameraPose>>,
    /// `positions[frame]`, ordered by pedestrian id.
    pub positions: Vec<Vec<PositionRecord>>,
    pub visibility: Vec<VisibilityRecord>,
    /// Simulator identities behind each capture; absent when loaded from disk.
    pub truth: Option<Vec<Vec<CaptureTruth>>>,
}

/// Runs the simulator for `config.frame_count` synchronized captures.
pub fn generate(config: &ScenarioConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let scene = Scene::new(config);
    let mut world = WorldState::new(config);
    let k = config.intrinsics();
    let n = config.frame_count;
    let mut captures = Vec::with_capacity(n);
    let mut true_poses = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut visibility = Vec::new();
    let mut truth = Vec::with_capacity(n);
    for frame in 0..n {
        let snapshot = &world;
        let per_drone: Vec<(FrameCapture, CaptureTruth)> = snapshot
            .drones
            .par_iter()
            .map(|d| capture_frame(config, &scene, snapshot, d, &mut capture_rng(config.rng_seed, frame, d.id)))
            .collect();
        true_poses.push(world.drones.iter().map(|d| d.pose()).collect());
        positions.push(world.pedestrians.iter().map(|p| PositionRecord { frame, id: p.id, x: p.position.x, y: p.position.y }).collect());
        let (caps, tr): (Vec<_>, Vec<_>) = per_drone.into_iter().unzip();
        for t in &tr {
            visibility.extend(t.visibility.iter().cloned());
        }
        captures.push(caps);
        truth.push(tr);
        world.step(config, config.capture_interval);
    }
    Ok(Dataset { config: config.clone(), intrinsics: k, captures, true_poses, positions, visibility, truth: Some(truth) })
}

/// Simulates and writes a dataset in one go.
pub fn generate_dataset(config: &ScenarioConfig, dir: &Path) -> Result<Dataset, DataError> {
    let ds = generate(config)?;
    ds.write(dir)?;
    Ok(ds)
}

pub fn calib_path(dir: &Path, sub: &str, frame: usize, drone: usize) -> PathBuf {
    dir.join(sub).join(format!("frame_{frame:04}_drone_{drone}.json"))
}

fn obs_path(dir: &Path, frame: usize, drone: usize) -> PathBuf {
    dir.join("obs").join(format!("frame_{frame:04}_drone_{drone}.jsonl"))
}

fn capture_records(cap: &FrameCapture) -> Vec<ObservationRecord> {
    let mut out = Vec::with_capacity(cap.corners.len() + cap.pedestrians.len() + cap.features.len());
    for c in &cap.corners {
        out.push(ObservationRecord::CheckerboardCorner {
            u: sig9(c.pixel.x),
            v: sig9(c.pixel.y),
            corner_id: c.corner_id,
            x: sig9(c.world.x),
            y: sig9(c.world.y),
            z: sig9(c.world.z),
        });
    }
    for p in &cap.pedestrians {
        out.push(ObservationRecord::Pedestrian { u: sig9(p.foot.x), v: sig9(p.foot.y), bbox: p.bbox.map(sig9) });
    }
    for i in 0..cap.features.len() {
        let kp = cap.features.keypoints[i];
        out.push(ObservationRecord::Landmark { u: sig9(kp.x), v: sig9(kp.y), descriptor: sig9_vec(cap.features.descriptor(i)) });
    }
    out
}

impl Dataset {
    pub fn frame_count(&self) -> usize {
        self.captures.len()
    }

    pub fn drone_count(&self) -> usize {
        self.config.drone_count
    }

    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        write_json(&dir.join("scenario.json"), &self.config)?;
        for (f, caps) in self.captures.iter().enumerate() {
            for (d, cap) in caps.iter().enumerate() {
                write_json(&calib_path(dir, "calib", f, d), &CalibRecord::new(&self.intrinsics, &self.true_poses[f][d]))?;
                write_jsonl(&obs_path(dir, f, d), &capture_records(cap))?;
            }
        }
        let pos: Vec<PositionRecord> = self.positions.iter().flatten().map(|p| p.rounded()).collect();
        write_jsonl(&dir.join("gt").join("positions.jsonl"), &pos)?;
        let vis: Vec<VisibilityRecord> =
            self.visibility.iter().map(|v| VisibilityRecord { bbox: v.bbox.map(|b| b.map(sig9)), ..v.clone() }).collect();
        write_jsonl(&dir.join("gt").join("visibility.jsonl"), &vis)?;
        Ok(())
    }

    /// Loads and schema-checks a dataset directory.
    pub fn read(dir: &Path) -> Result<Self, DataError> {
        let scen_path = dir.join("scenario.json");
        let config: ScenarioConfig = read_json(&scen_path)?;
        config.validate().map_err(|e| DataError::schema(&scen_path, 0, e.to_string()))?;
        let n = config.frame_count;
        let drones = config.drone_count;
        let mut captures = Vec::with_capacity(n);
        let mut true_poses = Vec::with_capacity(n);
        let mut intrinsics = None;
        for f in 0..n {
            let mut caps = Vec::with_capacity(drones);
            let mut poses = Vec::with_capacity(drones);
            for d in 0..drones {
                let cpath = calib_path(dir, "calib", f, d);
                let calib: CalibRecord = read_json(&cpath)?;
                let k = calib.intrinsics();
                k.validate().map_err(|e| DataError::schema(&cpath, 0, e.to_string()))?;
                intrinsics.get_or_insert(k);
                poses.push(calib.pose());
                let opath = obs_path(dir, f, d);
                let recs: Vec<ObservationRecord> = read_jsonl(&opath)?;
                caps.push(parse_capture(&config, &opath, f, d, recs)?);
            }
            captures.push(caps);
            true_poses.push(poses);
        }
        let ppath = dir.join("gt").join("positions.jsonl");
        let mut positions: Vec<Vec<PositionRecord>> = vec![Vec::new(); n];
        for (line, p) in read_jsonl::<PositionRecord>(&ppath)?.into_iter().enumerate() {
            if p.frame >= n {
                return Err(DataError::schema(&ppath, line + 1, format!("frame {} out of range", p.frame)));
            }
            positions[p.frame].push(p);
        }
        let vpath = dir.join("gt").join("visibility.jsonl");
        let visibility: Vec<VisibilityRecord> = read_jsonl(&vpath)?;
        for (line, v) in visibility.iter().enumerate() {
            if v.flag > 1 || v.frame >= n || v.drone >= drones || (v.flag == 1) != v.bbox.is_some() {
                return Err(DataError::schema(&vpath, line + 1, "inconsistent visibility record"));
            }
        }
        Ok(Self {
            intrinsics: intrinsics.unwrap_or_else(|| config.intrinsics()),
            config,
            captures,
            true_poses,
            positions,
            visibility,
            truth: None,
        })
    }
}

fn parse_capture(
    cfg: &ScenarioConfig,
    path: &Path,
    frame: usize,
    drone: usize,
    recs: Vec<ObservationRecord>,
) -> Result<FrameCapture, DataError> {
    let mut cap = FrameCapture {
        frame,
        drone,
        timestamp: frame as f64 * cfg.capture_interval,
        corners: Vec::new(),
        pedestrians: Vec::new(),
        features: FeatureSet { dim: cfg.descriptor_dim, ..Default::default() },
    };
    for (i, r) in recs.into_iter().enumerate() {
        match r {
            ObservationRecord::CheckerboardCorner { u, v, corner_id, x, y, z } => {
                cap.corners.push(CornerObservation { corner_id, world: Vector3::new(x, y, z), pixel: Vector2::new(u, v) })
            }
            ObservationRecord::Pedestrian { u, v, bbox } => cap.pedestrians.push(PedestrianObservation { foot: Vector2::new(u, v), bbox }),
            ObservationRecord::Landmark { u, v, descriptor } => {
                if descriptor.len() != cfg.descriptor_dim {
                    return Err(DataError::schema(
                        path,
                        i + 1,
                        format!("descriptor has {} entries, expected {}", descriptor.len(), cfg.descriptor_dim),
                    ));
                }
                cap.features.push(Vector2::new(u, v), &descriptor);
            }
        }
    }
    Ok(cap)
}
