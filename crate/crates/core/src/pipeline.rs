//! End-to-end run over a dataset: calibrate, register, lift and fuse,
//! detect, track, score. Camera dropout removes whole views before
//! calibration.

use std::path::Path;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{calibrate_frame, CalibrationResult};
use crate::error::{DataError, Error, Result};
use crate::evalmetrics::{aggregate_seeds, score_seed, MetricsReport, SeedReport};
use crate::fuse::{
    detect_peaks, fuse_views, splat_view, temporal_smooth, write_detections, write_pgm, BevDetection, FuseParams, OccupancyMap,
};
use crate::geometry::{ground_homography, GroundHomography, Homography, WorldGrid};
use crate::io::{write_json, write_jsonl};
use crate::register::{register_view, RegisterParams, RegistrationRecord, RegistrationResult};
use crate::simworld::{dataset::calib_path, CalibRecord, Dataset, FrameCapture, PositionRecord};
use crate::track::{TrackParams, Tracker};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    #[default]
    PerFrame,
    PerSequence,
}

impl std::str::FromStr for DropoutMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per_frame" => Ok(Self::PerFrame),
            "per_sequence" => Ok(Self::PerSequence),
            other => Err(format!("unknown dropout mode {other:?} (expected per_frame or per_sequence)")),
        }
    }
}

/// Which earlier capture each view is registered against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The drone's first calibrated frame, never updated.
    #[default]
    First,
    /// The drone's previous usable frame.
    Previous,
}

/// How foot pixels are lifted onto the ground.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    /// Through the current frame's calibrated ground homography.
    #[default]
    Calibrated,
    /// Into the reference view with the registration homography, then
    /// through the reference frame's calibrated ground homography.
    Registered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub register: RegisterParams,
    pub fuse: FuseParams,
    pub track: TrackParams,
    /// Ground-plane match radius for scoring, meters.
    pub match_radius: f64,
    /// Registrations below this confidence exclude the view.
    pub min_confidence: f64,
    pub reference: ReferenceMode,
    pub lift: LiftMode,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            register: RegisterParams::default(),
            fuse: FuseParams::default(),
            track: TrackParams::default(),
            match_radius: 0.5,
            min_confidence: 0.5,
            reference: ReferenceMode::First,
            lift: LiftMode::Calibrated,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> std::result::Result<(), DataError> {
        let f = &self.fuse;
        let checks = [
            (self.register.ratio > 0.0 && self.register.ratio < 1.0, "register.ratio must lie in (0, 1)"),
            (self.register.iterations > 0, "register.iterations must be positive"),
            (self.register.inlier_threshold > 0.0, "register.inlier_threshold must be positive"),
            (f.sigma > 0.0 && f.cell_size > 0.0, "fuse.sigma and fuse.cell_size must be positive"),
            (f.threshold > 0.0 && f.threshold <= 1.0, "fuse.threshold must lie in (0, 1]"),
            (f.nms_radius > 0.0, "fuse.nms_radius must be positive"),
            ((0.0..=1.0).contains(&f.alpha), "fuse.alpha must lie in [0, 1]"),
            (self.track.gate > 0.0, "track.gate must be positive"),
            ((0.0..=1.0).contains(&self.track.beta), "track.beta must lie in [0, 1]"),
            (self.match_radius > 0.0, "match_radius must be positive"),
            ((0.0..=1.0).contains(&self.min_confidence), "min_confidence must lie in [0, 1]"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(DataError::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Probability that a camera is removed, in `[0, 1)`.
    pub dropout: f64,
    pub dropout_mode: DropoutMode,
    pub params: PipelineParams,
}

impl RunConfig {
    pub fn validate(&self) -> std::result::Result<(), DataError> {
        if self.seeds.is_empty() {
            return Err(DataError::Config("seed list is empty".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(DataError::Config(format!("dropout rate {} is outside [0, 1)", self.dropout)));
        }
        self.params.validate()
    }
}

/// SplitMix64 finalizer over a combination of the inputs.
pub fn derive_seed(seed: u64, frame: usize, drone: usize) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((frame as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((drone as u64 + 1).wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-frame, per-drone activity mask.
pub fn dropout_mask(seed: u64, frames: usize, drones: usize, rate: f64, mode: DropoutMode) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<bool> { (0..drones).map(|_| !(rate > 0.0 && rng.random_bool(rate))).collect() };
    match mode {
        DropoutMode::PerFrame => (0..frames).map(|_| draw(&mut rng)).collect(),
        DropoutMode::PerSequence => {
            let once = draw(&mut rng);
            vec![once; frames]
        }
    }
}

/// Everything one drone contributed in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewOutcome {
    pub active: bool,
    pub calibration: Option<CalibrationResult>,
    pub registration: Option<RegistrationResult>,
    pub usable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame: usize,
    pub views: Vec<ViewOutcome>,
    pub detections: Vec<BevDetection>,
    /// Smoothed map; `None` when no view was usable.
    pub map: Option<OccupancyMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutput {
    pub seed: u64,
    pub frames: Vec<FrameOutcome>,
    pub tracks: Vec<PositionRecord>,
    pub report: SeedReport,
}

impl SequenceOutput {
    pub fn detections_as_records(&self) -> Vec<PositionRecord> {
        self.frames
            .iter()
            .flat_map(|f| f.detections.iter().enumerate().map(|(k, d)| PositionRecord { frame: d.frame, id: k as u32, x: d.x, y: d.y }))
            .collect()
    }

    pub fn usable_view_fraction(&self) -> f64 {
        let (u, n) = self.frames.iter().flat_map(|f| &f.views).fold((0, 0), |(u, n), v| (u + v.usable as usize, n + 1));
        u as f64 / n.max(1) as f64
    }
}

pub fn grid_for(ds: &Dataset, params: &PipelineParams) -> std::result::Result<WorldGrid, DataError> {
    WorldGrid::covering(ds.config.arena_half_extent, params.fuse.cell_size).map_err(|e| DataError::Config(e.to_string()))
}

struct Reference<'a> {
    capture: &'a FrameCapture,
    ground: GroundHomography,
}

fn view_homography(lift: LiftMode, calib: &CalibrationResult, reg: &RegistrationResult, reference: &Reference) -> Option<GroundHomography> {
    match lift {
        LiftMode::Calibrated => ground_homography(&calib.projection).ok(),
        LiftMode::Registered => {
            let inv: Homography = reg.homography.inverse().ok()?;
            inv.compose(&reference.ground).ok()
        }
    }
}

/// Runs the full pipeline on one dataset for one seed.
pub fn run_sequence(ds: &Dataset, seed: u64, dropout: f64, mode: DropoutMode, params: &PipelineParams) -> Result<SequenceOutput> {
    let grid = grid_for(ds, params)?;
    let n_frames = ds.frame_count();
    let n_drones = ds.drone_count();
    let mask = dropout_mask(seed, n_frames, n_drones, dropout, mode);
    let intrinsics = vec![ds.intrinsics; n_drones];
    let mut previous: Vec<Option<CalibrationResult>> = vec![None; n_drones];
    let mut references: Vec<Option<Reference>> = (0..n_drones).map(|_| None).collect();
    let mut smoothed: Option<OccupancyMap> = None;
    let mut tracker = Tracker::new(params.track, ds.config.capture_interval);
    let mut frames = Vec::with_capacity(n_frames);
    let mut tracks = Vec::new();

    for f in 0..n_frames {
        let caps: Vec<Option<&FrameCapture>> = (0..n_drones).map(|d| mask[f][d].then(|| &ds.captures[f][d])).collect();
        let calibs = calibrate_frame(f, &caps, &intrinsics, &previous)?;
        let mut views = Vec::with_capacity(n_drones);
        let mut layers = Vec::new();
        for d in 0..n_drones {
            let (Some(cap), Some(calib)) = (caps[d], calibs[d]) else {
                views.push(ViewOutcome { active: caps[d].is_some(), calibration: None, registration: None, usable: false });
                continue;
            };
            previous[d] = Some(calib);
            if references[d].is_none() {
                let ground = ground_homography(&calib.projection).map_err(|e| Error::View {
                    frame: f,
                    drone: d,
                    source: Box::new(Error::Data(DataError::Config(e.to_string()))),
                })?;
                references[d] = Some(Reference { capture: cap, ground });
            }
            let reference = references[d].as_ref().expect("set above");
            let reg = register_view(cap, reference.capture, &params.register, derive_seed(seed, f, d)).ok();
            let h = reg
                .as_ref()
                .filter(|r| r.confidence >= params.min_confidence)
                .and_then(|r| view_homography(params.lift, &calib, r, reference));
            let usable = h.is_some();
            if let Some(h) = h {
                let feet: Vec<Vector2<f64>> = cap.pedestrians.iter().map(|p| p.foot).collect();
                layers.push(splat_view(&feet, &h, &ds.intrinsics, &grid, params.fuse.sigma));
            }
            if params.reference == ReferenceMode::Previous && usable {
                references[d] = Some(Reference { capture: cap, ground: ground_homography(&calib.projection).expect("usable view") });
            }
            views.push(ViewOutcome { active: true, calibration: Some(calib), registration: reg, usable });
        }
        let (map, detections) = match fuse_views(&layers) {
            Ok(current) => {
                let s = temporal_smooth(&current, smoothed.as_ref(), params.fuse.alpha).expect("grids agree");
                let dets = detect_peaks(&s, f, params.fuse.threshold, params.fuse.nms_radius);
                smoothed = Some(s.clone());
                (Some(s), dets)
            }
            Err(_) => (None, Vec::new()),
        };
        let points: Vec<Vector2<f64>> = detections.iter().map(|d| d.position()).collect();
        tracks.extend(tracker.step(f, &points));
        frames.push(FrameOutcome { frame: f, views, detections, map });
    }

    let gt: Vec<PositionRecord> = ds.positions.iter().flatten().copied().collect();
    let mut out = SequenceOutput { seed, frames, tracks, report: dummy_report(seed) };
    out.report = score_seed(seed, &gt, &out.detections_as_records(), &out.tracks, params.match_radius)?;
    Ok(out)
}

fn dummy_report(seed: u64) -> SeedReport {
    SeedReport { seed, scores: Default::default(), detection_totals: Default::default(), totals: Default::default() }
}

/// Runs every seed of `cfg` on the same dataset and aggregates the scores.
pub fn run_seeds(ds: &Dataset, cfg: &RunConfig) -> Result<(Vec<SequenceOutput>, MetricsReport)> {
    cfg.validate()?;
    let outs: Vec<SequenceOutput> =
        cfg.seeds.par_iter().map(|&s| run_sequence(ds, s, cfg.dropout, cfg.dropout_mode, &cfg.params)).collect::<Result<_>>()?;
    let report = aggregate_seeds(outs.iter().map(|o| o.report).collect());
    Ok((outs, report))
}

/// Writes per-view calibration and registration records, per-frame
/// detections, the track file and (optionally) heatmap rasters.
pub fn write_sequence(
    dir: &Path,
    out: &SequenceOutput,
    ds: &Dataset,
    params: &PipelineParams,
    heatmaps: bool,
) -> std::result::Result<(), DataError> {
    let grid = grid_for(ds, params)?;
    for fr in &out.frames {
        for (d, v) in fr.views.iter().enumerate() {
            if let Some(c) = &v.calibration {
                let mut rec = CalibRecord::new(&ds.intrinsics, &c.pose);
                rec.rms = Some(crate::io::sig9(c.rms));
                rec.held_over = Some(c.held_over);
                rec.correspondences = Some(c.correspondences);
                write_json(&calib_path(dir, "calib_est", fr.frame, d), &rec)?;
            }
            if let Some(r) = &v.registration {
                write_json(&calib_path(dir, "reg", fr.frame, d), &RegistrationRecord::from(r))?;
            }
        }
        write_detections(&dir.join("det").join(format!("frame_{:04}.jsonl", fr.frame)), &fr.detections)?;
        if heatmaps {
            let map = fr.map.clone().unwrap_or_else(|| OccupancyMap::zeros(grid));
            write_pgm(&dir.join("heatmaps").join(format!("frame_{:04}.pgm", fr.frame)), &map)?;
        }
    }
    let tracks: Vec<PositionRecord> = out.tracks.iter().map(|t| t.rounded()).collect();
    write_jsonl(&dir.join("tracks").join("pred.jsonl"), &tracks)
}
