//! Bird's-eye multi-object tracker: constant-velocity prediction, gated
//! optimal association, and a tentative/confirmed/dead track lifecycle.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::simworld::PositionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    /// Association gate, meters.
    pub gate: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    /// Weight of the previous velocity in the velocity update.
    pub beta: f64,
    /// Emit confirmed tracks on frames where they coast without a detection.
    pub emit_coasting: bool,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self { gate: 1.5, confirm_hits: 2, max_misses: 4, beta: 0.7, emit_coasting: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Frames at which the track was matched, with the matched position.
    pub history: Vec<(usize, Vector2<f64>)>,
    pub misses: u32,
    pub hits: u32,
    pub status: TrackStatus,
}

impl Track {
    fn spawn(id: u32, frame: usize, at: Vector2<f64>) -> Self {
        Self {
            id,
            position: at,
            velocity: Vector2::zeros(),
            history: vec![(frame, at)],
            misses: 0,
            hits: 1,
            status: TrackStatus::Tentative,
        }
    }
}

/// Advances every track by `velocity·dt`.
pub fn predict(tracks: &mut [Track], dt: f64) {
    for t in tracks {
        t.position += t.velocity * dt;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// `(track index, detection index)`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-total-distance one-to-one matching restricted to pairs within
/// `gate` meters; among gate-feasible matchings the largest is chosen first.
pub fn associate(predicted: &[Vector2<f64>], detections: &[Vector2<f64>], gate: f64) -> Association {
    let costs = CostMatrix::from_fn(predicted.len(), detections.len(), |r, c| {
        let d = (predicted[r] - detections[c]).norm();
        if d <= gate {
            d
        } else {
            f64::INFINITY
        }
    });
    let a = solve(&costs);
    Association {
        pairs: a.pairs().collect(),
        unmatched_tracks: (0..predicted.len()).filter(|&r| a.row_to_col[r].is_none()).collect(),
        unmatched_detections: (0..detections.len()).filter(|&c| a.col_to_row[c].is_none()).collect(),
        total_cost: a.total_cost,
    }
}

/// Applies one association result. Dead tracks are removed from `tracks`
/// and returned. `next_id` is the id for the next spawned track.
pub fn update_tracks(
    tracks: &mut Vec<Track>,
    detections: &[Vector2<f64>],
    assoc: &Association,
    frame: usize,
    dt: f64,
    params: &TrackParams,
    next_id: &mut u32,
) -> Vec<Track> {
    for &(ti, di) in &assoc.pairs {
        let t = &mut tracks[ti];
        let z = detections[di];
        let (last_frame, last_pos) = *t.history.last().expect("tracks carry history");
        let elapsed = (frame - last_frame) as f64 * dt;
        let raw = (z - last_pos) / elapsed;
        t.velocity = if t.hits == 1 { raw } else { params.beta * t.velocity + (1.0 - params.beta) * raw };
        t.position = z;
        t.history.push((frame, z));
        t.misses = 0;
        t.hits += 1;
        if t.status == TrackStatus::Tentative && t.hits >= params.confirm_hits {
            t.status = TrackStatus::Confirmed;
        }
    }
    for &ti in &assoc.unmatched_tracks {
        let t = &mut tracks[ti];
        t.misses += 1;
        if t.misses > params.max_misses {
            t.status = TrackStatus::Dead;
        }
    }
    let (alive, dead): (Vec<_>, Vec<_>) = std::mem::take(tracks).into_iter().partition(|t| t.status != TrackStatus::Dead);
    *tracks = alive;
    for &di in &assoc.unmatched_detections {
        let mut t = Track::spawn(*next_id, frame, detections[di]);
        *next_id += 1;
        if t.hits >= params.confirm_hits {
            t.status = TrackStatus::Confirmed;
        }
        tracks.push(t);
    }
    dead
}

/// Stateful wrapper around predict → associate → update.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackParams,
    pub dt: f64,
    pub tracks: Vec<Track>,
    next_id: u32,
    last_frame: Option<usize>,
}

impl Tracker {
    pub fn new(params: TrackParams, dt: f64) -> Self {
        Self { params, dt, tracks: Vec::new(), next_id: 0, last_frame: None }
    }

    /// Processes one frame and returns the confirmed track positions to
    /// report for it. Frames must be strictly increasing.
    pub fn step(&mut self, frame: usize, detections: &[Vector2<f64>]) -> Vec<PositionRecord> {
        if let Some(last) = self.last_frame {
            assert!(frame > last, "frames must be strictly increasing");
            predict(&mut self.tracks, self.dt * (frame - last) as f64);
        }
        self.last_frame = Some(frame);
        let predicted: Vec<_> = self.tracks.iter().map(|t| t.position).collect();
        let assoc = associate(&predicted, detections, self.params.gate);
        update_tracks(&mut self.tracks, detections, &assoc, frame, self.dt, &self.params, &mut self.next_id);
        let mut out: Vec<_> = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && (t.misses == 0 || self.params.emit_coasting))
            .map(|t| PositionRecord { frame, id: t.id, x: t.position.x, y: t.position.y })
            .collect();
        out.sort_by_key(|r| r.id);
        out
    }
}

/// Runs the tracker over per-frame detections (`frames[k] = (frame index,
/// detections)`), returning all reported positions in frame order.
pub fn run_tracker(frames: &[(usize, Vec<Vector2<f64>>)], params: &TrackParams, dt: f64) -> Vec<PositionRecord> {
    let mut tracker = Tracker::new(*params, dt);
    frames.iter().flat_map(|(f, dets)| tracker.step(*f, dets)).collect()
}
