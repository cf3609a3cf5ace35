//! Bird's-eye occupancy evidence: each view's foot points are lifted to the
//! ground and splatted as Gaussian bumps, views are averaged, maps are
//! blended over time, and peaks become detections.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, FuseError};
use crate::geometry::{image_to_ground, CameraIntrinsics, GroundHomography, WorldGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseParams {
    /// Splat kernel standard deviation, meters.
    pub sigma: f64,
    pub cell_size: f64,
    pub threshold: f64,
    pub nms_radius: f64,
    /// Weight of the current map in temporal blending.
    pub alpha: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self { sigma: 0.3, cell_size: 0.5, threshold: 0.25, nms_radius: 0.8, alpha: 0.8 }
    }
}

/// Evidence contributed by one view: per-cell values in `[0, 1]` and a mask
/// of the cells inside the view's image footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewLayer {
    pub grid: WorldGrid,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
    /// Observations that could not be lifted onto the grid.
    pub dropped: usize,
}

impl ViewLayer {
    pub fn empty(grid: WorldGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], observed: vec![false; grid.len()], dropped: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    pub grid: WorldGrid,
    pub scores: Vec<f64>,
    /// Number of usable views whose footprint contains each cell.
    pub coverage: Vec<u32>,
}

impl OccupancyMap {
    pub fn zeros(grid: WorldGrid) -> Self {
        Self { grid, scores: vec![0.0; grid.len()], coverage: vec![0; grid.len()] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.scores[self.grid.index(i, j)]
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BevDetection {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl BevDetection {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rounded(self) -> Self {
        use crate::io::sig9;
        Self { x: sig9(self.x), y: sig9(self.y), score: sig9(self.score), ..self }
    }
}

/// Cells whose center projects inside the image in front of the camera.
fn footprint(h: &GroundHomography, k: &CameraIntrinsics, grid: &WorldGrid) -> Vec<bool> {
    let m = h.matrix();
    // sign of the homogeneous scale for points in front of the camera,
    // taken from the principal ray's ground intersection
    let front = image_to_ground(h, &Vector2::new(k.cx, k.cy)).ok().map(|g| (m * Vector3::new(g.x, g.y, 1.0)).z.signum());
    let mut out = vec![false; grid.len()];
    let Some(front) = front else { return out };
    for i in 0..grid.height_cells {
        for j in 0..grid.width_cells {
            let c = grid.cell_center(i, j);
            let p = m * Vector3::new(c.x, c.y, 1.0);
            if p.z * front > 0.0 && k.contains(&Vector2::new(p.x / p.z, p.y / p.z)) {
                out[grid.index(i, j)] = true;
            }
        }
    }
    out
}

/// Adds one truncated Gaussian bump centred at `g`, scaled so its largest
/// cell equals `weight`, combining with existing values by maximum.
fn stamp(values: &mut [f64], grid: &WorldGrid, g: Vector2<f64>, sigma: f64, weight: f64) {
    let Some((ci, cj)) = grid.world_to_cell(g.x, g.y) else { return };
    let reach = 3.0 * sigma;
    let span = (reach / grid.cell_size).ceil() as isize + 1;
    let mut cells = Vec::new();
    let mut peak: f64 = 0.0;
    for di in -span..=span {
        for dj in -span..=span {
            let (i, j) = (ci as isize + di, cj as isize + dj);
            if i < 0 || j < 0 || i as usize >= grid.height_cells || j as usize >= grid.width_cells {
                continue;
            }
            let (i, j) = (i as usize, j as usize);
            let d2 = (grid.cell_center(i, j) - g).norm_squared();
            if d2 > reach * reach {
                continue;
            }
            let v = (-0.5 * d2 / (sigma * sigma)).exp();
            peak = peak.max(v);
            cells.push((grid.index(i, j), v));
        }
    }
    if peak <= 0.0 {
        return;
    }
    for (idx, v) in cells {
        let s = &mut values[idx];
        *s = s.max(weight * v / peak);
    }
}

/// Lifts each foot pixel through `H⁻¹` and splats a Gaussian of width
/// `sigma`, truncated at `3·sigma` and scaled so its largest cell value is 1.
/// Overlapping splats within the view combine by maximum.
pub fn splat_view(feet: &[Vector2<f64>], h: &GroundHomography, k: &CameraIntrinsics, grid: &WorldGrid, sigma: f64) -> ViewLayer {
    let mut layer = ViewLayer { observed: footprint(h, k, grid), ..ViewLayer::empty(*grid) };
    for foot in feet {
        match image_to_ground(h, foot) {
            Ok(g) if grid.contains(g.x, g.y) => stamp(&mut layer.values, grid, g, sigma, 1.0),
            _ => layer.dropped += 1,
        }
    }
    layer
}

/// Renders weighted ground points directly as a map with the same kernel as
/// [`splat_view`], every cell counted as covered once. Weights are clamped
/// to `[0, 1]` and points off the grid are skipped.
pub fn render_points(points: &[(Vector2<f64>, f64)], grid: &WorldGrid, sigma: f64) -> OccupancyMap {
    let mut map = OccupancyMap { coverage: vec![1; grid.len()], ..OccupancyMap::zeros(*grid) };
    for (p, w) in points {
        stamp(&mut map.scores, grid, *p, sigma, w.clamp(0.0, 1.0));
    }
    map
}

/// Per-cell mean of the view layers over the number of usable views,
/// zero where no view observes the cell.
pub fn fuse_views(layers: &[ViewLayer]) -> Result<OccupancyMap, FuseError> {
    let first = layers.first().ok_or(FuseError::NoUsableViews)?;
    let grid = first.grid;
    if layers.iter().any(|l| l.grid != grid) {
        return Err(FuseError::GridMismatch);
    }
    let n = layers.len() as f64;
    let mut map = OccupancyMap::zeros(grid);
    for c in 0..grid.len() {
        let mut sum = 0.0;
        let mut cover = 0;
        for l in layers {
            sum += l.values[c];
            cover += l.observed[c] as u32;
        }
        map.coverage[c] = cover;
        map.scores[c] = if cover == 0 { 0.0 } else { (sum / n).clamp(0.0, 1.0) };
    }
    Ok(map)
}

/// `α·current + (1 − α)·previous`; without history the current map passes
/// through unchanged.
pub fn temporal_smooth(current: &OccupancyMap, previous: Option<&OccupancyMap>, alpha: f64) -> Result<OccupancyMap, FuseError> {
    let Some(prev) = previous else { return Ok(current.clone()) };
    if prev.grid != current.grid {
        return Err(FuseError::GridMismatch);
    }
    let scores = current.scores.iter().zip(&prev.scores).map(|(c, p)| (alpha * c + (1.0 - alpha) * p).clamp(0.0, 1.0)).collect();
    Ok(OccupancyMap { grid: current.grid, scores, coverage: current.coverage.clone() })
}

/// Local maxima at or above `threshold`, accepted greedily by score with
/// suppression within `nms_radius`, each refined to the score-weighted
/// centroid of its 3×3 neighbourhood.
pub fn detect_peaks(map: &OccupancyMap, frame: usize, threshold: f64, nms_radius: f64) -> Vec<BevDetection> {
    let g = &map.grid;
    let (h, w) = (g.height_cells as isize, g.width_cells as isize);
    let at =
        |i: isize, j: isize| -> Option<f64> { (i >= 0 && j >= 0 && i < h && j < w).then(|| map.scores[g.index(i as usize, j as usize)]) };
    let mut peaks = Vec::new();
    for i in 0..h {
        for j in 0..w {
            let s = at(i, j).expect("in range");
            if s < threshold {
                continue;
            }
            let own = g.index(i as usize, j as usize);
            let is_max = (-1..=1).all(|di| {
                (-1..=1).all(|dj| {
                    if di == 0 && dj == 0 {
                        return true;
                    }
                    match at(i + di, j + dj) {
                        None => true,
                        // plateaus resolve to the lowest cell index
                        Some(n) => {
                            let other = g.index((i + di) as usize, (j + dj) as usize);
                            s > n || (s == n && own < other)
                        }
                    }
                })
            });
            if !is_max {
                continue;
            }
            let mut wsum = 0.0;
            let mut pos = Vector2::zeros();
            for di in -1..=1 {
                for dj in -1..=1 {
                    if let Some(v) = at(i + di, j + dj) {
                        wsum += v;
                        pos += v * g.cell_center((i + di) as usize, (j + dj) as usize);
                    }
                }
            }
            peaks.push((s, own, pos / wsum));
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<BevDetection> = Vec::new();
    for (s, _, p) in peaks {
        if out.iter().all(|d| (d.position() - p).norm() > nms_radius) {
            out.push(BevDetection { frame, x: p.x, y: p.y, score: s });
        }
    }
    out
}

/// Renders scores as a plain (ASCII) graymap, world `+y` up and `+x` right.
pub fn pgm_string(map: &OccupancyMap) -> String {
    let g = &map.grid;
    let mut s = format!("P2\n{} {}\n255\n", g.height_cells, g.width_cells);
    for j in (0..g.width_cells).rev() {
        let row: Vec<String> = (0..g.height_cells).map(|i| ((map.at(i, j) * 255.0).round() as u8).to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_pgm(path: &Path, map: &OccupancyMap) -> Result<(), DataError> {
    crate::io::write_atomic(path, pgm_string(map).as_bytes())
}

pub fn write_detections(path: &Path, dets: &[BevDetection]) -> Result<(), DataError> {
    let mut buf = Vec::new();
    for d in dets {
        serde_json::to_writer(&mut buf, &d.rounded()).expect("serializable");
        writeln!(buf).expect("in-memory write");
    }
    crate::io::write_atomic(path, &buf)
}
