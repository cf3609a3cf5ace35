//! Rasters from run outputs: per-frame ground-truth and detection occupancy
//! graymaps, and a trajectory image with ground truth on the left and
//! predicted tracks on the right, one gray level per identity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mvtrack_core::error::DataError;
use mvtrack_core::fuse::{render_points, write_pgm, BevDetection, FuseParams};
use mvtrack_core::io::{read_json, read_jsonl, write_atomic};
use mvtrack_core::{PositionRecord, ScenarioConfig, WorldGrid};
use nalgebra::Vector2;

use crate::args::{Cli, DumpArgs};
use crate::error::CliError;

const BACKGROUND: u8 = 255;
const SEPARATOR: u8 = 230;
const DARKEST_ID: u8 = 0;
const LIGHTEST_ID: u8 = 200;
const MARGIN: usize = 8;
const PANEL_MAX: f64 = 400.0;

/// An 8-bit grayscale image written as a plain graymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self { width, height, pixels: vec![fill; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn put(&mut self, x: i64, y: i64, v: u8) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = v;
        }
    }

    fn dot(&mut self, x: i64, y: i64, v: u8) {
        for dy in -1..=1 {
            for dx in -1..=1 {
                self.put(x + dx, y + dy, v);
            }
        }
    }

    fn line(&mut self, a: (i64, i64), b: (i64, i64), v: u8) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = a.0 as f64 + t * (b.0 - a.0) as f64;
            let y = a.1 as f64 + t * (b.1 - a.1) as f64;
            self.put(x.round() as i64, y.round() as i64, v);
        }
    }

    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Evenly spaced, pairwise distinct gray levels for `n` identities (up to
/// 201 of them; beyond that levels repeat).
pub fn id_levels(n: usize) -> Vec<u8> {
    let span = (LIGHTEST_ID - DARKEST_ID) as usize;
    (0..n).map(|k| if n <= 1 { DARKEST_ID } else { DARKEST_ID + ((k % (span + 1)) * span / (n - 1).min(span)) as u8 }).collect()
}

fn by_id(records: &[PositionRecord]) -> BTreeMap<u32, Vec<PositionRecord>> {
    let mut out: BTreeMap<u32, Vec<PositionRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.id).or_default().push(*r);
    }
    for v in out.values_mut() {
        v.sort_by_key(|r| r.frame);
    }
    out
}

/// Gray level assigned to each identity in `records`, in id order.
pub fn legend(records: &[PositionRecord]) -> Vec<(u32, u8)> {
    let ids: Vec<u32> = by_id(records).into_keys().collect();
    ids.iter().copied().zip(id_levels(ids.len())).collect()
}

/// Ground truth and predictions side by side over the square arena
/// `[-half, half]²`, `+y` up. Consecutive frames of one id are joined.
pub fn trajectory_image(half: f64, gt: &[PositionRecord], pred: &[PositionRecord]) -> Raster {
    let scale = (PANEL_MAX / (2.0 * half)).min(20.0);
    let panel = (2.0 * half * scale).ceil() as usize + 1;
    let width = 3 * MARGIN + 2 * panel;
    let height = 2 * MARGIN + panel;
    let mut img = Raster::new(width, height, BACKGROUND);
    for y in 0..height {
        img.put((2 * MARGIN + panel) as i64 - MARGIN as i64 / 2, y as i64, SEPARATOR);
    }
    for (k, records) in [gt, pred].into_iter().enumerate() {
        let x0 = (MARGIN + k * (panel + MARGIN)) as f64;
        let to_px =
            |r: &PositionRecord| ((x0 + (r.x + half) * scale).round() as i64, (MARGIN as f64 + (half - r.y) * scale).round() as i64);
        let levels: BTreeMap<u32, u8> = legend(records).into_iter().collect();
        for (id, track) in by_id(records) {
            let v = levels[&id];
            for w in track.windows(2) {
                if w[1].frame == w[0].frame + 1 {
                    img.line(to_px(&w[0]), to_px(&w[1]), v);
                }
            }
            for r in &track {
                let (x, y) = to_px(r);
                img.dot(x, y, v);
            }
        }
    }
    img
}

pub fn legend_text(gt: &[PositionRecord], pred: &[PositionRecord]) -> String {
    let (lg, lp) = (legend(gt), legend(pred));
    let mut s = format!("gt_ids {}\npred_ids {}\n", lg.len(), lp.len());
    for (side, l) in [("gt", lg), ("pred", lp)] {
        for (id, v) in l {
            let _ = writeln!(s, "{side} {id} {v}");
        }
    }
    s
}

fn frames_of(records: &[PositionRecord], n: usize) -> Vec<Vec<(Vector2<f64>, f64)>> {
    let mut out = vec![Vec::new(); n];
    for r in records {
        if r.frame < n {
            out[r.frame].push((r.position(), 1.0));
        }
    }
    out
}

fn seed_dirs(run: &Path) -> Result<Vec<PathBuf>, DataError> {
    let entries = std::fs::read_dir(run).map_err(|e| DataError::io(run, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed_")))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(DataError::io(run, std::io::Error::new(std::io::ErrorKind::NotFound, "no seed_* directories in run output")));
    }
    Ok(dirs)
}

/// Renders everything for one seed directory into `out`.
pub fn dump_seed(seed_dir: &Path, gt_path: &Path, fuse: &FuseParams, out: &Path) -> Result<usize, DataError> {
    let scenario: ScenarioConfig = read_json(&seed_dir.join("scenario.json"))?;
    let gt: Vec<PositionRecord> = read_jsonl(gt_path)?;
    let pred: Vec<PositionRecord> = read_jsonl(&seed_dir.join("tracks").join("pred.jsonl"))?;
    let grid = WorldGrid::covering(scenario.arena_half_extent, fuse.cell_size).map_err(|e| DataError::Config(e.to_string()))?;
    let n = scenario.frame_count;
    for (f, pts) in frames_of(&gt, n).into_iter().enumerate() {
        write_pgm(&out.join("gt_heatmaps").join(format!("frame_{f:04}.pgm")), &render_points(&pts, &grid, fuse.sigma))?;
        let det_path = seed_dir.join("det").join(format!("frame_{f:04}.jsonl"));
        let dets: Vec<BevDetection> = if det_path.exists() { read_jsonl(&det_path)? } else { Vec::new() };
        let pts: Vec<(Vector2<f64>, f64)> = dets.iter().map(|d| (d.position(), d.score)).collect();
        write_pgm(&out.join("det_heatmaps").join(format!("frame_{f:04}.pgm")), &render_points(&pts, &grid, fuse.sigma))?;
    }
    let img = trajectory_image(scenario.arena_half_extent, &gt, &pred);
    write_atomic(&out.join("trajectories.pgm"), img.to_pgm().as_bytes())?;
    write_atomic(&out.join("legend.txt"), legend_text(&gt, &pred).as_bytes())?;
    Ok(legend(&gt).len())
}

pub fn dump(cli: &Cli, args: &DumpArgs) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(crate::config::ConfigFile::load).transpose()?;
    let fuse = file.map(|f| f.pipeline.fuse).unwrap_or_default();
    let out = cli.out.clone().unwrap_or_else(|| args.run.join("dump"));
    for dir in seed_dirs(&args.run)? {
        let gt_path = match &args.dataset {
            Some(ds) => ds.join("gt").join("positions.jsonl"),
            None => dir.join("gt").join("positions.jsonl"),
        };
        let name = dir.file_name().expect("seed directory has a name");
        let ids = dump_seed(&dir, &gt_path, &fuse, &out.join(name))?;
        if !cli.quiet {
            eprintln!("{}: {ids} ground-truth trajectories", dir.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frame: usize, id: u32, x: f64, y: f64) -> PositionRecord {
        PositionRecord { frame, id, x, y }
    }

    #[test]
    fn levels_are_distinct_and_in_range() {
        for n in [1, 2, 10, 40, 201] {
            let l = id_levels(n);
            let mut u = l.clone();
            u.sort();
            u.dedup();
            assert_eq!(u.len(), n);
            assert!(l.iter().all(|&v| v <= LIGHTEST_ID));
        }
    }

    #[test]
    fn stationary_pedestrian_is_one_dot_cluster() {
        let gt: Vec<_> = (0..10).map(|f| rec(f, 3, 1.0, -2.0)).collect();
        let img = trajectory_image(5.0, &gt, &[]);
        let inked: Vec<(usize, usize)> = (0..img.height)
            .flat_map(|y| (0..img.width).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) != BACKGROUND && img.get(x, y) != SEPARATOR)
            .collect();
        assert_eq!(inked.len(), 9);
        let (xs, ys): (Vec<_>, Vec<_>) = inked.iter().copied().unzip();
        assert_eq!(xs.iter().max().unwrap() - xs.iter().min().unwrap(), 2);
        assert_eq!(ys.iter().max().unwrap() - ys.iter().min().unwrap(), 2);
    }

    #[test]
    fn legend_counts_ids() {
        let gt = vec![rec(0, 0, 0.0, 0.0), rec(0, 1, 1.0, 0.0), rec(1, 0, 0.1, 0.0)];
        let t = legend_text(&gt, &[rec(0, 9, 0.0, 0.0)]);
        assert!(t.starts_with("gt_ids 2\npred_ids 1\n"));
        assert!(t.contains("pred 9 0\n"));
    }

    #[test]
    fn pgm_header_matches_size() {
        let r = Raster::new(3, 2, 7);
        assert_eq!(r.to_pgm(), "P2\n3 2\n255\n7 7 7\n7 7 7\n");
    }
}
