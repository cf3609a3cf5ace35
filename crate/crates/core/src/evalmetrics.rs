//! CLEAR-style detection and tracking scores on the ground plane, plus
//! identity F1, mostly-tracked ratio and multi-seed aggregation.
//!
//! Predictions match ground truth when within `r` meters; per frame the
//! matching is the largest one-to-one set of such pairs with minimum total
//! distance. Precision scores (MODP, MOTP) average `1 − d/r` over matches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::error::{DataError, MetricsError};
use crate::io::sig9;
use crate::simworld::PositionRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatchResult {
    pub frame: usize,
    /// `(gt id, pred id, distance)`.
    pub tp: Vec<(u32, u32, f64)>,
    pub fp: usize,
    pub fn_: usize,
    pub gt: usize,
}

pub fn match_frame(frame: usize, gt: &[PositionRecord], pred: &[PositionRecord], r: f64) -> FrameMatchResult {
    let costs = CostMatrix::from_fn(gt.len(), pred.len(), |i, j| {
        let d = (gt[i].position() - pred[j].position()).norm();
        if d <= r {
            d
        } else {
            f64::INFINITY
        }
    });
    let a = solve(&costs);
    let tp: Vec<_> = a.pairs().map(|(i, j)| (gt[i].id, pred[j].id, costs.get(i, j))).collect();
    FrameMatchResult { frame, fp: pred.len() - tp.len(), fn_: gt.len() - tp.len(), gt: gt.len(), tp }
}

fn group(records: &[PositionRecord]) -> BTreeMap<usize, Vec<PositionRecord>> {
    let mut m: BTreeMap<usize, Vec<PositionRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.frame).or_default().push(*r);
    }
    m
}

/// Matches every frame that has ground truth or predictions, in frame order.
pub fn match_sequence(gt: &[PositionRecord], pred: &[PositionRecord], r: f64) -> Vec<FrameMatchResult> {
    let (g, p) = (group(gt), group(pred));
    let frames: BTreeSet<usize> = g.keys().chain(p.keys()).copied().collect();
    let empty = Vec::new();
    frames.into_iter().map(|f| match_frame(f, g.get(&f).unwrap_or(&empty), p.get(&f).unwrap_or(&empty), r)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub gt: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idsw: usize,
}

fn totals(frames: &[FrameMatchResult]) -> Totals {
    let mut t = Totals::default();
    for f in frames {
        t.gt += f.gt;
        t.tp += f.tp.len();
        t.fp += f.fp;
        t.fn_ += f.fn_;
    }
    t
}

fn precision(frames: &[FrameMatchResult], r: f64) -> f64 {
    let (sum, n) = frames.iter().flat_map(|f| &f.tp).fold((0.0, 0usize), |(s, n), &(_, _, d)| (s + (1.0 - d / r), n + 1));
    if n == 0 {
        0.0
    } else {
        100.0 * sum / n as f64
    }
}

/// `(MODA, MODP)` in percent.
pub fn detection_metrics(frames: &[FrameMatchResult], r: f64) -> Result<(f64, f64), MetricsError> {
    let t = totals(frames);
    if t.gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let moda = 100.0 * (1.0 - (t.fp + t.fn_) as f64 / t.gt as f64);
    Ok((moda, precision(frames, r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    pub mt: f64,
    pub idsw: usize,
}

/// Identity switches: a ground-truth id whose matched prediction id differs
/// from the one at its previous matched frame.
pub fn count_id_switches(frames: &[FrameMatchResult]) -> usize {
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    let mut n = 0;
    for f in frames {
        for &(g, p, _) in &f.tp {
            if let Some(prev) = last.insert(g, p) {
                n += (prev != p) as usize;
            }
        }
    }
    n
}

/// `(IDTP, total gt detections, total pred detections)` for the identity
/// mapping that maximizes the number of frames in which a ground-truth id
/// and its mapped prediction id are both present and within `r`.
pub fn identity_matches(gt: &[PositionRecord], pred: &[PositionRecord], r: f64) -> (usize, usize, usize) {
    let gt_ids: Vec<u32> = gt.iter().map(|x| x.id).collect::<BTreeSet<_>>().into_iter().collect();
    let pred_ids: Vec<u32> = pred.iter().map(|x| x.id).collect::<BTreeSet<_>>().into_iter().collect();
    let gi: BTreeMap<u32, usize> = gt_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let pi: BTreeMap<u32, usize> = pred_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut co = vec![0usize; gt_ids.len() * pred_ids.len()];
    let (g, p) = (group(gt), group(pred));
    for (f, gs) in &g {
        let Some(ps) = p.get(f) else { continue };
        for a in gs {
            for b in ps {
                if (a.position() - b.position()).norm() <= r {
                    co[gi[&a.id] * pred_ids.len() + pi[&b.id]] += 1;
                }
            }
        }
    }
    let top = co.iter().copied().max().unwrap_or(0) as f64;
    // a full-cardinality matching minimizing Σ(top − count) maximizes Σ count
    let costs = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |i, j| top - co[i * pred_ids.len() + j] as f64);
    let idtp = solve(&costs).pairs().map(|(i, j)| co[i * pred_ids.len() + j]).sum();
    (idtp, gt.len(), pred.len())
}

/// Share (percent) of ground-truth ids matched in at least 80% of the frames
/// in which they appear.
pub fn mostly_tracked(gt: &[PositionRecord], frames: &[FrameMatchResult]) -> f64 {
    let mut present: BTreeMap<u32, usize> = BTreeMap::new();
    for g in gt {
        *present.entry(g.id).or_default() += 1;
    }
    if present.is_empty() {
        return 0.0;
    }
    let mut matched: BTreeMap<u32, usize> = BTreeMap::new();
    for f in frames {
        for &(g, _, _) in &f.tp {
            *matched.entry(g).or_default() += 1;
        }
    }
    // integer form of matched / present ≥ 0.8
    let mt = present.iter().filter(|(id, &n)| 5 * matched.get(id).copied().unwrap_or(0) >= 4 * n).count();
    100.0 * mt as f64 / present.len() as f64
}

pub fn tracking_metrics(gt: &[PositionRecord], pred: &[PositionRecord], r: f64) -> Result<(TrackingMetrics, Totals), MetricsError> {
    let frames = match_sequence(gt, pred, r);
    let mut t = totals(&frames);
    if t.gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    t.idsw = count_id_switches(&frames);
    let (idtp, n_gt, n_pred) = identity_matches(gt, pred, r);
    let m = TrackingMetrics {
        mota: 100.0 * (1.0 - (t.fp + t.fn_ + t.idsw) as f64 / t.gt as f64),
        motp: precision(&frames, r),
        idf1: 100.0 * 2.0 * idtp as f64 / (n_gt + n_pred) as f64,
        mt: mostly_tracked(gt, &frames),
        idsw: t.idsw,
    };
    Ok((m, t))
}

/// The six headline scores, all percentages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    #[serde(rename = "MODA")]
    pub moda: f64,
    #[serde(rename = "MODP")]
    pub modp: f64,
    #[serde(rename = "MOTA")]
    pub mota: f64,
    #[serde(rename = "MOTP")]
    pub motp: f64,
    #[serde(rename = "IDF1")]
    pub idf1: f64,
    #[serde(rename = "MT")]
    pub mt: f64,
}

impl Scores {
    pub const NAMES: [&'static str; 6] = ["MODA", "MODP", "MOTA", "MOTP", "IDF1", "MT"];

    pub fn values(&self) -> [f64; 6] {
        [self.moda, self.modp, self.mota, self.motp, self.idf1, self.mt]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        Self { moda: v[0], modp: v[1], mota: v[2], motp: v[3], idf1: v[4], mt: v[5] }
    }

    fn rounded(&self) -> Self {
        Self::from_values(self.values().map(sig9))
    }
}

/// Scores of one seed. Detection scores come from the per-frame detections,
/// tracking scores from the tracker output; `totals` carries the tracking
/// counts and `detection_totals` the detection counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub scores: Scores,
    pub detection_totals: Totals,
    pub totals: Totals,
}

pub fn score_seed(
    seed: u64,
    gt: &[PositionRecord],
    detections: &[PositionRecord],
    tracks: &[PositionRecord],
    r: f64,
) -> Result<SeedReport, MetricsError> {
    let det_frames = match_sequence(gt, detections, r);
    let (moda, modp) = detection_metrics(&det_frames, r)?;
    let (tm, totals) = tracking_metrics(gt, tracks, r)?;
    Ok(SeedReport {
        seed,
        scores: Scores { moda, modp, mota: tm.mota, motp: tm.motp, idf1: tm.idf1, mt: tm.mt },
        detection_totals: self::totals(&det_frames),
        totals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seeds: Vec<SeedReport>,
    pub mean: Scores,
    pub std: Scores,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample mean and sample standard deviation (`n − 1`) of every score.
pub fn aggregate_seeds(seeds: Vec<SeedReport>) -> MetricsReport {
    assert!(!seeds.is_empty(), "at least one seed report is required");
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for k in 0..6 {
        let xs: Vec<f64> = seeds.iter().map(|s| s.scores.values()[k]).collect();
        (mean[k], std[k]) = mean_std(&xs);
    }
    MetricsReport { seeds, mean: Scores::from_values(mean), std: Scores::from_values(std) }
}

impl MetricsReport {
    pub fn rounded(&self) -> Self {
        Self {
            seeds: self.seeds.iter().map(|s| SeedReport { scores: s.scores.rounded(), ..*s }).collect(),
            mean: self.mean.rounded(),
            std: self.std.rounded(),
        }
    }

    /// One row per seed, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut s = format!("seed,{},GT,TP,FP,FN,IDSW\n", Scores::NAMES.join(","));
        let fmt = |v: [f64; 6]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
        for r in &self.seeds {
            let t = r.totals;
            let _ = writeln!(s, "{},{},{},{},{},{},{}", r.seed, fmt(r.scores.values()), t.gt, t.tp, t.fp, t.fn_, t.idsw);
        }
        let _ = writeln!(s, "mean,{},,,,,", fmt(self.mean.values()));
        let _ = writeln!(s, "std,{},,,,,", fmt(self.std.values()));
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        crate::io::write_json(&dir.join("report.json"), &self.rounded())?;
        crate::io::write_atomic(&dir.join("report.csv"), self.to_csv().as_bytes())
    }
}
