//! View registration: landmark descriptor matching and robust pixel-space
//! homography estimation against a drone's reference view.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RegisterError;
use crate::geometry::{apply_h, conditioning_2d, fit_homography, normalize_homography, Homography};
use crate::simworld::{FeatureSet, FrameCapture};

/// One-to-one descriptor correspondences `(current index, reference index)`
/// with the forward nearest/second-nearest distance ratio of each pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<(usize, usize)>,
    pub ratios: Vec<f64>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterParams {
    pub ratio: f64,
    pub iterations: usize,
    /// Symmetric transfer error bound for inliers, pixels.
    pub inlier_threshold: f64,
}

impl Default for RegisterParams {
    fn default() -> Self {
        Self { ratio: 0.8, iterations: 1000, inlier_threshold: 2.0 }
    }
}

/// Current-view pixels to reference-view pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub match_count: usize,
    pub confidence: f64,
    pub seed: u64,
}

/// On-disk form of a registration result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationRecord {
    pub homography: [f64; 9],
    pub confidence: f64,
    pub inliers: usize,
    pub matches: usize,
    pub seed: u64,
}

impl From<&RegistrationResult> for RegistrationRecord {
    fn from(r: &RegistrationResult) -> Self {
        let m = r.homography.matrix();
        let mut h = [0.0; 9];
        for (k, v) in h.iter_mut().enumerate() {
            *v = crate::io::sig9(m[(k / 3, k % 3)]);
        }
        Self { homography: h, confidence: crate::io::sig9(r.confidence), inliers: r.inlier_count, matches: r.match_count, seed: r.seed }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest and second-nearest candidates `(distance², index)` ranked on
/// approximate distances; equal distances keep the lower index.
#[derive(Clone, Copy)]
struct Top2 {
    best: (f64, usize),
    second: (f64, usize),
}

impl Top2 {
    fn new() -> Self {
        Self { best: (f64::INFINITY, usize::MAX), second: (f64::INFINITY, usize::MAX) }
    }

    fn push(&mut self, d: f64, idx: usize) {
        if d < self.best.0 || (d == self.best.0 && idx < self.best.1) {
            self.second = self.best;
            self.best = (d, idx);
        } else if d < self.second.0 || (d == self.second.0 && idx < self.second.1) {
            self.second = (d, idx);
        }
    }

    /// Re-ranks the two candidates on exact distances from `query`, then
    /// applies the ratio test. Returns the nearest index and its ratio.
    fn resolve(&self, query: &[f64], set: &FeatureSet, tau: f64) -> Option<(usize, f64)> {
        if self.second.1 == usize::MAX {
            return None;
        }
        let mut a = (sq_dist(query, set.descriptor(self.best.1)), self.best.1);
        let mut b = (sq_dist(query, set.descriptor(self.second.1)), self.second.1);
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            std::mem::swap(&mut a, &mut b);
        }
        let (d1, d2) = (a.0.sqrt(), b.0.sqrt());
        let r = if d2 > 0.0 { d1 / d2 } else { 1.0 };
        (r < tau).then_some((a.1, r))
    }
}

/// Ratio-test matching, applied from both sides, keeping mutual nearest
/// neighbours only. The result is symmetric: swapping the arguments yields
/// the reversed pairs.
pub fn match_descriptors(cur: &FeatureSet, reference: &FeatureSet, tau: f64) -> Result<MatchSet, RegisterError> {
    if cur.dim != reference.dim {
        return Err(RegisterError::DimensionMismatch(cur.dim, reference.dim));
    }
    if reference.len() < 2 || cur.len() < 2 {
        return Ok(MatchSet::default());
    }
    // squared distances |a|² + |b|² − 2a·b through one matrix product
    let a = DMatrix::from_row_slice(cur.len(), cur.dim, &cur.descriptors);
    let b = DMatrix::from_row_slice(reference.len(), reference.dim, &reference.descriptors);
    let gram = &a * b.transpose();
    let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let n = cur.len();
    let mut rows = vec![Top2::new(); n];
    let mut cols = vec![Top2::new(); reference.len()];
    for (j, (col, g)) in cols.iter_mut().zip(gram.as_slice().chunks_exact(n)).enumerate() {
        let mut top = Top2::new();
        for (i, (row, &gij)) in rows.iter_mut().zip(g).enumerate() {
            let d = (na[i] + nb[j] - 2.0 * gij).max(0.0);
            if d <= row.second.0 {
                row.push(d, j);
            }
            if d <= top.second.0 {
                top.push(d, i);
            }
        }
        *col = top;
    }
    let mut out = MatchSet::default();
    for (i, row) in rows.iter().enumerate() {
        let Some((j, r)) = row.resolve(cur.descriptor(i), reference, tau) else { continue };
        if let Some((back, _)) = cols[j].resolve(reference.descriptor(j), cur, tau) {
            if back == i {
                out.pairs.push((i, j));
                out.ratios.push(r);
            }
        }
    }
    Ok(out)
}

/// Symmetric transfer error `sqrt((|Hp − q|² + |H⁻¹q − p|²) / 2)`.
#[cfg(test)]
fn transfer_error(h: &Matrix3<f64>, h_inv: &Matrix3<f64>, p: &Vector2<f64>, q: &Vector2<f64>) -> f64 {
    match (apply_h(h, p), apply_h(h_inv, q)) {
        (Ok(hp), Ok(hq)) => (0.5 * ((hp - q).norm_squared() + (hq - p).norm_squared())).sqrt(),
        _ => f64::INFINITY,
    }
}

const COLLINEAR_TOL: f64 = 1e-6;

fn has_collinear_triple(pts: &[Vector2<f64>; 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES.iter().any(|&[a, b, c]| {
        let (u, v) = (pts[b] - pts[a], pts[c] - pts[a]);
        let cross = (u.x * v.y - u.y * v.x).abs();
        // triangle height over its longest side
        let base = u.norm().max(v.norm()).max((pts[c] - pts[b]).norm());
        base == 0.0 || cross / base <= COLLINEAR_TOL
    })
}

/// Exact four-point homography in conditioned coordinates.
fn fit_minimal(src: &[Vector2<f64>; 4], dst: &[Vector2<f64>; 4]) -> Option<Matrix3<f64>> {
    let ts = conditioning_2d(src);
    let td = conditioning_2d(dst);
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for k in 0..4 {
        let p = apply_h(&ts, &src[k]).ok()?;
        let q = apply_h(&td, &dst[k]).ok()?;
        let r = 2 * k;
        a[(r, 0)] = p.x;
        a[(r, 1)] = p.y;
        a[(r, 2)] = 1.0;
        a[(r, 6)] = -q.x * p.x;
        a[(r, 7)] = -q.x * p.y;
        b[r] = q.x;
        a[(r + 1, 3)] = p.x;
        a[(r + 1, 4)] = p.y;
        a[(r + 1, 5)] = 1.0;
        a[(r + 1, 6)] = -q.y * p.x;
        a[(r + 1, 7)] = -q.y * p.y;
        b[r + 1] = q.y;
    }
    let x = a.lu().solve(&b);
    let hn = match x {
        Some(x) => Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], 1.0),
        None => {
            // conditioned h33 vanished; fall back to the SVD solver
            return fit_homography(src, dst).ok();
        }
    };
    let m = normalize_homography(td.try_inverse()? * hn * ts);
    (m.iter().all(|v| v.is_finite()) && m.determinant().abs() > 1e-12).then_some(m)
}

struct Consensus {
    h: Matrix3<f64>,
    mask: Vec<bool>,
    count: usize,
    error: f64,
}

/// Inliers of `h`, or `None` as soon as the hypothesis can no longer beat
/// `bound` (more inliers, or as many with lower total error).
fn score(h: &Matrix3<f64>, src: &[Vector2<f64>], dst: &[Vector2<f64>], thr: f64, bound: Option<(usize, f64)>) -> Option<Consensus> {
    let hi = h.try_inverse()?;
    let n = src.len();
    let (need, err_bound) = bound.unwrap_or((0, f64::INFINITY));
    let thr2 = 2.0 * thr * thr;
    let mut mask = vec![false; n];
    let mut count = 0;
    let mut misses = 0;
    let mut error = 0.0;
    for k in 0..n {
        let (p, q) = (&src[k], &dst[k]);
        let w1 = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
        let w2 = hi[(2, 0)] * q.x + hi[(2, 1)] * q.y + hi[(2, 2)];
        let mut inlier = false;
        if w1.abs() >= 1e-12 && w2.abs() >= 1e-12 {
            let (r1, r2) = (1.0 / w1, 1.0 / w2);
            let fx = (h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)]) * r1 - q.x;
            let fy = (h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)]) * r1 - q.y;
            let bx = (hi[(0, 0)] * q.x + hi[(0, 1)] * q.y + hi[(0, 2)]) * r2 - p.x;
            let by = (hi[(1, 0)] * q.x + hi[(1, 1)] * q.y + hi[(1, 2)]) * r2 - p.y;
            let e2 = fx * fx + fy * fy + bx * bx + by * by;
            if e2 <= thr2 {
                inlier = true;
                mask[k] = true;
                count += 1;
                error += (0.5 * e2).sqrt();
            }
        }
        if !inlier {
            misses += 1;
        }
        let reachable = n - misses;
        if reachable < need || (reachable == need && error >= err_bound) {
            return None;
        }
    }
    Some(Consensus { h: *h, mask, count, error })
}

fn better(a: &Consensus, b: &Option<Consensus>) -> bool {
    match b {
        None => true,
        Some(b) => a.count > b.count || (a.count == b.count && a.error < b.error),
    }
}

/// Seeded RANSAC over 4-point samples followed by a least-squares refit on
/// the consensus set. The returned homography maps current pixels to
/// reference pixels.
pub fn estimate_homography_ransac(
    kp_cur: &[Vector2<f64>],
    kp_ref: &[Vector2<f64>],
    matches: &MatchSet,
    params: &RegisterParams,
    seed: u64,
) -> Result<RegistrationResult, RegisterError> {
    let m = matches.len();
    if m < 4 {
        return Err(RegisterError::InsufficientMatches(m));
    }
    let src: Vec<Vector2<f64>> = matches.pairs.iter().map(|&(i, _)| kp_cur[i]).collect();
    let dst: Vec<Vector2<f64>> = matches.pairs.iter().map(|&(_, j)| kp_ref[j]).collect();
    let thr = params.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Consensus> = None;
    for _ in 0..params.iterations {
        let idx = rand::seq::index::sample(&mut rng, m, 4);
        let s = [src[idx.index(0)], src[idx.index(1)], src[idx.index(2)], src[idx.index(3)]];
        let d = [dst[idx.index(0)], dst[idx.index(1)], dst[idx.index(2)], dst[idx.index(3)]];
        if has_collinear_triple(&s) || has_collinear_triple(&d) {
            continue;
        }
        let Some(h) = fit_minimal(&s, &d) else { continue };
        let bound = best.as_ref().map(|b| (b.count, b.error));
        if let Some(c) = score(&h, &src, &dst, thr, bound) {
            if better(&c, &best) {
                best = Some(c);
            }
        }
    }
    let best = match best {
        Some(b) if b.count >= 4 => b,
        other => return Err(RegisterError::DegenerateConsensus(other.map_or(0, |b| b.count))),
    };
    let (is, id): (Vec<_>, Vec<_>) = (0..m).filter(|&k| best.mask[k]).map(|k| (src[k], dst[k])).unzip();
    let refit = fit_homography(&is, &id).ok().and_then(|h| score(&h, &src, &dst, thr, None));
    let chosen = match refit {
        Some(r) if r.count >= best.count => r,
        _ => best,
    };
    let homography = Homography::new(chosen.h).map_err(|_| RegisterError::DegenerateConsensus(chosen.count))?;
    Ok(RegistrationResult {
        homography,
        confidence: chosen.count as f64 / m as f64,
        inlier_count: chosen.count,
        match_count: m,
        inliers: chosen.mask,
        seed,
    })
}

/// Matches the landmark features of `cur` against `reference` and estimates
/// the current→reference pixel homography.
pub fn register_view(
    cur: &FrameCapture,
    reference: &FrameCapture,
    params: &RegisterParams,
    seed: u64,
) -> Result<RegistrationResult, RegisterError> {
    let matches = match_descriptors(&cur.features, &reference.features, params.ratio)?;
    estimate_homography_ransac(&cur.features.keypoints, &reference.features.keypoints, &matches, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ground_homography, CameraIntrinsics};
    use crate::simworld::{capture_frame, capture_rng, ScenarioConfig, Scene, WorldState};
    use rand::Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn features(points: &[Vector2<f64>], descs: &[Vec<f64>]) -> FeatureSet {
        let mut f = FeatureSet { keypoints: vec![], dim: descs[0].len(), descriptors: vec![] };
        for (p, d) in points.iter().zip(descs) {
            f.push(*p, d);
        }
        f
    }

    fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn noisy(rng: &mut ChaCha8Rng, d: &[f64], sigma: f64) -> Vec<f64> {
        let n = Normal::new(0.0, sigma).unwrap();
        d.iter().map(|x| x + n.sample(rng)).collect()
    }

    fn planted() -> Matrix3<f64> {
        Matrix3::new(1.02, 0.03, 12.0, -0.02, 0.98, -7.0, 1.5e-5, -1.0e-5, 1.0)
    }

    fn corner_error(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        let k = CameraIntrinsics::drone_default();
        [(0.0, 0.0), (k.width as f64, 0.0), (0.0, k.height as f64), (k.width as f64, k.height as f64)]
            .iter()
            .map(|&(x, y)| {
                let p = Vector2::new(x, y);
                (apply_h(a, &p).unwrap() - apply_h(b, &p).unwrap()).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_sets_match_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let descs: Vec<_> = (0..50).map(|_| unit(&mut rng, 32)).collect();
        let pts: Vec<_> = (0..50).map(|i| Vector2::new(i as f64, 0.0)).collect();
        let f = features(&pts, &descs);
        let m = match_descriptors(&f, &f, 0.8).unwrap();
        assert_eq!(m.pairs, (0..50).map(|i| (i, i)).collect::<Vec<_>>());
        assert!(m.ratios.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn equidistant_neighbours_fail_ratio_test() {
        let p = vec![Vector2::zeros(); 3];
        let cur = features(&p[..1], &[vec![0.0, 0.0]]);
        let reference = features(&p[..2], &[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(match_descriptors(&cur, &reference, 0.8).unwrap().is_empty());
        let single = features(&p[..1], &[vec![0.0, 0.0]]);
        assert!(match_descriptors(&cur, &single, 0.8).unwrap().is_empty());
        let other = features(&p[..2], &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(match_descriptors(&reference, &other, 0.8), Err(RegisterError::DimensionMismatch(2, 3)));
    }

    #[test]
    fn matching_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let base: Vec<_> = (0..60).map(|_| unit(&mut rng, 8)).collect();
            let a: Vec<_> = base.iter().map(|d| noisy(&mut rng, d, 0.2)).collect();
            let b: Vec<_> = base.iter().rev().map(|d| noisy(&mut rng, d, 0.2)).collect();
            let pts = vec![Vector2::zeros(); 60];
            let (fa, fb) = (features(&pts, &a), features(&pts, &b));
            let mut ab: Vec<_> = match_descriptors(&fa, &fb, 0.8).unwrap().pairs;
            let mut ba: Vec<_> = match_descriptors(&fb, &fa, 0.8).unwrap().pairs.iter().map(|&(i, j)| (j, i)).collect();
            ab.sort();
            ba.sort();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn shared_landmarks_dominate_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shared: Vec<_> = (0..300).map(|_| unit(&mut rng, 32)).collect();
        let mut a: Vec<_> = shared.iter().map(|d| noisy(&mut rng, d, 0.05)).collect();
        let mut b: Vec<_> = shared.iter().map(|d| noisy(&mut rng, d, 0.05)).collect();
        a.extend((0..100).map(|_| unit(&mut rng, 32)));
        b.extend((0..100).map(|_| unit(&mut rng, 32)));
        let pts = vec![Vector2::zeros(); 400];
        let m = match_descriptors(&features(&pts, &a), &features(&pts, &b), 0.8).unwrap();
        let correct = m.pairs.iter().filter(|&&(i, j)| i == j && i < 300).count();
        assert!(correct as f64 >= 0.95 * m.len() as f64);
        assert!(m.len() >= 250);
    }

    fn planted_matches(
        rng: &mut ChaCha8Rng,
        h: &Matrix3<f64>,
        n: usize,
        outliers: usize,
        sigma: f64,
    ) -> (Vec<Vector2<f64>>, Vec<Vector2<f64>>) {
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for k in 0..n {
            let p = Vector2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
            let q = if k < outliers {
                Vector2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0))
            } else {
                let mut q = apply_h(h, &p).unwrap();
                if sigma > 0.0 {
                    q += Vector2::new(noise.sample(rng), noise.sample(rng));
                }
                q
            };
            src.push(p);
            dst.push(q);
        }
        (src, dst)
    }

    fn identity_matches(n: usize) -> MatchSet {
        MatchSet { pairs: (0..n).map(|i| (i, i)).collect(), ratios: vec![0.0; n] }
    }

    #[test]
    fn exact_matches_recover_homography() {
        let h = planted();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (src, dst) = planted_matches(&mut rng, &h, 50, 0, 0.0);
        let r = estimate_homography_ransac(&src, &dst, &identity_matches(50), &RegisterParams::default(), 9).unwrap();
        assert_eq!(r.confidence, 1.0);
        assert!(corner_error(r.homography.matrix(), &h) < 1e-6);
    }

    fn planted_pass_count(sigma: f64) -> usize {
        let h = planted();
        let mut good = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (src, dst) = planted_matches(&mut rng, &h, 100, 40, sigma);
            let r = estimate_homography_ransac(&src, &dst, &identity_matches(100), &RegisterParams::default(), seed).unwrap();
            assert_eq!(r.inlier_count, r.inliers.iter().filter(|&&b| b).count());
            assert_eq!(r.confidence * 100.0, r.inlier_count as f64);
            let h_inv = r.homography.matrix().try_inverse().unwrap();
            for k in (0..100).filter(|&k| r.inliers[k]) {
                assert!(transfer_error(r.homography.matrix(), &h_inv, &src[k], &dst[k]) <= 2.0);
            }
            if corner_error(r.homography.matrix(), &h) < 0.5 {
                good += 1;
            }
        }
        good
    }

    #[test]
    fn planted_model_survives_outliers() {
        let good = planted_pass_count(0.0);
        assert!(good >= 95, "{good}");
    }

    #[test]
    fn planted_model_survives_outliers_with_inlier_noise() {
        let good = planted_pass_count(0.25);
        assert!(good >= 95, "{good}");
    }

    #[test]
    fn too_few_matches() {
        let p = vec![Vector2::zeros(); 3];
        let r = estimate_homography_ransac(&p, &p, &identity_matches(3), &RegisterParams::default(), 0);
        assert_eq!(r.unwrap_err(), RegisterError::InsufficientMatches(3));
    }

    #[test]
    fn seed_determinism() {
        let h = planted();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (src, dst) = planted_matches(&mut rng, &h, 80, 30, 0.5);
        let p = RegisterParams::default();
        let a = estimate_homography_ransac(&src, &dst, &identity_matches(80), &p, 4).unwrap();
        let b = estimate_homography_ransac(&src, &dst, &identity_matches(80), &p, 4).unwrap();
        assert_eq!(a, b);
    }

    fn sim(sigma_px: f64, sigma_d: f64) -> (ScenarioConfig, Scene, WorldState) {
        let cfg = ScenarioConfig { pixel_noise_sigma: sigma_px, descriptor_noise_sigma: sigma_d, ..ScenarioConfig::simple() };
        let scene = Scene::new(&cfg);
        let world = WorldState::new(&cfg);
        (cfg, scene, world)
    }

    #[test]
    fn self_registration_is_identity() {
        let (cfg, scene, world) = sim(0.5, 0.05);
        let cap = capture_frame(&cfg, &scene, &world, &world.drones[0], &mut capture_rng(cfg.rng_seed, 0, 0)).0;
        let r = register_view(&cap, &cap, &RegisterParams::default(), 1).unwrap();
        assert_eq!(r.confidence, 1.0);
        assert!((r.homography.matrix() - Matrix3::identity()).amax() < 1e-9);
    }

    #[test]
    fn noiseless_registration_matches_ground_homographies() {
        let (cfg, scene, mut world) = sim(0.0, 0.0);
        let k = cfg.intrinsics();
        let reference = capture_frame(&cfg, &scene, &world, &world.drones[2], &mut capture_rng(cfg.rng_seed, 0, 2)).0;
        let g_ref = ground_homography(&world.drones[2].camera(&k)).unwrap();
        for _ in 0..6 {
            world.step(&cfg, cfg.capture_interval);
        }
        let cur = capture_frame(&cfg, &scene, &world, &world.drones[2], &mut capture_rng(cfg.rng_seed, 6, 2)).0;
        let g_cur = ground_homography(&world.drones[2].camera(&k)).unwrap();
        let truth = g_ref.matrix() * g_cur.matrix().try_inverse().unwrap();
        let r = register_view(&cur, &reference, &RegisterParams::default(), 3).unwrap();
        assert_eq!(r.confidence, 1.0);
        assert!(corner_error(r.homography.matrix(), &normalize_homography(truth)) < 1e-6);
    }

    #[test]
    fn consecutive_frames_register_confidently() {
        let (cfg, scene, mut world) = sim(0.5, 0.05);
        let mut prev: Vec<_> =
            world.drones.iter().map(|d| capture_frame(&cfg, &scene, &world, d, &mut capture_rng(cfg.rng_seed, 0, d.id)).0).collect();
        for f in 1..6 {
            world.step(&cfg, cfg.capture_interval);
            for d in &world.drones {
                let cur = capture_frame(&cfg, &scene, &world, d, &mut capture_rng(cfg.rng_seed, f, d.id)).0;
                let r = register_view(&cur, &prev[d.id], &RegisterParams::default(), f as u64).unwrap();
                assert!(r.confidence >= 0.8, "frame {f} drone {}: {}", d.id, r.confidence);
                prev[d.id] = cur;
            }
        }
    }

    #[test]
    fn disjoint_landmark_fields_do_not_register() {
        let (cfg, scene, world) = sim(0.5, 0.05);
        let cap = capture_frame(&cfg, &scene, &world, &world.drones[0], &mut capture_rng(cfg.rng_seed, 0, 0)).0;
        let mut occluded = cap.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        occluded.features = FeatureSet { keypoints: vec![], dim: cap.features.dim, descriptors: vec![] };
        for k in 0..3 {
            occluded.features.push(cap.features.keypoints[k], cap.features.descriptor(k));
        }
        for _ in 0..50 {
            let p = Vector2::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
            occluded.features.push(p, &unit(&mut rng, cap.features.dim));
        }
        assert!(register_view(&occluded, &cap, &RegisterParams::default(), 0).is_err());
    }
}
