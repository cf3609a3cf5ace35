//! Per-frame extrinsic recovery from checkerboard corners.
//!
//! A linear estimate seeds a damped Gauss-Newton refinement of the
//! reprojection error. Coplanar targets (the usual case: boards lie on the
//! ground) go through a plane homography, since the full 3×4 DLT has no
//! unique solution for them.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix6, Rotation3, Vector2, Vector3, Vector4, Vector6};
use rayon::prelude::*;

use crate::error::CalibError;
use crate::geometry::{conditioning_2d, fit_homography, null_vector, CameraIntrinsics, CameraPose, ProjectionMatrix};
use crate::simworld::FrameCapture;

pub const MIN_CORRESPONDENCES: usize = 6;
const PLANE_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 50;
const REL_COST_TOL: f64 = 1e-10;
const NO_CONVERGENCE_RMS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Vector3<f64>,
    pub pixel: Vector2<f64>,
    pub corner_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub pose: CameraPose,
    pub projection: ProjectionMatrix,
    /// Root-mean-square reprojection error, pixels.
    pub rms: f64,
    pub correspondences: usize,
    /// Copied from the previous frame because this frame's solve failed.
    pub held_over: bool,
}

pub fn update_projection(k: &CameraIntrinsics, pose: &CameraPose) -> ProjectionMatrix {
    ProjectionMatrix::compose(k, pose)
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor, det +1).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

fn cost(pose: &CameraPose, k: &CameraIntrinsics, corr: &[Correspondence]) -> f64 {
    let mut c = 0.0;
    for x in corr {
        let p = pose.rotation * x.world + pose.translation;
        if p.z <= 0.0 {
            return f64::INFINITY;
        }
        let u = k.fx * p.x / p.z + k.cx - x.pixel.x;
        let v = k.fy * p.y / p.z + k.cy - x.pixel.y;
        c += u * u + v * v;
    }
    c
}

/// Linear pose for points spanning 3D: normalized 3×4 DLT, then `K⁻¹P`
/// split into a scaled rotation and translation.
fn linear_pose_general(corr: &[Correspondence], k: &CameraIntrinsics) -> Result<CameraPose, CalibError> {
    let n = corr.len() as f64;
    let pix: Vec<Vector2<f64>> = corr.iter().map(|c| c.pixel).collect();
    let t2 = conditioning_2d(&pix);
    let c3 = corr.iter().map(|c| c.world).sum::<Vector3<f64>>() / n;
    let d3 = corr.iter().map(|c| (c.world - c3).norm()).sum::<f64>() / n;
    let s3 = if d3 > 0.0 { 3f64.sqrt() / d3 } else { 1.0 };
    let mut t3 = Matrix4::identity() * s3;
    t3[(3, 3)] = 1.0;
    t3.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-c3 * s3));

    let mut a = DMatrix::<f64>::zeros(2 * corr.len(), 12);
    for (i, c) in corr.iter().enumerate() {
        let x: Vector4<f64> = t3 * c.world.push(1.0);
        let u = t2 * c.pixel.push(1.0);
        for j in 0..4 {
            a[(2 * i, j)] = x[j];
            a[(2 * i, 8 + j)] = -u.x * x[j];
            a[(2 * i + 1, 4 + j)] = x[j];
            a[(2 * i + 1, 8 + j)] = -u.y * x[j];
        }
    }
    let p = null_vector(a, 11).map_err(|_| CalibError::Degenerate("rank-deficient DLT system"))?;
    let pn = Matrix3x4::from_row_slice(p.as_slice());
    let t2_inv = t2.try_inverse().ok_or(CalibError::Degenerate("pixel conditioning"))?;
    let pm = t2_inv * pn * t3;
    let m = k.matrix().try_inverse().expect("valid intrinsics") * pm;
    let a3: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let det = a3.determinant();
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(CalibError::Degenerate("singular DLT camera"));
    }
    let lambda = det.cbrt();
    let rotation = nearest_rotation(&(a3 / lambda));
    let translation = m.column(3) / lambda;
    Ok(CameraPose { rotation, translation })
}

/// Linear pose for coplanar points: plane homography `H ∝ K [r1 r2 t]`.
fn linear_pose_planar(
    corr: &[Correspondence],
    k: &CameraIntrinsics,
    centroid: &Vector3<f64>,
    basis: &Matrix3<f64>,
) -> Result<CameraPose, CalibError> {
    // basis columns: e1, e2 in the plane, normal = e1 × e2
    let plane: Vec<Vector2<f64>> = corr
        .iter()
        .map(|c| {
            let d = c.world - centroid;
            Vector2::new(basis.column(0).dot(&d), basis.column(1).dot(&d))
        })
        .collect();
    let pix: Vec<Vector2<f64>> = corr.iter().map(|c| c.pixel).collect();
    let h = fit_homography(&plane, &pix).map_err(|_| CalibError::Degenerate("rank-deficient homography system"))?;
    let m = k.matrix().try_inverse().expect("valid intrinsics") * h;
    let (m1, m2, m3) = (m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned());
    let norm = 0.5 * (m1.norm() + m2.norm());
    if norm <= 0.0 || !norm.is_finite() {
        return Err(CalibError::Degenerate("homography scale"));
    }
    // plane origin must be in front of the camera
    let lambda = if m3.z >= 0.0 { 1.0 / norm } else { -1.0 / norm };
    let r1 = m1 * lambda;
    let r2 = m2 * lambda;
    let t_plane = m3 * lambda;
    let rp = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let rotation = rp * basis.transpose();
    let translation = t_plane - rotation * centroid;
    Ok(CameraPose { rotation, translation })
}

/// Damped Gauss-Newton on `(ω, t)` with left-multiplicative rotation updates.
/// Returns the refined pose, final cost and whether the iteration cap was hit.
fn refine(pose: CameraPose, k: &CameraIntrinsics, corr: &[Correspondence]) -> (CameraPose, f64, bool) {
    let mut pose = pose;
    let mut c = cost(&pose, k, corr);
    let mut mu = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        if c == 0.0 {
            return (pose, c, false);
        }
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for x in corr {
            let rx = pose.rotation * x.world;
            let p = rx + pose.translation;
            let iz = 1.0 / p.z;
            let res = Vector2::new(k.fx * p.x * iz + k.cx - x.pixel.x, k.fy * p.y * iz + k.cy - x.pixel.y);
            // d(pixel)/d(p)
            let dp = nalgebra::Matrix2x3::new(k.fx * iz, 0.0, -k.fx * p.x * iz * iz, 0.0, k.fy * iz, -k.fy * p.y * iz * iz);
            // d(p)/d(ω) = -[R X]×, d(p)/d(t) = I
            let skew = Matrix3::new(0.0, rx.z, -rx.y, -rx.z, 0.0, rx.x, rx.y, -rx.x, 0.0);
            let mut j = nalgebra::Matrix2x6::<f64>::zeros();
            j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dp * skew));
            j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dp);
            jtj += j.transpose() * j;
            jtr += j.transpose() * res;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut a = jtj;
            for d in 0..6 {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-jtr));
            let rot = Rotation3::new(Vector3::new(delta[0], delta[1], delta[2]));
            let cand = CameraPose {
                rotation: rot.matrix() * pose.rotation,
                translation: pose.translation + Vector3::new(delta[3], delta[4], delta[5]),
            };
            let nc = cost(&cand, k, corr);
            if nc < c {
                let rel = (c - nc) / c;
                pose = cand;
                c = nc;
                mu = (mu / 10.0).max(1e-12);
                accepted = true;
                if rel < REL_COST_TOL {
                    return (pose, c, false);
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return (pose, c, false);
        }
    }
    (pose, c, true)
}

/// Recovers `[R | t]` for known intrinsics from ≥ 6 world/pixel pairs.
pub fn solve_pose(corr: &[Correspondence], k: &CameraIntrinsics) -> Result<CalibrationResult, CalibError> {
    if corr.len() < MIN_CORRESPONDENCES {
        return Err(CalibError::Degenerate("fewer than 6 correspondences"));
    }
    if !corr.iter().all(|c| c.world.iter().chain(c.pixel.iter()).all(|v| v.is_finite())) {
        return Err(CalibError::Degenerate("non-finite coordinates"));
    }
    let n = corr.len() as f64;
    let centroid = corr.iter().map(|c| c.world).sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for c in corr {
        let d = c.world - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let e2: Vector3<f64> = eig.eigenvectors.column(order[1]).into_owned();
    let normal = e1.cross(&e2);
    let spread = |dir: &Vector3<f64>| corr.iter().map(|c| dir.dot(&(c.world - centroid)).abs()).fold(0.0, f64::max);
    if spread(&e2) < PLANE_TOLERANCE {
        return Err(CalibError::Degenerate("world points are collinear"));
    }
    let initial = if spread(&normal) < PLANE_TOLERANCE {
        linear_pose_planar(corr, k, &centroid, &Matrix3::from_columns(&[e1, e2, normal]))?
    } else {
        linear_pose_general(corr, k)?
    };
    let (pose, c, capped) = refine(initial, k, corr);
    let rms = (c / n).sqrt();
    if !rms.is_finite() || (capped && rms > NO_CONVERGENCE_RMS) {
        return Err(CalibError::NoConvergence { rms });
    }
    Ok(CalibrationResult { pose, projection: update_projection(k, &pose), rms, correspondences: corr.len(), held_over: false })
}

pub fn correspondences(cap: &FrameCapture) -> Vec<Correspondence> {
    cap.corners.iter().map(|c| Correspondence { world: c.world, pixel: c.pixel, corner_id: c.corner_id }).collect()
}

/// Calibrates every active drone of one frame. `captures[d]` is `None` for a
/// drone that is offline this frame; `previous[d]` is its last good result.
/// A failed solve falls back to the previous result (flagged held over); a
/// failure with nothing to fall back on is a cold-start failure.
pub fn calibrate_frame(
    frame: usize,
    captures: &[Option<&FrameCapture>],
    intrinsics: &[CameraIntrinsics],
    previous: &[Option<CalibrationResult>],
) -> Result<Vec<Option<CalibrationResult>>, CalibError> {
    captures
        .par_iter()
        .enumerate()
        .map(|(d, cap)| {
            let Some(cap) = cap else { return Ok(None) };
            match solve_pose(&correspondences(cap), &intrinsics[d]) {
                Ok(r) => Ok(Some(r)),
                Err(_) => match previous.get(d).copied().flatten() {
                    Some(prev) => Ok(Some(CalibrationResult { held_over: true, ..prev })),
                    None => Err(CalibError::ColdStartFailure { frame, drone: d }),
                },
            }
        })
        .collect()
}
