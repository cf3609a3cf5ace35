//! Pinhole projection, ground-plane homographies and the BEV grid.
//!
//! World frame is right-handed with `z` up; the ground plane is `z = 0`.
//! Camera frame follows the usual computer-vision convention (`x` right,
//! `y` down, `z` forward along the boresight).

use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Horizontal field of view of the simulated drone cameras, degrees.
pub const DEFAULT_HFOV_DEG: f64 = 70.0;
pub const DEFAULT_IMAGE_WIDTH: u32 = 1920;
pub const DEFAULT_IMAGE_HEIGHT: u32 = 1080;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view.
    pub fn from_hfov(hfov_deg: f64, width: u32, height: u32) -> Self {
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self { fx, fy: fx, cx: width as f64 / 2.0, cy: height as f64 / 2.0, width, height }
    }

    /// 1920x1080, 70 degree horizontal FOV.
    pub fn drone_default() -> Self {
        Self::from_hfov(DEFAULT_HFOV_DEG, DEFAULT_IMAGE_WIDTH, DEFAULT_IMAGE_HEIGHT)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok =
            self.fx > 0.0 && self.fy > 0.0 && self.cx > 0.0 && self.cy > 0.0 && self.cx < self.width as f64 && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics)
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }
}

/// World-to-camera rigid transform: `X_cam = R X_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho >= 1e-9 || (rotation.determinant() - 1.0).abs() >= 1e-9 {
            return Err(GeometryError::NotARotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Pose of a camera at `center` whose boresight has the given yaw
    /// (counter-clockwise from +x, radians) and pitch (positive looks down).
    /// Roll is zero: the image `x` axis stays horizontal.
    pub fn from_yaw_pitch(center: Vector3<f64>, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let forward = Vector3::new(cp * cy, cp * sy, -sp);
        let right = Vector3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        Self { rotation, translation }
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn boresight(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Geodesic angle between two rotations, radians.
    pub fn rotation_error(&self, other: &CameraPose) -> f64 {
        rotation_angle(&(self.rotation * other.rotation.transpose()))
    }
}

pub(crate) fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near zero; recover the sine from the skew part.
    let s = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    s.atan2(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(pub Matrix3x4<f64>);

impl ProjectionMatrix {
    /// `K [R | t]`.
    pub fn compose(k: &CameraIntrinsics, pose: &CameraPose) -> Self {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
        rt.set_column(3, &pose.translation);
        Self(k.matrix() * rt)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    /// Homogeneous depth of a world point; positive in front of the camera.
    pub fn depth(&self, x: &Vector3<f64>) -> f64 {
        self.0.row(2).dot(&x.push(1.0).transpose())
    }
}

/// Projects a world point to pixels. Points at or behind the camera plane are
/// rejected; in-front points outside the image are returned unclamped.
pub fn project_point(p: &ProjectionMatrix, x: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    let h: Vector3<f64> = p.0 * Vector4::new(x.x, x.y, x.z, 1.0);
    if h.z <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok(Vector2::new(h.x / h.z, h.y / h.z))
}

/// Plane-to-plane projective map, normalized so that the bottom-right entry
/// is 1 when it is not near zero and the Frobenius norm is 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

/// Ground plane (`z = 0`, metric) to image pixels.
pub type GroundHomography = Homography;

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let n = normalize_homography(m);
        if !n.iter().all(|v| v.is_finite()) || n.determinant().abs() <= 1e-12 {
            return Err(GeometryError::DegenerateView);
        }
        Ok(Self(n))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self.0.try_inverse().ok_or(GeometryError::DegenerateView)?;
        Self::new(inv)
    }

    /// Applies the map; fails when the result lies on the line at infinity.
    pub fn apply(&self, p: &Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
        apply_h(&self.0, p)
    }

    pub fn compose(&self, rhs: &Homography) -> Result<Self, GeometryError> {
        Self::new(self.0 * rhs.0)
    }
}

pub(crate) fn normalize_homography(m: Matrix3<f64>) -> Matrix3<f64> {
    let h33 = m[(2, 2)];
    if h33.abs() > 1e-9 {
        m / h33
    } else {
        let n = m.norm();
        if n > 0.0 {
            m / n
        } else {
            m
        }
    }
}

#[inline]
pub(crate) fn apply_h(h: &Matrix3<f64>, p: &Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
    let x = h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)];
    let y = h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)];
    let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
    if w.abs() < 1e-12 {
        return Err(GeometryError::AtInfinity);
    }
    Ok(Vector2::new(x / w, y / w))
}

/// Ground homography obtained by dropping the `z` column of `P`.
pub fn ground_homography(p: &ProjectionMatrix) -> Result<GroundHomography, GeometryError> {
    let m = &p.0;
    let h = Matrix3::from_columns(&[m.column(0).into_owned(), m.column(1).into_owned(), m.column(3).into_owned()]);
    // The singularity test runs on a scale-free version so that tiny focal
    // lengths or large translations do not masquerade as degeneracy.
    let scale = h.norm();
    if scale == 0.0 || (h / scale).determinant().abs() <= 1e-12 {
        return Err(GeometryError::DegenerateView);
    }
    Homography::new(h)
}

/// Back-projects a pixel onto the ground plane through `H⁻¹`.
pub fn image_to_ground(h: &GroundHomography, p: &Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
    let inv = h.0.try_inverse().ok_or(GeometryError::DegenerateView)?;
    apply_h(&inv, p)
}

/// Similarity that moves `points` to zero mean and mean distance √2.
pub(crate) fn conditioning_2d(points: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = points.len().max(1) as f64;
    let c = points.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

/// Normalized DLT for the homography taking `src[i]` to `dst[i]`, least
/// squares in the algebraic sense when more than four pairs are given.
/// Fails when the system has a null space of dimension above one (ratio of
/// smallest retained to largest singular value below `1e-12`).
pub fn fit_homography(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Result<Matrix3<f64>, GeometryError> {
    assert_eq!(src.len(), dst.len());
    if src.len() < 4 {
        return Err(GeometryError::DegenerateView);
    }
    let ts = conditioning_2d(src);
    let td = conditioning_2d(dst);
    let rows = (2 * src.len()).max(9);
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in src.iter().zip(dst).enumerate() {
        let p = apply_h(&ts, p).expect("affine");
        let q = apply_h(&td, q).expect("affine");
        let r = 2 * i;
        a[(r, 0)] = -p.x;
        a[(r, 1)] = -p.y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = q.x * p.x;
        a[(r, 7)] = q.x * p.y;
        a[(r, 8)] = q.x;
        a[(r + 1, 3)] = -p.x;
        a[(r + 1, 4)] = -p.y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = q.y * p.x;
        a[(r + 1, 7)] = q.y * p.y;
        a[(r + 1, 8)] = q.y;
    }
    let h = null_vector(a, 8)?;
    let hn = Matrix3::from_row_slice(h.as_slice());
    let td_inv = td.try_inverse().ok_or(GeometryError::DegenerateView)?;
    let m = td_inv * hn * ts;
    let m = normalize_homography(m);
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::DegenerateView);
    }
    Ok(m)
}

/// Right singular vector of the smallest singular value. `rank` is the
/// expected rank; the `rank`-th largest singular value must not vanish
/// relative to the largest.
pub(crate) fn null_vector(a: nalgebra::DMatrix<f64>, rank: usize) -> Result<nalgebra::DVector<f64>, GeometryError> {
    let cols = a.ncols();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateView)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = |k: usize| svd.singular_values[order[k]];
    if order.len() < cols || s(0) == 0.0 || s(rank - 1) / s(0) < 1e-12 {
        return Err(GeometryError::DegenerateView);
    }
    Ok(v_t.row(order[cols - 1]).transpose())
}

/// Regular ground-plane grid. Cell `(i, j)` covers
/// `[origin_x + i·cell, origin_x + (i+1)·cell) × [origin_y + j·cell, origin_y + (j+1)·cell)`,
/// so the first index (`height_cells` of them) runs along world `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub height_cells: usize,
    pub width_cells: usize,
}

impl WorldGrid {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, height_cells: usize, width_cells: usize) -> Result<Self, GeometryError> {
        if !(cell_size > 0.0) || height_cells == 0 || width_cells == 0 {
            return Err(GeometryError::InvalidGrid);
        }
        Ok(Self { origin_x, origin_y, cell_size, height_cells, width_cells })
    }

    /// Square grid covering `[-half_extent, half_extent]²`.
    pub fn covering(half_extent: f64, cell_size: f64) -> Result<Self, GeometryError> {
        let n = ((2.0 * half_extent) / cell_size).ceil().max(1.0) as usize;
        Self::new(-half_extent, -half_extent, cell_size, n, n)
    }

    pub fn len(&self) -> usize {
        self.height_cells * self.width_cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Floor binning; `None` outside the grid footprint.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin_x) / self.cell_size).floor();
        let j = ((y - self.origin_y) / self.cell_size).floor();
        if !(i >= 0.0 && j >= 0.0) || i >= self.height_cells as f64 || j >= self.width_cells as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(self.origin_x + (i as f64 + 0.5) * self.cell_size, self.origin_y + (j as f64 + 0.5) * self.cell_size)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.world_to_cell(x, y).is_some()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.width_cells + j
    }
}
