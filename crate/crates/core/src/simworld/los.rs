//! Segment visibility against axis-aligned boxes (slab method).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_center_half_extents(center: Vector3<f64>, half: Vector3<f64>) -> Self {
        Self { min: center - half, max: center + half }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|k| self.min[k] <= self.max[k]) && self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())
    }

    /// Ground footprint test with a clearance margin.
    pub fn footprint_contains(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.min.x - margin && x <= self.max.x + margin && y >= self.min.y - margin && y <= self.max.y + margin
    }

    /// Parametric interval `[t0, t1] ⊆ [0, 1]` of `a + t(b − a)` inside the
    /// (closed) box, or `None`.
    pub fn clip_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Option<(f64, f64)> {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            if d[k] == 0.0 {
                if a[k] < self.min[k] || a[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[k];
            let (mut ta, mut tb) = ((self.min[k] - a[k]) * inv, (self.max[k] - a[k]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// `true` (visible) iff the segment from `camera` to `target` misses every box.
pub fn line_of_sight(camera: &Vector3<f64>, target: &Vector3<f64>, boxes: &[Aabb]) -> bool {
    boxes.iter().all(|b| b.clip_segment(camera, target).is_none())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(center: Vector3<f64>, half: Vector3<f64>) -> Aabb {
        Aabb::from_center_half_extents(center, half)
    }

    #[test]
    fn segment_passing_over_box_corner_is_visible() {
        // x-slab gives t ∈ [0.4, 0.6], z-slab gives t ∈ [0.625, 1.125]: disjoint.
        let c = Vector3::new(10.0, 0.0, 8.0);
        let p = Vector3::zeros();
        let b = column(Vector3::new(5.0, 0.0, 1.0), Vector3::new(1.0, 1.0, 2.0));
        assert_eq!(b.clip_segment(&c, &p), None);
        assert!(line_of_sight(&c, &p, &[b]));
    }

    #[test]
    fn segment_piercing_box_is_blocked() {
        let c = Vector3::new(10.0, 0.0, 8.0);
        let p = Vector3::zeros();
        let b = column(Vector3::new(5.0, 0.0, 1.0), Vector3::new(1.0, 1.0, 4.0));
        let (t0, t1) = b.clip_segment(&c, &p).unwrap();
        assert!((t0 - 0.4).abs() < 1e-12 && (t1 - 0.6).abs() < 1e-12);
        assert!(!line_of_sight(&c, &p, &[b]));
    }

    #[test]
    fn no_boxes_means_visible() {
        assert!(line_of_sight(&Vector3::new(10.0, 0.0, 8.0), &Vector3::zeros(), &[]));
    }

    #[test]
    fn box_beyond_segment_ends_is_ignored() {
        let c = Vector3::new(10.0, 0.0, 8.0);
        let p = Vector3::zeros();
        // on the ray's extension behind the camera
        let behind = column(Vector3::new(15.0, 0.0, 12.0), Vector3::new(1.0, 1.0, 1.0));
        // on the extension past the target
        let past = column(Vector3::new(-5.0, 0.0, -4.0), Vector3::new(1.0, 1.0, 1.0));
        assert!(line_of_sight(&c, &p, &[behind, past]));
    }

    #[test]
    fn axis_parallel_segment() {
        let b = column(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0));
        assert!(!line_of_sight(&Vector3::new(-5.0, 0.0, 0.0), &Vector3::new(5.0, 0.0, 0.0), &[b]));
        assert!(line_of_sight(&Vector3::new(-5.0, 2.0, 0.0), &Vector3::new(5.0, 2.0, 0.0), &[b]));
    }
}
