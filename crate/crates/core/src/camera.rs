//! Pinhole camera viewpoints and the default candidate view array.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A posed pinhole camera. Convention: camera x right, y down, z forward
/// (rays leave through +z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub pose: Isometry3<f64>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
}

impl Viewpoint {
    pub fn new(
        pose: Isometry3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        max_range: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidObservation("image dims must be >= 1".into()));
        }
        if !(fx > 0.0 && fy > 0.0 && max_range > 0.0) {
            return Err(Error::InvalidObservation(
                "focal lengths and max range must be positive".into(),
            ));
        }
        Ok(Self { pose, fx, fy, cx, cy, width, height, max_range })
    }

    /// Camera at `eye` looking at `target`, world +z as up (falls back to
    /// +y when the view direction is vertical).
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        fx: f64,
        fy: f64,
        width: usize,
        height: usize,
        max_range: f64,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let up = if forward.z.abs() > 0.999 {
            Vector3::new(0.0, 1.0, 0.0)
        } else {
            Vector3::new(0.0, 0.0, 1.0)
        };
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right).normalize();
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
        let pose = Isometry3::from_parts(
            Translation3::from(eye.coords),
            UnitQuaternion::from_rotation_matrix(&rot),
        );
        Self::new(pose, fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height, max_range)
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.pose.translation.vector)
    }

    /// World-space unit direction through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let x = (u as f64 + 0.5 - self.cx) / self.fx;
        let y = (v as f64 + 0.5 - self.cy) / self.fy;
        let cam = Vector3::new(x, y, 1.0).normalize();
        self.pose.rotation * cam
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Default candidate view array: a planar grid of poses in front of the
/// shelf opening, all aimed at the shelf interior center.
pub fn default_view_grid(spec: &GridSpec) -> Vec<Viewpoint> {
    view_grid(spec, 10, 6, 0.3)
}

/// Planar `nx * nz` grid of camera poses at `standoff` meters in front of
/// the opening face (low y), aimed at the workspace center.
pub fn view_grid(spec: &GridSpec, nx: usize, nz: usize, standoff: f64) -> Vec<Viewpoint> {
    let lo = spec.origin;
    let hi = spec.max_corner();
    let target = Point3::new(
        (lo.x + hi.x) / 2.0,
        (lo.y + hi.y) / 2.0,
        (lo.z + hi.z) / 2.0,
    );
    let mut views = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            let fx_frac = if nx > 1 { ix as f64 / (nx - 1) as f64 } else { 0.5 };
            let fz_frac = if nz > 1 { iz as f64 / (nz - 1) as f64 } else { 0.5 };
            let x = lo.x + (0.05 + 0.9 * fx_frac) * (hi.x - lo.x);
            let z = lo.z + (0.1 + 0.8 * fz_frac) * (hi.z - lo.z);
            let eye = Point3::new(x, lo.y - standoff, z);
            views.push(
                Viewpoint::look_at(eye, target, 40.0, 40.0, 64, 48, 2.0)
                    .expect("grid view is valid"),
            );
        }
    }
    views
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn look_at_points_forward() {
        let v = Viewpoint::look_at(
            Point3::new(0.4, -0.3, 0.2),
            Point3::new(0.4, 0.2, 0.2),
            40.0,
            40.0,
            64,
            48,
            2.0,
        )
        .unwrap();
        // Center pixel ray goes along +y toward the target.
        let d = v.pixel_ray(32, 24);
        assert!(d.y > 0.99, "center ray {d:?}");
        // Rotation is a proper rigid transform.
        let r = v.pose.rotation.to_rotation_matrix();
        assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn default_grid_size_and_bounds() {
        let spec = GridSpec::default_shelf();
        let views = default_view_grid(&spec);
        assert_eq!(views.len(), 60);
        for v in &views {
            assert!(v.position().y < 0.0, "cameras sit in front of the opening");
        }
    }

    #[test]
    fn zero_dims_rejected() {
        let pose = Isometry3::identity();
        assert!(Viewpoint::new(pose, 40.0, 40.0, 32.0, 24.0, 0, 48, 2.0).is_err());
    }
}
