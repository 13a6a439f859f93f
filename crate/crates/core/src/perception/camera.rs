use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PerceptionError;
use crate::plant::TipPose;

/// Pinhole camera at the tip. Image column `u` grows along the camera x axis
/// and row `w` along the camera y axis; the optical axis is camera +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view (rad).
    pub horizontal_fov: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            width: 1280,
            height: 960,
            horizontal_fov: 1.309,
        }
    }
}

impl CameraModel {
    pub fn new(width: u32, height: u32, horizontal_fov: f64) -> Result<Self, PerceptionError> {
        let cam = CameraModel {
            width,
            height,
            horizontal_fov,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.width == 0 || self.height == 0 {
            return Err(PerceptionError::InvalidConfig(
                "camera has zero size".into(),
            ));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < std::f64::consts::PI) {
            return Err(PerceptionError::InvalidConfig(format!(
                "field of view {} outside (0, pi)",
                self.horizontal_fov
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.horizontal_fov).tan()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Unit ray through image point `(u, w)` in camera coordinates.
    pub fn ray_camera(&self, u: f64, w: f64) -> Vector3<f64> {
        let (cx, cy) = self.center();
        let f = self.focal();
        Vector3::new((u - cx) / f, (w - cy) / f, 1.0).normalize()
    }

    /// Unit ray through image point `(u, w)` in world coordinates.
    pub fn ray_world(&self, pose: &TipPose, u: f64, w: f64) -> Vector3<f64> {
        pose.orientation * self.ray_camera(u, w)
    }

    /// Per-pose precomputation of [`ray_world`](Self::ray_world).
    pub(crate) fn ray_basis(&self, pose: &TipPose) -> RayBasis {
        let (cx, cy) = self.center();
        let f = self.focal();
        let m = pose.orientation.matrix();
        let du = m.column(0) / f;
        let dw = m.column(1) / f;
        RayBasis {
            du: du.into(),
            dw: dw.into(),
            base: (m.column(2) - du * cx - dw * cy).into(),
        }
    }

    /// Image point of a camera-frame direction, `None` behind the camera.
    pub fn project(&self, dir_camera: &Vector3<f64>) -> Option<(f64, f64)> {
        if dir_camera.z <= 0.0 {
            return None;
        }
        let (cx, cy) = self.center();
        let f = self.focal();
        Some((
            cx + f * dir_camera.x / dir_camera.z,
            cy + f * dir_camera.y / dir_camera.z,
        ))
    }

    /// Scaled copy with the same field of view.
    pub fn scaled(&self, factor: u32) -> CameraModel {
        CameraModel {
            width: self.width * factor,
            height: self.height * factor,
            horizontal_fov: self.horizontal_fov,
        }
    }
}

pub(crate) struct RayBasis {
    du: Vector3<f64>,
    dw: Vector3<f64>,
    base: Vector3<f64>,
}

impl RayBasis {
    #[inline]
    pub(crate) fn dir(&self, u: u32, w: u32) -> Vector3<f64> {
        (self.base + self.du * u as f64 + self.dw * w as f64).normalize()
    }
}
