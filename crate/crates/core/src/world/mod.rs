//! Tubular phantom geometry: centerlines, distance queries, camera rays and
//! the goal plane.

mod path;
mod raycast;

pub use path::{BuiltinPathParams, LumenPath, PathKind, Point3, Segment};
pub(crate) use raycast::TubeView;
pub use raycast::{ray_tube_hit, ray_tube_hit_with, HitResult, MarchSettings};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// Outer diameter of the robot tip (mm); the lumen must be wider.
pub const TIP_RADIUS: f64 = 5.0;

/// Tube interior: every point within `inner_radius` of the centerline,
/// bounded by the planes through the two path ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TubePhantom {
    path: LumenPath,
    inner_radius: f64,
    wall_thickness: f64,
}

impl TubePhantom {
    pub fn new(
        path: LumenPath,
        inner_radius: f64,
        wall_thickness: f64,
    ) -> Result<Self, WorldError> {
        if !(inner_radius.is_finite() && inner_radius > TIP_RADIUS) {
            return Err(WorldError::InvalidGeometry(format!(
                "inner radius {inner_radius} mm must exceed the tip radius {TIP_RADIUS} mm"
            )));
        }
        if !(wall_thickness.is_finite() && wall_thickness >= 0.0) {
            return Err(WorldError::InvalidGeometry(
                "negative wall thickness".into(),
            ));
        }
        Ok(TubePhantom {
            path,
            inner_radius,
            wall_thickness,
        })
    }

    /// 15 mm bore with a 1.5 mm wall.
    pub fn with_default_bore(path: LumenPath) -> Self {
        TubePhantom::new(path, 7.5, 1.5).expect("default bore is valid")
    }

    pub fn path(&self) -> &LumenPath {
        &self.path
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn wall_thickness(&self) -> f64 {
        self.wall_thickness
    }

    /// Signed distance from `p` to the start and end planes; positive means
    /// between them.
    fn cap_margins(&self, p: &Point3) -> (f64, f64) {
        let path = &self.path;
        let front = (p - path.start_point()).dot(&path.start_tangent());
        let back = (path.end_point() - p).dot(&path.end_tangent());
        (front, back)
    }

    /// Whether `p` lies between the end planes of the path.
    pub fn is_projectable(&self, p: &Point3) -> bool {
        let (front, back) = self.cap_margins(p);
        front >= -1e-9 && back >= -1e-9
    }

    /// Strictly inside the bore and between the end planes.
    pub fn contains(&self, p: &Point3) -> bool {
        let (front, back) = self.cap_margins(p);
        front >= 0.0 && back > 0.0 && self.path.closest(p).0 < self.inner_radius
    }

    /// Distance to the centerline and remaining clearance to the wall.
    pub fn radial_clearance(&self, p: &Point3) -> Result<(f64, f64), WorldError> {
        if !self.is_projectable(p) {
            return Err(WorldError::OutOfRange(format!(
                "point ({:.3}, {:.3}, {:.3}) lies beyond the path ends",
                p.x, p.y, p.z
            )));
        }
        let (dist, _) = self.path.closest(p);
        Ok((dist, self.inner_radius - dist))
    }
}

/// Virtual finish line perpendicular to the insertion axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPlane {
    pub origin: Point3,
    normal: Vector3<f64>,
}

impl GoalPlane {
    pub fn new(origin: Point3, normal: Vector3<f64>) -> Result<Self, WorldError> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(WorldError::InvalidGeometry(
                "goal normal has zero length".into(),
            ));
        }
        Ok(GoalPlane {
            origin,
            normal: normal / n,
        })
    }

    /// Plane at `depth` mm along the insertion axis.
    pub fn at_depth(depth: f64) -> Self {
        GoalPlane {
            origin: Point3::new(0.0, 0.0, depth),
            normal: Vector3::z(),
        }
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn crossed(&self, tip: &Point3) -> bool {
        goal_crossed(self, tip)
    }
}

/// Inclusive: a tip exactly on the plane counts as crossed.
pub fn goal_crossed(plane: &GoalPlane, tip: &Point3) -> bool {
    (tip - plane.origin).dot(&plane.normal) >= 0.0
}

/// Depth of the goal plane used by every built-in path (mm).
pub const DEFAULT_GOAL_DEPTH: f64 = 130.0;
