use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{Actuation, ContinuumParams, PlantError};
use crate::world::Point3;

/// Where the insertion stage sits in the world: its zero position and the
/// insertion direction (world +z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionFrame {
    pub origin: Point3,
}

impl InsertionFrame {
    pub fn at_origin() -> Self {
        InsertionFrame {
            origin: Point3::zeros(),
        }
    }

    /// Stage placed so that the straight tip sits at world z = 0 when the
    /// stage is at zero travel.
    pub fn tip_at_opening(params: &ContinuumParams) -> Self {
        InsertionFrame {
            origin: Point3::new(0.0, 0.0, -(params.rigid_length + params.flex_length)),
        }
    }
}

/// Camera pose at the distal tip. The camera looks along the local +z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipPose {
    pub position: Point3,
    pub orientation: Rotation3<f64>,
    /// Bend angle of the steerable section (rad, >= 0).
    pub bend: f64,
    /// Plane of the bend about the insertion axis (rad).
    pub bend_plane: f64,
}

impl TipPose {
    pub fn view_dir(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Pose looking from `position` along `forward`, with the camera x axis
    /// as close to world +x as possible.
    pub fn looking(position: Point3, forward: Vector3<f64>) -> Self {
        let z = forward.normalize();
        let rot = Rotation3::rotation_between(&Vector3::z(), &z).unwrap_or_else(|| {
            Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
        });
        TipPose {
            position,
            orientation: rot,
            bend: z.z.clamp(-1.0, 1.0).acos(),
            bend_plane: z.y.atan2(z.x),
        }
    }
}

/// Constant-curvature pose of the tip for actuation `q`.
pub fn forward_kinematics(
    params: &ContinuumParams,
    q: &Actuation,
    base: &InsertionFrame,
) -> Result<TipPose, PlantError> {
    params.check_limits(q)?;
    Ok(pose_unchecked(params, q, base))
}

pub(crate) fn pose_unchecked(
    params: &ContinuumParams,
    q: &Actuation,
    base: &InsertionFrame,
) -> TipPose {
    let (tx, ty) = params.bend_components(q.x, q.y);
    let theta = (tx * tx + ty * ty).sqrt();
    let length = params.flex_length;
    let axial0 = q.z + params.rigid_length;
    if theta < 1e-12 {
        return TipPose {
            position: base.origin + Vector3::new(0.0, 0.0, axial0 + length),
            orientation: Rotation3::identity(),
            bend: 0.0,
            bend_plane: 0.0,
        };
    }
    let phi = ty.atan2(tx);
    let (sp, cp) = phi.sin_cos();
    let half = 0.5 * theta;
    let lateral = length * 2.0 * half.sin() * half.sin() / theta;
    let axial = length * theta.sin() / theta;
    let position = base.origin + Vector3::new(lateral * cp, lateral * sp, axial0 + axial);
    let axis = Unit::new_unchecked(Vector3::new(-sp, cp, 0.0));
    TipPose {
        position,
        orientation: Rotation3::from_axis_angle(&axis, theta),
        bend: theta,
        bend_plane: phi,
    }
}

/// Central-difference Jacobian of the tip position w.r.t. the actuation
/// (rows x, y, z; columns q1, q2, q3).
pub fn fd_plant_jacobian(
    params: &ContinuumParams,
    q: &Actuation,
    h: f64,
    base: &InsertionFrame,
) -> Result<Matrix3<f64>, PlantError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(PlantError::OutOfRange(format!(
            "perturbation {h} must be positive"
        )));
    }
    let mut jac = Matrix3::zeros();
    for n in 0..3 {
        let mut plus = *q;
        let mut minus = *q;
        plus[n] += h;
        minus[n] -= h;
        let a = forward_kinematics(params, &plus, base)?;
        let b = forward_kinematics(params, &minus, base)?;
        jac.set_column(n, &((a.position - b.position) / (2.0 * h)));
    }
    Ok(jac)
}
