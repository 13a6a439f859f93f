//! Simulated tendon-driven endoscope.
//!
//! Two antagonistic tendon pairs, each wound on one motor pulley, bend a
//! 70 mm steerable section with constant curvature. The section sits on a
//! 58 mm rigid body carried by a linear insertion stage. Actuator velocities
//! are tracked by PID loops around a first-order motor lag (bending motors)
//! and a proportional loop (stage).

mod actuators;
mod kinematics;

pub use actuators::{step_actuators, ActuatorState, PidGains, PidState};
pub use kinematics::{fd_plant_jacobian, forward_kinematics, InsertionFrame, TipPose};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Actuation vector `(q1 motor rev, q2 motor rev, q3 insertion mm)`.
pub type Actuation = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("actuation out of range: {0}")]
    OutOfRange(String),
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuumParams {
    /// Steerable section length (mm).
    pub flex_length: f64,
    /// Rigid body between the steerable section and the stage (mm).
    pub rigid_length: f64,
    pub outer_diameter: f64,
    /// Radial offset of the tendons from the backbone axis (mm).
    pub tendon_pitch_radius: f64,
    pub pulley_radius: f64,
    /// Bending motor speed limit (rev/s).
    pub motor_max_speed: f64,
    /// Bending motor travel limit (|rev|).
    pub motor_max_travel: f64,
    /// Half-width of the cable slack band around zero (motor rev).
    pub dead_zone: f64,
    /// Extra tendon gain when motor 1 turns positive.
    pub asymmetry_gain: f64,
    /// Insertion stage speed limit (mm/s).
    pub stage_max_speed: f64,
    pub stage_stroke: f64,
    pub motor_pid: PidGains,
    /// Motor velocity lag (s).
    pub motor_time_constant: f64,
    /// Proportional gain of the stage velocity loop (1/s).
    pub stage_gain: f64,
    /// Integration step for the actuator loops (s).
    pub inner_step: f64,
}

impl Default for ContinuumParams {
    fn default() -> Self {
        ContinuumParams {
            flex_length: 70.0,
            rigid_length: 58.0,
            outer_diameter: 10.0,
            tendon_pitch_radius: 4.0,
            pulley_radius: 0.5,
            motor_max_speed: 0.5,
            motor_max_travel: 1.0,
            dead_zone: 0.02,
            asymmetry_gain: 1.05,
            stage_max_speed: 10.0,
            stage_stroke: 200.0,
            motor_pid: PidGains::default(),
            motor_time_constant: 0.05,
            stage_gain: 5.0,
            inner_step: 1e-3,
        }
    }
}

impl ContinuumParams {
    /// Same geometry without slack or tendon asymmetry.
    pub fn ideal() -> Self {
        ContinuumParams {
            dead_zone: 0.0,
            asymmetry_gain: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("flex_length", self.flex_length),
            ("rigid_length", self.rigid_length),
            ("outer_diameter", self.outer_diameter),
            ("tendon_pitch_radius", self.tendon_pitch_radius),
            ("pulley_radius", self.pulley_radius),
            ("motor_max_speed", self.motor_max_speed),
            ("motor_max_travel", self.motor_max_travel),
            ("stage_max_speed", self.stage_max_speed),
            ("stage_stroke", self.stage_stroke),
            ("motor_time_constant", self.motor_time_constant),
            ("stage_gain", self.stage_gain),
            ("inner_step", self.inner_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidParams(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.dead_zone.is_finite() && self.dead_zone >= 0.0) {
            return Err(PlantError::InvalidParams("dead_zone must be >= 0".into()));
        }
        if !(self.dead_zone < self.motor_max_travel) {
            return Err(PlantError::InvalidParams(
                "dead_zone exceeds motor travel".into(),
            ));
        }
        if !(self.asymmetry_gain > 0.5 && self.asymmetry_gain <= 1.5) {
            return Err(PlantError::InvalidParams(format!(
                "asymmetry_gain {} outside (0.5, 1.5]",
                self.asymmetry_gain
            )));
        }
        let g = self.motor_pid;
        if !(g.kp.is_finite()
            && g.ki.is_finite()
            && g.kd.is_finite()
            && g.kp >= 0.0
            && g.ki >= 0.0
            && g.kd >= 0.0)
        {
            return Err(PlantError::InvalidParams(
                "PID gains must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Bend angle produced per motor revolution outside the dead zone (rad/rev).
    pub fn bend_per_rev(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.pulley_radius / self.tendon_pitch_radius
    }

    /// Effective motor travel after the slack band.
    fn slack(&self, q: f64) -> f64 {
        let excess = q.abs() - self.dead_zone;
        if excess <= 0.0 {
            0.0
        } else {
            excess.copysign(q)
        }
    }

    /// Bend components `(theta_x, theta_y)` in rad for the two motor angles.
    pub fn bend_components(&self, q1: f64, q2: f64) -> (f64, f64) {
        let k = self.bend_per_rev();
        let m1 = self.slack(q1);
        let m1 = if m1 > 0.0 {
            m1 * self.asymmetry_gain
        } else {
            m1
        };
        (k * m1, k * self.slack(q2))
    }

    /// Motor angles that produce bend `theta` in plane `phi`.
    pub fn motors_for_bend(&self, theta: f64, phi: f64) -> (f64, f64) {
        let k = self.bend_per_rev();
        let (tx, ty) = (theta * phi.cos(), theta * phi.sin());
        let unslack = |m: f64| {
            if m == 0.0 {
                0.0
            } else {
                (m.abs() + self.dead_zone).copysign(m)
            }
        };
        let m1 = tx / k;
        let m1 = if m1 > 0.0 {
            m1 / self.asymmetry_gain
        } else {
            m1
        };
        (unslack(m1), unslack(ty / k))
    }

    pub fn check_limits(&self, q: &Actuation) -> Result<(), PlantError> {
        if !q.iter().all(|v| v.is_finite()) {
            return Err(PlantError::OutOfRange("non-finite actuation".into()));
        }
        let lim = self.motor_max_travel + 1e-12;
        if q.x.abs() > lim || q.y.abs() > lim {
            return Err(PlantError::OutOfRange(format!(
                "motor angles ({}, {}) exceed +/-{} rev",
                q.x, q.y, self.motor_max_travel
            )));
        }
        if q.z < -1e-12 || q.z > self.stage_stroke + 1e-12 {
            return Err(PlantError::OutOfRange(format!(
                "insertion {} outside [0, {}] mm",
                q.z, self.stage_stroke
            )));
        }
        Ok(())
    }
}
