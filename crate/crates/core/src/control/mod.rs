//! Model-less visual servoing: image Jacobian probing, the attractive
//! potential well, resolved rates and the centering/advancing mode machine.

use nalgebra::{Matrix2x3, Matrix3x2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::ImagePoint;
use crate::plant::Actuation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("jacobian probe step is zero")]
    ZeroStep,
    #[error("target lost while probing actuator {0}")]
    TargetLostDuringProbe(usize),
    #[error("target lost for {0:.1} s")]
    Aborted(f64),
    #[error("invalid control parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// Quadratic core, conic far field, continuous gradient.
    Standard,
    /// `psi1 = min(1, rho/delta)` taken literally: cubic core and a jump in
    /// the gradient at `rho = delta`.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    /// Radius of the quadratic core of the well (px).
    pub delta: f64,
    /// Insertion is allowed inside this radius (px).
    pub delta_c: f64,
    /// Control period (s).
    pub dt: f64,
    pub mass: f64,
    /// Velocity damping per step, in [0, 1).
    pub damping: f64,
    /// Forward speed while advancing (mm/s).
    pub insertion_speed: f64,
    /// Motor perturbation used to probe the Jacobian (rev).
    pub jac_step: f64,
    /// Stage perturbation used to probe the Jacobian (mm).
    pub insertion_probe_step: f64,
    pub lost_timeout: f64,
    /// Well gain (1/s^2).
    pub gain: f64,
    /// Task-space speed limit (px/s).
    pub max_speed: f64,
    pub potential: PotentialKind,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            delta: 25.0,
            delta_c: 15.0,
            dt: 0.1,
            mass: 1.0,
            damping: 0.15,
            insertion_speed: 2.0,
            jac_step: 0.05,
            insertion_probe_step: 1.0,
            lost_timeout: 5.0,
            gain: 1.0,
            max_speed: 200.0,
            potential: PotentialKind::Standard,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidParams(m.into()));
        if !(self.delta_c > 0.0 && self.delta_c < self.delta) {
            return bad("need 0 < delta_c < delta");
        }
        if !(self.dt > 0.0 && self.mass > 0.0 && self.insertion_speed > 0.0) {
            return bad("dt, mass and insertion_speed must be positive");
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping must lie in [0, 1)");
        }
        if !(self.gain > 0.0 && self.max_speed > 0.0 && self.lost_timeout > 0.0) {
            return bad("gain, max_speed and lost_timeout must be positive");
        }
        if !(self.jac_step.is_finite() && self.insertion_probe_step.is_finite()) {
            return bad("probe steps must be finite");
        }
        Ok(())
    }
}

/// `r = c - p_hat`: points from the target toward the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorVector {
    pub r: Vector2<f64>,
    pub rho: f64,
}

impl ErrorVector {
    pub fn new(r: Vector2<f64>) -> Self {
        ErrorVector { r, rho: r.norm() }
    }

    pub fn between(center: ImagePoint, target: ImagePoint) -> Self {
        ErrorVector::new(Vector2::new(center.x - target.x, center.y - target.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianEstimate {
    /// px per (rev, rev, mm).
    pub full: Matrix2x3<f64>,
}

impl JacobianEstimate {
    pub fn new(full: Matrix2x3<f64>) -> Self {
        JacobianEstimate { full }
    }

    /// Copy with the insertion column zeroed.
    pub fn centering(&self) -> Matrix2x3<f64> {
        let mut m = self.full;
        m.column_mut(2).fill(0.0);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Centering,
    Advancing,
    Lost,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Centering => "centering",
            Mode::Advancing => "advancing",
            Mode::Lost => "lost",
        }
    }

    pub fn from_name(name: &str) -> Option<Mode> {
        [Mode::Centering, Mode::Advancing, Mode::Lost]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub mode: Mode,
    /// Task-space velocity (px/s).
    pub v: Vector2<f64>,
    pub time_lost: f64,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            mode: Mode::Centering,
            v: Vector2::zeros(),
            time_lost: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Target(ImagePoint),
    NoTarget,
}

/// The well itself, for checking the gradient. The constant of the far
/// field makes the two branches meet at `rho = delta`.
pub fn potential(r: &ErrorVector, params: &ControlParams) -> f64 {
    let (z, d, rho) = (params.gain, params.delta, r.rho);
    match params.potential {
        PotentialKind::Standard => {
            if rho < d {
                0.5 * z * rho * rho
            } else {
                z * d * rho - 0.5 * z * d * d
            }
        }
        PotentialKind::Clamped => {
            if rho < d {
                0.5 * z * rho * rho * rho / d
            } else {
                z * d * rho - 0.5 * z * d * d
            }
        }
    }
}

/// Gradient of the well with respect to the error, pointing along `r`.
pub fn potential_gradient(r: &ErrorVector, params: &ControlParams) -> Vector2<f64> {
    let (z, d, rho) = (params.gain, params.delta, r.rho);
    if rho == 0.0 {
        return Vector2::zeros();
    }
    let scale = match params.potential {
        PotentialKind::Standard if rho < d => z,
        PotentialKind::Clamped if rho < d => 1.5 * z * rho / d,
        _ => z * d / rho,
    };
    r.r * scale
}

/// One damped Euler step of `m dv/dt = grad U`, then the speed clamp.
pub fn velocity_update(v: &Vector2<f64>, r: &ErrorVector, params: &ControlParams) -> Vector2<f64> {
    let next =
        v * (1.0 - params.damping) + potential_gradient(r, params) * (params.dt / params.mass);
    let speed = next.norm();
    if speed > params.max_speed {
        next * (params.max_speed / speed)
    } else {
        next
    }
}

/// Moore-Penrose pseudoinverse through the SVD; singular values below
/// `1e-8 * sigma_max` are dropped.
pub fn pseudo_inverse(m: &Matrix2x3<f64>) -> Matrix3x2<f64> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Matrix3x2::zeros();
    }
    svd.pseudo_inverse(1e-8 * smax)
        .expect("u and v were computed")
}

pub fn resolved_rates(jac: &JacobianEstimate, v: &Vector2<f64>, centering: bool) -> Actuation {
    let m = if centering { jac.centering() } else { jac.full };
    let mut q_dot = pseudo_inverse(&m) * v;
    if centering {
        // exact zero, not just a tiny pseudoinverse entry
        q_dot.z = 0.0;
    }
    q_dot
}

/// One controller tick. Returns the actuator velocity command.
pub fn control_step(
    state: &ControllerState,
    observation: Observation,
    center: ImagePoint,
    params: &ControlParams,
    jac: &JacobianEstimate,
) -> Result<(Actuation, ControllerState), ControlError> {
    match observation {
        Observation::NoTarget => {
            let time_lost = state.time_lost + params.dt;
            if time_lost >= params.lost_timeout - 1e-9 {
                return Err(ControlError::Aborted(time_lost));
            }
            let next = ControllerState {
                mode: Mode::Lost,
                v: state.v,
                time_lost,
            };
            Ok((Actuation::zeros(), next))
        }
        Observation::Target(p) => {
            let r = ErrorVector::between(center, p);
            if r.rho < params.delta_c {
                let next = ControllerState {
                    mode: Mode::Advancing,
                    v: Vector2::zeros(),
                    time_lost: 0.0,
                };
                Ok((Actuation::new(0.0, 0.0, params.insertion_speed), next))
            } else {
                let v = velocity_update(&state.v, &r, params);
                let next = ControllerState {
                    mode: Mode::Centering,
                    v,
                    time_lost: 0.0,
                };
                Ok((resolved_rates(jac, &v, true), next))
            }
        }
    }
}

/// Something that can hold the actuators at `q` and report the filtered
/// target position seen there.
pub trait FeatureSource {
    fn feature_at(&mut self, q: &Actuation) -> Option<ImagePoint>;
}

/// Central differences of the target position around `q0`, one actuator at
/// a time. Motors move by `jac_step` rev, the stage by `insertion_step` mm.
pub fn estimate_jacobian<S: FeatureSource>(
    source: &mut S,
    q0: &Actuation,
    jac_step: f64,
    insertion_step: f64,
) -> Result<JacobianEstimate, ControlError> {
    if jac_step == 0.0 || insertion_step == 0.0 {
        return Err(ControlError::ZeroStep);
    }
    let mut full = Matrix2x3::zeros();
    for n in 0..3 {
        let h = if n == 2 { insertion_step } else { jac_step };
        let mut plus = *q0;
        plus[n] += h;
        let mut minus = *q0;
        minus[n] -= h;
        let fp = source
            .feature_at(&plus)
            .ok_or(ControlError::TargetLostDuringProbe(n))?;
        let fm = source
            .feature_at(&minus)
            .ok_or(ControlError::TargetLostDuringProbe(n))?;
        full[(0, n)] = (fp.x - fm.x) / (2.0 * h);
        full[(1, n)] = (fp.y - fm.y) / (2.0 * h);
    }
    Ok(JacobianEstimate { full })
}

#[cfg(test)]
mod tests;
