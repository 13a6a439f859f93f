use serde::{Deserialize, Serialize};

use super::{Actuation, ContinuumParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 4.0,
            ki: 2.0,
            kd: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// Actuator positions, measured velocities and motor loop memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState {
    pub q: Actuation,
    pub q_dot: Actuation,
    pub pid: [PidState; 2],
}

impl ActuatorState {
    pub fn at_rest(q: Actuation) -> Self {
        ActuatorState {
            q,
            ..Default::default()
        }
    }
}

/// One velocity-tracking motor: feedforward of the target plus PID on the
/// velocity error, driving a first-order lag.
fn motor_substep(
    pid: &mut PidState,
    omega: f64,
    target: f64,
    params: &ContinuumParams,
    dt: f64,
) -> f64 {
    let g = params.motor_pid;
    let limit = params.motor_max_speed;
    let error = target - omega;
    let derivative = (error - pid.prev_error) / dt;
    let raw = target + g.kp * error + g.ki * (pid.integral + error * dt) + g.kd * derivative;
    let drive = raw.clamp(-limit, limit);
    // conditional integration: freeze the integrator while saturated
    if raw == drive || raw.signum() != error.signum() {
        pid.integral += error * dt;
    }
    pid.prev_error = error;
    let omega = omega + (drive - omega) * dt / params.motor_time_constant;
    omega.clamp(-limit, limit)
}

/// Advances the actuators by `dt` seconds under a velocity command
/// `(rev/s, rev/s, mm/s)`. Commands beyond the speed limits are clamped.
pub fn step_actuators(
    state: &ActuatorState,
    command: &Actuation,
    dt: f64,
    params: &ContinuumParams,
) -> ActuatorState {
    assert!(dt > 0.0, "actuator step must be positive");
    let mut s = *state;
    let motor_limit = params.motor_max_speed;
    let target = [
        command.x.clamp(-motor_limit, motor_limit),
        command.y.clamp(-motor_limit, motor_limit),
    ];
    let stage_target = command
        .z
        .clamp(-params.stage_max_speed, params.stage_max_speed);

    let n = (dt / params.inner_step).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    for _ in 0..n {
        for m in 0..2 {
            let omega = motor_substep(&mut s.pid[m], s.q_dot[m], target[m], params, h);
            let mut q = s.q[m] + omega * h;
            let travel = params.motor_max_travel;
            let mut w = omega;
            if q.abs() > travel {
                q = q.clamp(-travel, travel);
                w = 0.0;
            }
            s.q[m] = q;
            s.q_dot[m] = w;
        }
        let v = s.q_dot.z + params.stage_gain * (stage_target - s.q_dot.z) * h;
        let v = v.clamp(-params.stage_max_speed, params.stage_max_speed);
        let mut z = s.q.z + v * h;
        let mut v = v;
        if z < 0.0 || z > params.stage_stroke {
            z = z.clamp(0.0, params.stage_stroke);
            v = 0.0;
        }
        s.q.z = z;
        s.q_dot.z = v;
    }
    s
}
