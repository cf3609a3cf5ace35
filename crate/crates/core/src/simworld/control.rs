//! Gimbal PID and velocity-based position control.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 0.0002, ki: 0.00002, kd: 0.0001 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// One discrete PID update:
/// `u = kp·e + ki·(I + e·dt) + kd·(e − e_prev)/dt`, with the integral clamped
/// to `±integral_limit`. Returns `u`; `state` is advanced in place.
pub fn pid_step(error: f64, dt: f64, gains: &PidGains, integral_limit: f64, state: &mut PidState) -> f64 {
    debug_assert!(dt > 0.0);
    let integral = (state.integral + error * dt).clamp(-integral_limit, integral_limit);
    let derivative = (error - state.prev_error) / dt;
    state.integral = integral;
    state.prev_error = error;
    gains.kp * error + gains.ki * integral + gains.kd * derivative
}

pub const VELOCITY_EPS: f64 = 1e-6;

/// Constant-speed velocity toward the target; zero once within `1e-6` m.
pub fn velocity_command(current: &Vector3<f64>, target: &Vector3<f64>, v_max: f64) -> Vector3<f64> {
    let d = target - current;
    let n = d.norm();
    if n <= VELOCITY_EPS {
        Vector3::zeros()
    } else {
        d * (v_max / n)
    }
}
