use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_angle, HoldStepper, Pendulum, PendulumParams, Trajectory};
use crate::Result;

/// Per-step reward `-(theta^2 + 0.1 theta_dot^2 + 1e-4 u_prev^2)`.
pub fn reward(theta: f64, theta_dot: f64, u_prev: f64) -> f64 {
    -(theta * theta + 0.1 * theta_dot * theta_dot + 1e-4 * u_prev * u_prev)
}

/// Swing-up success: the wrapped angle and rate stay inside the band over
/// the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub angle_tol: f64,
    pub rate_tol: f64,
    /// Trailing window length (s).
    pub window: f64,
}

impl Default for SuccessCriterion {
    fn default() -> Self {
        Self { angle_tol: 0.1, rate_tol: 0.2, window: 2.0 }
    }
}

impl SuccessCriterion {
    /// `angle_index`/`rate_index` select the channels; the angle is wrapped.
    pub fn holds(&self, traj: &Trajectory, angle_index: usize, rate_index: usize) -> bool {
        let t_end = traj.final_time();
        let mut seen = false;
        for (i, &t) in traj.times().iter().enumerate() {
            if t < t_end - self.window - 1e-9 {
                continue;
            }
            seen = true;
            let s = traj.state(i);
            if wrap_angle(s[angle_index]).abs() >= self.angle_tol || s[rate_index].abs() >= self.rate_tol {
                return false;
            }
        }
        seen
    }
}

/// Pendulum training environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumEnvSpec {
    pub params: PendulumParams,
    pub control_period: f64,
    pub t_final: f64,
    /// Torque limit applied to the actor output (N m).
    pub saturation: f64,
    pub initial_state: [f64; 2],
}

impl Default for PendulumEnvSpec {
    fn default() -> Self {
        Self {
            params: PendulumParams::nominal(),
            control_period: 0.05,
            t_final: 20.0,
            saturation: 30.0,
            initial_state: [PI, 0.0],
        }
    }
}

impl PendulumEnvSpec {
    pub fn steps(&self) -> usize {
        (self.t_final / self.control_period).round() as usize
    }
}

/// Episode state of the pendulum environment.
pub struct PendulumEnv {
    stepper: HoldStepper<Pendulum>,
}

impl PendulumEnv {
    pub fn new(params: PendulumParams, period: f64, initial_state: [f64; 2]) -> Result<Self> {
        params.validate()?;
        Ok(Self { stepper: HoldStepper::new(Pendulum(params), initial_state.to_vec(), period)? })
    }

    /// Observation `(wrapped theta, theta_dot)`.
    pub fn observation(&self) -> [f64; 2] {
        let s = self.stepper.state();
        [wrap_angle(s[0]), s[1]]
    }

    /// Unwrapped plant state.
    pub fn state(&self) -> [f64; 2] {
        let s = self.stepper.state();
        [s[0], s[1]]
    }

    /// Applies `torque` for one period; returns the new observation and reward.
    pub fn step(&mut self, torque: f64) -> Result<([f64; 2], f64)> {
        self.stepper.hold(torque)?;
        let obs = self.observation();
        Ok((obs, reward(obs[0], obs[1], torque)))
    }
}
