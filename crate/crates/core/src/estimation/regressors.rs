use serde::{Deserialize, Serialize};

use crate::dynamics::{PendulumParams, Trajectory};
use crate::{Error, Result};

/// One linear measurement `y = phi' psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSample {
    pub phi: Vec<f64>,
    pub y: f64,
}

/// Coefficients `(1/(m l^2), g/l)` multiplying `(u, sin theta)` in the
/// angular acceleration.
pub fn true_coefficients(p: &PendulumParams) -> [f64; 2] {
    [1.0 / (p.m * p.l * p.l), p.g / p.l]
}

/// Regressor for the hold interval between two sampled states.
///
/// `y` is the backward difference of the rate; `sin theta` is averaged over
/// the interval endpoints so both sides describe the same interval.
pub fn regressor_sample(prev: [f64; 2], next: [f64; 2], u: f64, dt: f64) -> RegressorSample {
    let y = (next[1] - prev[1]) / dt;
    let s = 0.5 * (prev[0].sin() + next[0].sin());
    RegressorSample { phi: vec![u, s], y }
}

/// Regressors from a pendulum trajectory recorded at the hold instants.
pub fn pendulum_regressors(traj: &Trajectory) -> Result<Vec<RegressorSample>> {
    if traj.len() < 2 || traj.dim() != 2 {
        return Err(Error::InvalidInput("need a pendulum trajectory with at least two samples".into()));
    }
    let times = traj.times();
    Ok((1..traj.len())
        .map(|i| {
            let (a, b) = (traj.state(i - 1), traj.state(i));
            regressor_sample([a[0], a[1]], [b[0], b[1]], traj.controls()[i - 1], times[i] - times[i - 1])
        })
        .collect())
}

/// `(l, m)` from `psi = (1/(m l^2), g/l)`.
pub fn recover_params(psi: &[f64], g: f64) -> Result<(f64, f64)> {
    if psi.len() != 2 {
        return Err(Error::InvalidInput("pendulum estimate has two coefficients".into()));
    }
    if !(psi[0] > 0.0 && psi[1] > 0.0) || !psi[0].is_finite() || !psi[1].is_finite() {
        return Err(Error::NotYetIdentified(format!("coefficients ({}, {}) are not positive", psi[0], psi[1])));
    }
    let l = g / psi[1];
    let m = 1.0 / (psi[0] * l * l);
    Ok((l, m))
}
