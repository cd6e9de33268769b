use serde::{Deserialize, Serialize};

use super::timescale::{Signal, TimeScaleSearch};
use super::transform::HomogeneityTransform;
use crate::dynamics::Trajectory;
use crate::{Error, Result};

/// Outcome of comparing a perturbed response against the warped and
/// scaled nominal response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    /// Warp estimated from the data alone (`None` for constant channels).
    pub gamma_hat: Option<f64>,
    pub max_dev: f64,
    pub rms_dev: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `x_test(t) = kappa * x_nom(zeta * t)` for one state component.
///
/// Deviations are measured in the units of the test trajectory, at every
/// test sample whose warped time falls inside the nominal record.
pub fn verify_homogeneity(
    nominal: &Trajectory,
    test: &Trajectory,
    transform: &HomogeneityTransform,
    state_index: usize,
    tol: f64,
) -> Result<HomogeneityReport> {
    transform.validate()?;
    if state_index >= nominal.dim() || state_index >= test.dim() || state_index >= transform.dim() {
        return Err(Error::InvalidInput(format!("state index {state_index} out of range")));
    }
    let kappa = transform.kappa[state_index];
    let zeta = transform.zeta;
    let mut max_dev: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for (i, &t) in test.times().iter().enumerate() {
        let Some(reference) = nominal.interpolate(state_index, zeta * t) else {
            continue;
        };
        let d = (test.state(i)[state_index] - kappa * reference).abs();
        max_dev = max_dev.max(d);
        sum_sq += d * d;
        count += 1;
    }
    if count < 4 {
        return Err(Error::InvalidInput("trajectories do not overlap after warping".into()));
    }
    let rms_dev = (sum_sq / count as f64).sqrt();
    let gamma_hat = match (
        Signal::from_trajectory(test, state_index),
        Signal::from_trajectory(nominal, state_index),
    ) {
        (Ok(y1), Ok(y2)) => TimeScaleSearch::default().minimize(&y1.scaled(1.0 / kappa), &y2).ok().map(|(g, _)| g),
        _ => None,
    };
    Ok(HomogeneityReport { gamma_hat, max_dev, rms_dev, tol, pass: max_dev.is_finite() && max_dev < tol })
}

/// Time-scaled ITAE: `int_0^{zeta T} |z_i(tau)| tau dtau` with
/// `z_i(tau) = c_i x_i(tau / zeta)`, by trapezoidal quadrature on the record.
pub fn ts_itae(traj: &Trajectory, transform: &HomogeneityTransform, state_index: usize) -> Result<f64> {
    transform.validate()?;
    if state_index >= traj.dim() || state_index >= transform.dim() {
        return Err(Error::InvalidInput(format!("state index {state_index} out of range")));
    }
    let c = transform.state_scales[state_index];
    let zeta = transform.zeta;
    let times = traj.times();
    let mut total = 0.0;
    for i in 1..traj.len() {
        let (ta, tb) = (zeta * times[i - 1], zeta * times[i]);
        let fa = (c * traj.state(i - 1)[state_index]).abs() * ta;
        let fb = (c * traj.state(i)[state_index]).abs() * tb;
        total += 0.5 * (fa + fb) * (tb - ta);
    }
    Ok(total)
}
