use serde::{Deserialize, Serialize};

use super::env::{reward, SuccessCriterion};
use super::policy::Policy;
use crate::dynamics::{integrate, wrap_angle, DriverLoad, Pendulum, PlantParams, Recording, SimConfig, Trajectory};
use crate::homogeneity::{homogenize_controller, HomogeneityTransform, SaturationMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Horizon on the nominal time axis (s).
    pub t_final: f64,
    /// Control period on the nominal time axis (s).
    pub control_period: f64,
    /// Divide horizon and period by the transform's `zeta`, so the perturbed
    /// run samples at the instants matching the nominal ones.
    pub time_scaled: bool,
    pub saturation: Option<f64>,
    pub saturation_mode: SaturationMode,
    pub success: SuccessCriterion,
    pub recording: Recording,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            control_period: 0.05,
            time_scaled: true,
            saturation: Some(50.0),
            saturation_mode: SaturationMode::PolicyOutput,
            success: SuccessCriterion::default(),
            recording: Recording::ControlInstants,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    /// Sum of per-step rewards at the control instants.
    pub ret: f64,
    pub final_state: Vec<f64>,
    pub success: bool,
    pub trajectory: Trajectory,
}

/// Greedy rollout of `policy` on the plant `params`, optionally through a
/// homogenizing transform.
pub fn evaluate_policy(
    policy: &Policy,
    params: &PlantParams,
    transform: Option<&HomogeneityTransform>,
    x0: &[f64],
    opts: &EvalOptions,
) -> Result<EpisodeResult> {
    params.validate()?;
    let dim = params.kind().state_dim();
    let identity = HomogeneityTransform::identity(dim);
    let transform = transform.unwrap_or(&identity);
    let mut controller = homogenize_controller(policy, transform.clone())?;
    if let Some(limit) = opts.saturation {
        controller = controller.with_saturation(limit, opts.saturation_mode);
    }
    let zeta = if opts.time_scaled { transform.zeta } else { 1.0 };
    let cfg = SimConfig::new(opts.t_final / zeta, opts.control_period / zeta, x0.to_vec()).with_recording(opts.recording);
    let trajectory = match params {
        PlantParams::Pendulum(p) => integrate(&Pendulum(*p), &mut controller, &cfg)?,
        PlantParams::DriverLoad(p) => integrate(&DriverLoad(*p), &mut controller, &cfg)?,
    };
    let period = cfg.control_period;
    let mut ret = 0.0;
    for i in 1..trajectory.len() {
        let k = trajectory.times()[i] / period;
        if (k - k.round()).abs() > 1e-6 {
            continue;
        }
        let s = trajectory.state(i);
        ret += reward(wrap_angle(s[0]), s[1], trajectory.controls()[i - 1]);
    }
    let final_state = trajectory.last_state().map(<[f64]>::to_vec).unwrap_or_default();
    let success = opts.success.holds(&trajectory, 0, 1);
    if !ret.is_finite() {
        return Err(Error::InvalidInput("rollout produced a non-finite return".into()));
    }
    Ok(EpisodeResult { ret, final_state, success, trajectory })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dynamics::PendulumParams;
    use crate::rl::network::{Activation, Dense, DenseNetwork};

    fn zero_policy() -> Policy {
        let actor = DenseNetwork::new(vec![Dense::zeros(2, 1, Activation::Tanh)], 30.0).unwrap();
        Policy::new(actor, vec!["theta".into(), "theta_dot".into()], PlantParams::Pendulum(PendulumParams::nominal()), 0).unwrap()
    }

    #[test]
    fn zero_policy_fails_to_swing_up() {
        let p = PlantParams::Pendulum(PendulumParams::nominal());
        let r = evaluate_policy(&zero_policy(), &p, None, &[PI, 0.0], &EvalOptions::default()).unwrap();
        assert!(!r.success);
        assert!((r.ret + 400.0 * PI * PI).abs() < 1e-3);
        assert!((wrap_angle(r.final_state[0]).abs() - PI).abs() < 1e-6);
    }

    #[test]
    fn stabilising_policy_succeeds_from_near_upright() {
        // u = 30 tanh(-(20 th + 10 th_dot)/30) is a saturated PD law
        let mut layer = Dense::zeros(2, 1, Activation::Tanh);
        layer.weights[[0, 0]] = -20.0 / 30.0 * 10.0;
        layer.weights[[1, 0]] = -10.0 / 30.0 * 10.0;
        let actor = DenseNetwork::new(vec![layer], 30.0).unwrap();
        let policy = Policy::new(actor, vec!["theta".into(), "theta_dot".into()], PlantParams::Pendulum(PendulumParams::nominal()), 0).unwrap();
        let p = PlantParams::Pendulum(PendulumParams::nominal());
        let r = evaluate_policy(&policy, &p, None, &[0.3, 0.0], &EvalOptions::default()).unwrap();
        assert!(r.success);
        assert!(r.ret < 0.0);
    }
}
