use serde::{Deserialize, Serialize};

use super::transform::HomogeneityTransform;
use crate::dynamics::Controller;
use crate::rl::Policy;
use crate::{Error, Result};

/// A static map from observations to a scalar input.
pub trait PolicyMap {
    fn input_dim(&self) -> usize;
    fn act(&self, observation: &[f64]) -> Result<f64>;
}

impl PolicyMap for Policy {
    fn input_dim(&self) -> usize {
        self.actor.input_dim()
    }

    fn act(&self, observation: &[f64]) -> Result<f64> {
        Policy::act(self, observation)
    }
}

impl<P: PolicyMap + ?Sized> PolicyMap for &P {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn act(&self, observation: &[f64]) -> Result<f64> {
        (**self).act(observation)
    }
}

impl<P: PolicyMap + ?Sized> PolicyMap for std::sync::Arc<P> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn act(&self, observation: &[f64]) -> Result<f64> {
        (**self).act(observation)
    }
}

/// Closure-backed policy of fixed input dimension.
pub struct FnPolicy<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> PolicyMap for FnPolicy<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn act(&self, observation: &[f64]) -> Result<f64> {
        Ok((self.f)(observation))
    }
}

/// Where an input limit is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaturationMode {
    /// Clamp the policy output, then scale: the physical limit grows with
    /// `control_scale`.
    PolicyOutput,
    /// Clamp the physical input after scaling.
    Physical,
}

/// `u(x) = c0 * pi(c1 x1, ..., cn xn)`.
#[derive(Debug, Clone)]
pub struct HomogenizedController<P> {
    policy: P,
    transform: HomogeneityTransform,
    saturation: Option<(f64, SaturationMode)>,
    scratch: Vec<f64>,
}

/// Wraps `policy` into the homogenizing controller for `transform`.
pub fn homogenize_controller<P: PolicyMap>(policy: P, transform: HomogeneityTransform) -> Result<HomogenizedController<P>> {
    transform.validate()?;
    if policy.input_dim() != transform.dim() {
        return Err(Error::InvalidInput(format!(
            "policy takes {} inputs but the transform scales {} states",
            policy.input_dim(),
            transform.dim()
        )));
    }
    let dim = transform.dim();
    Ok(HomogenizedController { policy, transform, saturation: None, scratch: vec![0.0; dim] })
}

impl<P: PolicyMap> HomogenizedController<P> {
    pub fn with_saturation(mut self, limit: f64, mode: SaturationMode) -> Self {
        self.saturation = Some((limit.abs(), mode));
        self
    }

    pub fn transform(&self) -> &HomogeneityTransform {
        &self.transform
    }

    pub fn set_transform(&mut self, transform: HomogeneityTransform) {
        self.transform = transform;
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    /// Evaluates the control law at `x`.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        if x.len() != self.transform.dim() {
            return Err(Error::InvalidInput("state dimension does not match transform".into()));
        }
        for (s, (v, c)) in self.scratch.iter_mut().zip(x.iter().zip(&self.transform.state_scales)) {
            *s = v * c;
        }
        let raw = self.policy.act(&self.scratch)?;
        let c0 = self.transform.control_scale;
        Ok(match self.saturation {
            None => c0 * raw,
            Some((lim, SaturationMode::PolicyOutput)) => c0 * raw.clamp(-lim, lim),
            Some((lim, SaturationMode::Physical)) => (c0 * raw).clamp(-lim, lim),
        })
    }
}

impl<P: PolicyMap> Controller for HomogenizedController<P> {
    fn control(&mut self, _t: f64, observation: &[f64]) -> Result<f64> {
        self.evaluate(observation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PendulumParams;
    use crate::homogeneity::{pendulum_transform, NominalSpec};

    #[test]
    fn constant_policy_is_scaled() {
        let mut t = HomogeneityTransform::identity(2);
        t.control_scale = 2.0;
        let mut c = homogenize_controller(FnPolicy { dim: 2, f: |_: &[f64]| 1.0 }, t).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0], [-2.0, 7.5]] {
            assert_eq!(c.evaluate(&x).unwrap(), 2.0);
        }
    }

    #[test]
    fn identity_transform_is_transparent() {
        let f = |x: &[f64]| 3.0 * x[0] - x[1] * x[1];
        let mut c = homogenize_controller(FnPolicy { dim: 2, f }, HomogeneityTransform::identity(2)).unwrap();
        for x in [[0.5, 0.1], [-1.0, 2.0]] {
            assert_eq!(c.evaluate(&x).unwrap(), f(&x));
        }
    }

    #[test]
    fn pendulum_mass_doubles_control() {
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let t = pendulum_transform(&PendulumParams::new(2.0, 9.81, 9.81).unwrap(), &nominal).unwrap();
        let f = |x: &[f64]| 5.0 * x[0] + x[1];
        let mut c = homogenize_controller(FnPolicy { dim: 2, f }, t).unwrap();
        let x = [0.3, -0.7];
        assert!((c.evaluate(&x).unwrap() - 2.0 * f(&x)).abs() < 1e-12);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let r = homogenize_controller(FnPolicy { dim: 4, f: |_: &[f64]| 0.0 }, HomogeneityTransform::identity(2));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn saturation_ordering() {
        let mut t = HomogeneityTransform::identity(1);
        t.control_scale = 3.0;
        let pol = || FnPolicy { dim: 1, f: |x: &[f64]| x[0] };
        let mut before = homogenize_controller(pol(), t.clone()).unwrap().with_saturation(1.0, SaturationMode::PolicyOutput);
        let mut after = homogenize_controller(pol(), t).unwrap().with_saturation(1.0, SaturationMode::Physical);
        assert_eq!(before.evaluate(&[10.0]).unwrap(), 3.0);
        assert_eq!(after.evaluate(&[10.0]).unwrap(), 1.0);
    }
}
