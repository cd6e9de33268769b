use std::io::Write;

use serde::{Deserialize, Serialize};

use super::regressors::{recover_params, regressor_sample, true_coefficients, RegressorSample};
use super::rls::RlsState;
use crate::dynamics::{fmt17, Controller, PendulumParams};
use crate::homogeneity::{
    homogenize_controller, pendulum_transform, HomogenizedController, NominalSpec, PolicyMap, SaturationMode,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub lambda: f64,
    /// Initial covariance `p0 * I`.
    pub p0: f64,
    /// Estimates replace the guesses once `trace(P)` drops below this.
    pub trace_gate: f64,
    /// Parameters assumed until the estimator is confident.
    pub initial_guess: PendulumParams,
    /// Estimator sampling period (s); the controller is called at this rate.
    pub sample_period: f64,
    /// Period at which the policy output is recomputed and held (s).
    pub policy_period: f64,
    pub saturation: Option<f64>,
    pub saturation_mode: SaturationMode,
    /// Relative a-priori error that marks a sample as contradicting a
    /// confident estimate (`None` disables covariance resetting).
    pub reset_tol: Option<f64>,
    /// Consecutive contradicting samples that reset the covariance to `p0 * I`.
    pub reset_after: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            lambda: 0.998,
            p0: 1e4,
            trace_gate: 10.0,
            initial_guess: PendulumParams { m: 2.5, l: 6.0, g: 9.81 },
            sample_period: 1e-3,
            policy_period: 0.05,
            saturation: Some(50.0),
            saturation_mode: SaturationMode::PolicyOutput,
            reset_tol: Some(0.05),
            reset_after: 3,
        }
    }
}

impl AdaptiveConfig {
    fn hold_ratio(&self) -> Result<usize> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.sample_period) || !ok(self.policy_period) || !ok(self.p0) || !ok(self.trace_gate) {
            return Err(Error::InvalidInput("periods, p0 and trace gate must be positive".into()));
        }
        if self.reset_tol.is_some_and(|v| !ok(v)) || self.reset_after == 0 {
            return Err(Error::InvalidInput("reset tolerance and count must be positive".into()));
        }
        let r = (self.policy_period / self.sample_period).round();
        if r < 1.0 || (r * self.sample_period - self.policy_period).abs() > 1e-9 * self.policy_period {
            return Err(Error::InvalidInput("sample period must divide the policy period".into()));
        }
        Ok(r as usize)
    }
}

/// One row of the estimation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    pub l_hat: f64,
    pub m_hat: f64,
    pub trace_p: f64,
}

/// Homogenizing controller whose transform follows online estimates of
/// `(l, m)`.
///
/// Call it every `sample_period`; the policy output is recomputed every
/// `policy_period` and held in between.
pub struct AdaptiveController<P> {
    inner: HomogenizedController<P>,
    nominal: NominalSpec,
    cfg: AdaptiveConfig,
    rls: RlsState,
    prev: Option<(f64, [f64; 2], f64)>,
    calls: usize,
    ratio: usize,
    held: f64,
    confident: Option<PendulumParams>,
    contradicting: usize,
    resets: Vec<f64>,
    records: Vec<EstimateRecord>,
}

/// Builds the adaptive controller around a nominal pendulum policy.
pub fn adaptive_homogeneous_controller<P: PolicyMap>(
    policy: P,
    nominal: &NominalSpec,
    cfg: &AdaptiveConfig,
) -> Result<AdaptiveController<P>> {
    let ratio = cfg.hold_ratio()?;
    cfg.initial_guess.validate()?;
    let transform = pendulum_transform(&cfg.initial_guess, nominal)?;
    let mut inner = homogenize_controller(policy, transform)?;
    if let Some(limit) = cfg.saturation {
        inner = inner.with_saturation(limit, cfg.saturation_mode);
    }
    let rls = RlsState::new(true_coefficients(&cfg.initial_guess).to_vec(), cfg.p0, cfg.lambda)?;
    Ok(AdaptiveController {
        inner,
        nominal: nominal.clone(),
        cfg: cfg.clone(),
        rls,
        prev: None,
        calls: 0,
        ratio,
        held: 0.0,
        confident: None,
        contradicting: 0,
        resets: Vec::new(),
        records: Vec::new(),
    })
}

impl<P: PolicyMap> AdaptiveController<P> {
    pub fn records(&self) -> &[EstimateRecord] {
        &self.records
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    /// Times at which a parameter change was detected and the covariance reset.
    pub fn resets(&self) -> &[f64] {
        &self.resets
    }

    /// Parameters currently used to build the transform.
    pub fn estimate(&self) -> PendulumParams {
        self.confident.unwrap_or(self.cfg.initial_guess)
    }

    fn absorb(&mut self, t: f64, x: [f64; 2]) -> Result<()> {
        if let Some((t0, x0, u0)) = self.prev {
            let sample = regressor_sample(x0, x, u0, t - t0);
            self.detect_change(t, &sample);
            match self.rls.update(&sample) {
                Ok(()) => {}
                Err(Error::NumericalDegeneracy(_)) => self.rls.reset_covariance(self.cfg.p0),
                Err(e) => return Err(e),
            }
        }
        if self.rls.trace() < self.cfg.trace_gate {
            // once confident, a temporarily unidentifiable estimate keeps the last good one
            if let Ok((l, m)) = recover_params(&self.rls.psi, self.cfg.initial_guess.g) {
                self.confident = Some(PendulumParams { m, l, g: self.cfg.initial_guess.g });
            }
        }
        Ok(())
    }

    /// Resets the covariance when a confident estimate keeps mispredicting,
    /// so data from before a parameter change stops biasing the fit.
    fn detect_change(&mut self, t: f64, sample: &RegressorSample) {
        let Some(tol) = self.cfg.reset_tol else { return };
        if self.rls.trace() >= self.cfg.trace_gate {
            self.contradicting = 0;
            return;
        }
        let terms: Vec<f64> = sample.phi.iter().zip(&self.rls.psi).map(|(a, b)| a * b).collect();
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        let error = (sample.y - terms.iter().sum::<f64>()).abs();
        if error > tol * scale {
            self.contradicting += 1;
        } else {
            self.contradicting = 0;
        }
        if self.contradicting >= self.cfg.reset_after {
            self.rls.reset_covariance(self.cfg.p0);
            self.resets.push(t);
            self.contradicting = 0;
        }
    }
}

impl<P: PolicyMap> Controller for AdaptiveController<P> {
    fn control(&mut self, t: f64, observation: &[f64]) -> Result<f64> {
        if observation.len() != 2 {
            return Err(Error::InvalidInput("adaptive controller expects a pendulum state".into()));
        }
        let x = [observation[0], observation[1]];
        self.absorb(t, x)?;
        let est = self.estimate();
        self.records.push(EstimateRecord { t, l_hat: est.l, m_hat: est.m, trace_p: self.rls.trace() });
        if self.calls.is_multiple_of(self.ratio) {
            self.inner.set_transform(pendulum_transform(&est, &self.nominal)?);
            self.held = self.inner.evaluate(observation)?;
        }
        self.calls += 1;
        self.prev = Some((t, x, self.held));
        Ok(self.held)
    }
}

/// Writes `t,l_hat,m_hat,l_true,m_true,trace_P`.
pub fn write_estimation_csv<W: Write>(records: &[EstimateRecord], truth: impl Fn(f64) -> PendulumParams, mut w: W) -> Result<()> {
    writeln!(w, "t,l_hat,m_hat,l_true,m_true,trace_P")?;
    for r in records {
        let p = truth(r.t);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt17(r.t),
            fmt17(r.l_hat),
            fmt17(r.m_hat),
            fmt17(p.l),
            fmt17(p.m),
            fmt17(r.trace_p)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, ParamStep, Pendulum, Recording, SimConfig, SteppedPendulum};
    use crate::homogeneity::FnPolicy;

    fn pd() -> FnPolicy<impl Fn(&[f64]) -> f64> {
        // a smooth bounded law that keeps the pendulum moving
        FnPolicy { dim: 2, f: |x: &[f64]| 30.0 * (1.5 * x[1] - 0.2 * x[0]).tanh() }
    }

    #[test]
    fn estimates_track_true_parameters() {
        let truth = PendulumParams { m: 2.0, l: 7.0, g: 9.81 };
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig::default();
        let mut ctl = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(4.0, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        integrate(&Pendulum(truth), &mut ctl, &sim).unwrap();
        let est = ctl.estimate();
        assert!((est.l - 7.0).abs() < 1e-3 * 7.0, "{est:?}");
        assert!((est.m - 2.0).abs() < 1e-3 * 2.0, "{est:?}");
        assert!(ctl.rls().is_positive_definite());
    }

    #[test]
    fn step_change_resets_covariance() {
        let step = ParamStep { time: 2.0, m: Some(3.0), l: None };
        let plant = SteppedPendulum::new(PendulumParams { m: 2.0, l: 7.0, g: 9.81 }, vec![step]).unwrap();
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig::default();
        let mut ctl = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(4.0, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        integrate(&plant, &mut ctl, &sim).unwrap();
        assert_eq!(ctl.resets().len(), 1, "{:?}", ctl.resets());
        assert!((ctl.resets()[0] - 2.0).abs() < 0.01);
        let est = ctl.estimate();
        assert!((est.m - 3.0).abs() < 1e-3 * 3.0, "{est:?}");
        assert!((est.l - 7.0).abs() < 1e-3 * 7.0, "{est:?}");
    }

    #[test]
    fn no_resets_without_parameter_changes() {
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig::default();
        let mut ctl = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(6.0, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        integrate(&Pendulum(PendulumParams { m: 2.0, l: 7.0, g: 9.81 }), &mut ctl, &sim).unwrap();
        assert!(ctl.resets().is_empty(), "{:?}", ctl.resets());
    }

    #[test]
    fn exact_guesses_match_static_controller() {
        let truth = PendulumParams { m: 2.5, l: 6.0, g: 9.81 };
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig::default();
        let mut adaptive = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(5.0, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        let a = integrate(&Pendulum(truth), &mut adaptive, &sim).unwrap();
        let mut fixed = homogenize_controller(pd(), pendulum_transform(&truth, &nominal).unwrap())
            .unwrap()
            .with_saturation(50.0, SaturationMode::PolicyOutput);
        let sim = SimConfig::new(5.0, cfg.policy_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        let b = integrate(&Pendulum(truth), &mut fixed, &sim).unwrap();
        let ratio = 50;
        let mut worst: f64 = 0.0;
        for i in 0..b.len() {
            let (x, y) = (a.state(i * ratio), b.state(i));
            worst = worst.max((x[0] - y[0]).abs()).max((x[1] - y[1]).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    fn final_error(lambda: f64) -> f64 {
        let step = ParamStep { time: 1.0, m: None, l: Some(8.0) };
        let plant = SteppedPendulum::new(PendulumParams { m: 2.0, l: 7.0, g: 9.81 }, vec![step]).unwrap();
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig { lambda, reset_tol: None, ..AdaptiveConfig::default() };
        let mut ctl = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(4.0, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        integrate(&plant, &mut ctl, &sim).unwrap();
        ctl.records().iter().filter(|r| r.t >= 3.0).map(|r| (r.l_hat - 8.0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn forgetting_tracks_steps_faster() {
        let (with, without) = (final_error(0.998), final_error(1.0));
        assert!(with < without, "{with} vs {without}");
    }

    #[test]
    fn guesses_used_until_confident() {
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig { trace_gate: 1e-30, ..AdaptiveConfig::default() };
        let mut ctl = adaptive_homogeneous_controller(pd(), &nominal, &cfg).unwrap();
        let sim = SimConfig::new(0.5, cfg.sample_period, vec![3.0, 0.0]).with_recording(Recording::ControlInstants);
        integrate(&Pendulum(PendulumParams { m: 1.0, l: 9.0, g: 9.81 }), &mut ctl, &sim).unwrap();
        assert!(ctl.records().iter().all(|r| r.l_hat == 6.0 && r.m_hat == 2.5));
    }

    #[test]
    fn csv_layout() {
        let stepped = SteppedPendulum::new(PendulumParams { m: 2.0, l: 7.0, g: 9.81 }, vec![ParamStep { time: 1.0, m: Some(3.0), l: None }]).unwrap();
        let recs = [EstimateRecord { t: 0.5, l_hat: 6.0, m_hat: 2.5, trace_p: 2e4 }, EstimateRecord { t: 1.5, l_hat: 7.0, m_hat: 3.0, trace_p: 1.0 }];
        let mut buf = Vec::new();
        write_estimation_csv(&recs, |t| stepped.params_at(t), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,l_hat,m_hat,l_true,m_true,trace_P");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].split(',').nth(4).unwrap().starts_with("3.0"));
    }

    #[test]
    fn rejects_incommensurate_periods() {
        let nominal = NominalSpec::pendulum(PendulumParams::nominal()).unwrap();
        let cfg = AdaptiveConfig { sample_period: 0.03, ..AdaptiveConfig::default() };
        assert!(adaptive_homogeneous_controller(pd(), &nominal, &cfg).is_err());
    }
}
