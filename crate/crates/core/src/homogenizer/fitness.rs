use serde::{Deserialize, Serialize};

use super::candidate::CandidateTransform;
use crate::dynamics::{integrate_feedback, DriverLoad, Pendulum, PlantParams, Recording, SimConfig, Trajectory};
use crate::homogeneity::{HomogeneityTransform, Signal, TimeScaleSearch};
use crate::{Error, Result};

/// Fitness given to candidates that cannot be simulated or evaluated.
pub const WORST_FITNESS: f64 = 1e6;

/// Weight of the node-count penalty.
pub const DEFAULT_PARSIMONY: f64 = 1e-6;

/// How the paired closed-loop responses are produced and compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseSetup {
    /// Linear state-feedback gains `K` in `u = -K x`.
    pub gains: Vec<f64>,
    pub initial_state: Vec<f64>,
    /// Horizon of the nominal copy (s).
    pub t_final: f64,
    /// Horizon of the perturbed copy as a multiple of `t_final`.
    pub horizon_factor: f64,
    pub sample_period: f64,
    /// State components compared between the copies, each scaled by its
    /// candidate state scale.
    pub outputs: Vec<usize>,
    pub rtol: f64,
    pub atol: f64,
    pub search: TimeScaleSearch,
    /// Integrator step budget per copy; stiff candidates that exceed it get
    /// the worst fitness.
    pub max_steps: usize,
    /// Weight of `|ln(gamma_h * zeta)|`, which ties the time-scale tree to
    /// the warp found in the responses.
    pub zeta_weight: f64,
}

impl Default for ResponseSetup {
    fn default() -> Self {
        Self::pendulum()
    }
}

impl ResponseSetup {
    pub fn pendulum() -> Self {
        Self {
            gains: vec![200.0, 60.0],
            initial_state: vec![2.5, 0.0],
            t_final: 10.0,
            horizon_factor: 2.5,
            sample_period: 0.02,
            outputs: vec![0],
            rtol: 1e-9,
            atol: 1e-11,
            search: TimeScaleSearch::default(),
            max_steps: 20_000,
            zeta_weight: 1.0,
        }
    }

    pub fn driver_load() -> Self {
        Self {
            gains: vec![5.0, 1.0, 1.0, 2.0],
            initial_state: vec![0.3, 0.0, 0.0, 0.0],
            outputs: vec![0, 1, 2, 3],
            ..Self::pendulum()
        }
    }

    pub fn validate(&self, params: &PlantParams) -> Result<()> {
        let dim = params.kind().state_dim();
        if self.gains.len() != dim || self.initial_state.len() != dim {
            return Err(Error::InvalidInput(format!("gains and initial state must have {dim} entries")));
        }
        if self.outputs.is_empty() || self.outputs.iter().any(|&i| i >= dim) {
            return Err(Error::InvalidInput("compared outputs must be nonempty state indices".into()));
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.t_final) && pos(self.sample_period) && self.horizon_factor >= 1.0 && self.zeta_weight >= 0.0) {
            return Err(Error::InvalidInput("response horizons and weights must be positive".into()));
        }
        crate::error::ensure_finite(&self.gains, "gains")?;
        crate::error::ensure_finite(&self.initial_state, "initial state")
    }

    fn sim_config(&self, t_final: f64, x0: Vec<f64>) -> SimConfig {
        let mut cfg = SimConfig::new(t_final, self.sample_period, x0)
            .with_tolerances(self.rtol, self.atol)
            .with_recording(Recording::ControlInstants);
        cfg.max_steps = self.max_steps;
        cfg
    }
}

fn simulate<L: Fn(&[f64]) -> f64>(params: &PlantParams, law: L, cfg: &SimConfig) -> Result<Trajectory> {
    match params {
        PlantParams::Pendulum(p) => integrate_feedback(&Pendulum(*p), law, cfg),
        PlantParams::DriverLoad(p) => integrate_feedback(&DriverLoad(*p), law, cfg),
    }
}

fn feedback(gains: &[f64], x: &[f64]) -> f64 {
    -gains.iter().zip(x).map(|(k, v)| k * v).sum::<f64>()
}

/// Simulates the nominal copy under `u = -K x` and the perturbed copy under
/// `u = c0 * (-K (c .* x))`, starting from `x0` and `x0 ./ c` respectively.
pub fn generate_response_data(
    nominal: &PlantParams,
    perturbed: &PlantParams,
    scaling: &HomogeneityTransform,
    setup: &ResponseSetup,
) -> Result<(Trajectory, Trajectory)> {
    nominal.validate()?;
    perturbed.validate()?;
    if nominal.kind() != perturbed.kind() {
        return Err(Error::InvalidInput("nominal and perturbed plants differ in kind".into()));
    }
    setup.validate(nominal)?;
    scaling.validate()?;
    if scaling.dim() != setup.gains.len() {
        return Err(Error::InvalidInput("scaling dimension does not match the plant".into()));
    }
    let y1 = nominal_response(nominal, setup)?;
    let y2 = perturbed_response(perturbed, scaling, setup)?;
    Ok((y1, y2))
}

fn nominal_response(nominal: &PlantParams, setup: &ResponseSetup) -> Result<Trajectory> {
    let cfg = setup.sim_config(setup.t_final, setup.initial_state.clone());
    simulate(nominal, |x| feedback(&setup.gains, x), &cfg)
}

fn perturbed_response(perturbed: &PlantParams, scaling: &HomogeneityTransform, setup: &ResponseSetup) -> Result<Trajectory> {
    let x0 = scaling.unscale_state(&setup.initial_state);
    let cfg = setup.sim_config(setup.t_final * setup.horizon_factor, x0);
    let law = |x: &[f64]| {
        let mut z = [0.0; 8];
        let z = &mut z[..x.len()];
        for ((zi, xi), c) in z.iter_mut().zip(x).zip(&scaling.state_scales) {
            *zi = xi * c;
        }
        scaling.control_scale * feedback(&setup.gains, z)
    };
    simulate(perturbed, law, &cfg)
}

/// Worst-case homogeneity cost of a candidate over a perturbation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    /// Worst per-perturbation cost plus the parsimony penalty.
    pub j_h: f64,
    /// Warp at the worst perturbation.
    pub gamma_h: f64,
    /// Per-perturbation warp minimising the deviation (NaN when invalid).
    pub gammas: Vec<f64>,
    /// Per-perturbation minimised RMS deviation.
    pub deviations: Vec<f64>,
    /// Per-perturbation `|ln(gamma_h * zeta)|`.
    pub zeta_mismatch: Vec<f64>,
    /// Per-perturbation cost: minimised deviation plus the weighted
    /// time-scale mismatch.
    pub costs: Vec<f64>,
    pub nodes: usize,
    pub valid: bool,
}

impl FitnessReport {
    /// Worst per-perturbation cost without the parsimony penalty.
    pub fn raw(&self) -> f64 {
        self.costs.iter().copied().fold(0.0, f64::max)
    }
}

/// Cost data that depends only on the evaluated scalings.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawFitness {
    pub gammas: Vec<f64>,
    pub deviations: Vec<f64>,
    pub zeta_mismatch: Vec<f64>,
    pub costs: Vec<f64>,
    pub valid: bool,
}

impl RawFitness {
    fn invalid(n: usize) -> Self {
        Self {
            gammas: vec![f64::NAN; n],
            deviations: vec![WORST_FITNESS; n],
            zeta_mismatch: vec![WORST_FITNESS; n],
            costs: vec![WORST_FITNESS; n],
            valid: false,
        }
    }

    pub(crate) fn report(&self, nodes: usize, parsimony: f64) -> FitnessReport {
        let (worst, _) = self
            .costs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
        let raw = self.costs.iter().copied().fold(0.0, f64::max);
        FitnessReport {
            j_h: raw + parsimony * nodes as f64,
            gamma_h: self.gammas.get(worst).copied().unwrap_or(f64::NAN),
            gammas: self.gammas.clone(),
            deviations: self.deviations.clone(),
            zeta_mismatch: self.zeta_mismatch.clone(),
            costs: self.costs.clone(),
            nodes,
            valid: self.valid,
        }
    }
}

/// The nominal response and perturbation set shared by all evaluations.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    nominal: PlantParams,
    perturbations: Vec<PlantParams>,
    setup: ResponseSetup,
    y1: Vec<Signal>,
}

impl FitnessContext {
    pub fn new(nominal: &PlantParams, perturbations: &[PlantParams], setup: &ResponseSetup) -> Result<Self> {
        nominal.validate()?;
        setup.validate(nominal)?;
        if perturbations.is_empty() {
            return Err(Error::InvalidInput("perturbation set is empty".into()));
        }
        for p in perturbations {
            p.validate()?;
            if p.kind() != nominal.kind() {
                return Err(Error::InvalidInput("perturbations must match the nominal plant kind".into()));
            }
        }
        let traj = nominal_response(nominal, setup)?;
        let y1 = setup.outputs.iter().map(|&i| Signal::from_trajectory(&traj, i)).collect::<Result<_>>()?;
        Ok(Self { nominal: *nominal, perturbations: perturbations.to_vec(), setup: setup.clone(), y1 })
    }

    pub fn nominal(&self) -> &PlantParams {
        &self.nominal
    }

    pub fn perturbations(&self) -> &[PlantParams] {
        &self.perturbations
    }

    pub fn setup(&self) -> &ResponseSetup {
        &self.setup
    }

    /// Candidate values at every perturbation, concatenated; the cache key
    /// for [`Self::raw_from_values`].
    pub(crate) fn candidate_values(&self, candidate: &CandidateTransform) -> Vec<f64> {
        self.perturbations.iter().flat_map(|p| candidate.values(p, &self.nominal)).collect()
    }

    pub(crate) fn raw_from_values(&self, values: &[f64], dim: usize) -> RawFitness {
        let n = self.perturbations.len();
        let per = dim + 2;
        if dim != self.setup.gains.len() || values.len() != n * per {
            return RawFitness::invalid(n);
        }
        let mut out = RawFitness {
            gammas: Vec::with_capacity(n),
            deviations: Vec::with_capacity(n),
            zeta_mismatch: Vec::with_capacity(n),
            costs: Vec::with_capacity(n),
            valid: true,
        };
        for (p, v) in self.perturbations.iter().zip(values.chunks(per)) {
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return RawFitness::invalid(n);
            }
            let s = CandidateTransform::split(v);
            let scaling = HomogeneityTransform {
                zeta: s.zeta,
                kappa: s.state_scales.iter().map(|c| 1.0 / c).collect(),
                state_scales: s.state_scales.to_vec(),
                control_scale: s.control_scale,
                reduced_params: Vec::new(),
            };
            let Some((gamma, dev)) = self.deviation(p, &scaling) else {
                return RawFitness::invalid(n);
            };
            let mismatch = (gamma * scaling.zeta).ln().abs();
            let cost = dev + self.setup.zeta_weight * mismatch;
            if !cost.is_finite() {
                return RawFitness::invalid(n);
            }
            out.gammas.push(gamma);
            out.deviations.push(dev);
            out.zeta_mismatch.push(mismatch);
            out.costs.push(cost.min(WORST_FITNESS));
        }
        out
    }

    /// Best warp and its deviation.
    fn deviation(&self, perturbed: &PlantParams, scaling: &HomogeneityTransform) -> Option<(f64, f64)> {
        let traj = perturbed_response(perturbed, scaling, &self.setup).ok()?;
        let mut y2 = Vec::with_capacity(self.setup.outputs.len());
        for &i in &self.setup.outputs {
            y2.push(Signal::from_trajectory(&traj, i).ok()?.scaled(scaling.state_scales[i]));
        }
        let pairs: Vec<(&Signal, &Signal)> = self.y1.iter().zip(&y2).collect();
        self.setup.search.minimize_multi(&pairs).ok()
    }

    pub fn evaluate(&self, candidate: &CandidateTransform, parsimony: f64) -> FitnessReport {
        let values = self.candidate_values(candidate);
        self.raw_from_values(&values, candidate.dim()).report(candidate.node_count(), parsimony)
    }
}

/// Evaluates `candidate` against every perturbation in `perturbations`.
pub fn evaluate_fitness(
    candidate: &CandidateTransform,
    nominal: &PlantParams,
    perturbations: &[PlantParams],
    setup: &ResponseSetup,
) -> Result<FitnessReport> {
    let ctx = FitnessContext::new(nominal, perturbations, setup)?;
    Ok(ctx.evaluate(candidate, DEFAULT_PARSIMONY))
}
