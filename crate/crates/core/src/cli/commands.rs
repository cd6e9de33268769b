//! Implementations of the command-line verbs.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    default_cells, default_x0, linspace, nominal_params, param_steps, parse_cell, CompareSettings, ControllerKind, EstimateSettings,
    HomogenizeSettings, SimulateSettings, StepSpec, TrainMode, TrainSettings, VerifySettings,
};
use super::svg::{render, render_maps, LinePlot, Series, SuccessMap};
use crate::dynamics::{
    integrate, wrap_angle, DriverLoad, Pendulum, PendulumParams, PlantKind, PlantParams, Recording, SimConfig,
    SteppedPendulum, Trajectory,
};
use crate::estimation::{adaptive_homogeneous_controller, write_estimation_csv, EstimateRecord};
use crate::homogeneity::{
    homogenize_controller, transform_for, ts_itae, verify_homogeneity, FnPolicy, HomogeneityReport,
    HomogeneityTransform, NominalSpec, PolicyMap, SaturationMode,
};
use crate::homogenizer::{evolve, generate_response_data, write_history_csv, DiscoveredTransform, GPConfig};
use crate::rl::{
    evaluate_policy, train_ddpg, train_ddpg_dr, write_training_log, DrRanges, EvalOptions, Policy, SuccessCriterion,
};
use crate::{Error, Result};

/// What a successful command run concluded.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    /// The run finished but a checked property did not hold.
    CheckFailed(String),
}

type DynPolicy = Box<dyn PolicyMap + Send + Sync>;

fn create(out: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::create_dir_all(out)?;
    Ok(std::io::BufWriter::new(std::fs::File::create(out.join(name))?))
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let mut w = create(out, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(out.join(name))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, name, &text)
}

fn write_trajectory(out: &Path, name: &str, traj: &Trajectory) -> Result<PathBuf> {
    let mut w = create(out, name)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    Ok(out.join(name))
}

/// Saturated PD law about the upright pendulum.
fn scripted_pendulum() -> DynPolicy {
    Box::new(FnPolicy { dim: 2, f: |x: &[f64]| 30.0 * (-(20.0 * wrap_angle(x[0]) + 10.0 * x[1]) / 30.0).tanh() })
}

/// Linear-quadratic regulator of the nominal vehicle/load plant about the
/// hanging equilibrium at `x = 0`.
fn scripted_driver_load() -> DynPolicy {
    Box::new(FnPolicy { dim: 4, f: |x: &[f64]| -(4.1 * x[0] + 1.5 * x[1] + 2.0 * x[2] + 2.6 * x[3]) })
}

/// Base policy and the nominal plant it was designed for.
fn base_policy(kind: PlantKind, controller: ControllerKind, path: Option<&Path>) -> Result<(DynPolicy, PlantParams)> {
    match controller {
        ControllerKind::Scripted => {
            let p = match kind {
                PlantKind::Pendulum => scripted_pendulum(),
                PlantKind::DriverLoad => scripted_driver_load(),
            };
            Ok((p, nominal_params(kind)))
        }
        ControllerKind::Policy => {
            let path = path.ok_or_else(|| Error::InvalidInput("--policy is required with the policy controller".into()))?;
            let policy = Policy::load(path)?;
            if policy.nominal.kind() != kind {
                return Err(Error::InvalidInput(format!("{} was trained for a different plant", path.display())));
            }
            let nominal = policy.nominal;
            Ok((Box::new(policy), nominal))
        }
    }
}

fn load_policy(path: Option<&Path>, what: &str) -> Result<Policy> {
    let path = path.ok_or_else(|| Error::InvalidInput(format!("{what} is required")))?;
    let p = Policy::load(path)?;
    if p.nominal.kind() != PlantKind::Pendulum {
        return Err(Error::InvalidInput(format!("{} is not a pendulum policy", path.display())));
    }
    Ok(p)
}

struct RolloutSpec {
    t_final: f64,
    control_period: f64,
    saturation: Option<f64>,
    recording: Recording,
}

/// Closed-loop run of `policy` through `transform`; `x0` and the horizon
/// are given on the nominal axes.
fn rollout(
    policy: &(dyn PolicyMap + Send + Sync),
    params: &PlantParams,
    transform: &HomogeneityTransform,
    x0: &[f64],
    spec: &RolloutSpec,
) -> Result<Trajectory> {
    if x0.len() != params.kind().state_dim() {
        return Err(Error::InvalidInput(format!(
            "initial state has {} entries, the plant has {}",
            x0.len(),
            params.kind().state_dim()
        )));
    }
    let mut ctl = homogenize_controller(policy, transform.clone())?;
    if let Some(limit) = spec.saturation {
        ctl = ctl.with_saturation(limit, SaturationMode::PolicyOutput);
    }
    let zeta = transform.zeta;
    let cfg = SimConfig::new(spec.t_final / zeta, spec.control_period / zeta, transform.unscale_state(x0))
        .with_recording(spec.recording);
    match params {
        PlantParams::Pendulum(p) => integrate(&Pendulum(*p), &mut ctl, &cfg),
        PlantParams::DriverLoad(p) => integrate(&DriverLoad(*p), &mut ctl, &cfg),
    }
}

fn channel_names(kind: PlantKind) -> &'static [&'static str] {
    match kind {
        PlantKind::Pendulum => &["theta (rad)", "theta_dot (rad/s)"],
        PlantKind::DriverLoad => &["theta (rad)", "theta_dot (rad/s)", "x (m)", "x_dot (m/s)"],
    }
}

fn response_panels(kind: PlantKind, runs: &[(&str, &Trajectory)]) -> Vec<LinePlot> {
    let primary = if kind == PlantKind::Pendulum { 0 } else { 2 };
    let names = channel_names(kind);
    let mut state = LinePlot::new("Response", "t (s)", names[primary]);
    let mut angle = LinePlot::new("Load angle", "t (s)", names[0]);
    let mut effort = LinePlot::new("Control effort", "t (s)", "u");
    for (label, t) in runs {
        let ts = t.times().to_vec();
        let mut ys = t.channel(primary);
        if kind == PlantKind::Pendulum {
            ys.iter_mut().for_each(|v| *v = wrap_angle(*v));
        }
        state.series.push(Series::new(*label, ts.clone(), ys));
        angle.series.push(Series::new(*label, ts.clone(), t.channel(0)));
        effort.series.push(Series::new(*label, ts, t.controls().to_vec()));
    }
    if kind == PlantKind::Pendulum {
        vec![state, effort]
    } else {
        vec![state, angle, effort]
    }
}

#[derive(Serialize)]
struct TrainSummary {
    mode: TrainMode,
    seed: u64,
    episodes_run: usize,
    solved_at: Option<usize>,
    greedy_success: bool,
    greedy_return: f64,
}

pub fn train(s: &TrainSettings, out: &Path) -> Result<Outcome> {
    if s.plant != PlantKind::Pendulum {
        return Err(Error::UnsupportedParameter(
            "training is available for the pendulum; the vehicle/load plant uses the scripted controller".into(),
        ));
    }
    let outcome = match s.mode {
        TrainMode::Nominal => train_ddpg(&s.env, &s.ddpg)?,
        TrainMode::Dr => train_ddpg_dr(&s.env, &s.ddpg, &DrRanges { l: s.l_range, m: s.m_range })?,
    };
    std::fs::create_dir_all(out)?;
    outcome.policy.save(&out.join("policy.json"))?;
    write_training_log(&outcome.log, &out.join("training_log.csv"))?;

    let params = PlantParams::Pendulum(s.env.params);
    let opts = EvalOptions {
        t_final: s.env.t_final,
        control_period: s.env.control_period,
        saturation: None,
        success: s.ddpg.success,
        ..EvalOptions::default()
    };
    let greedy = evaluate_policy(&outcome.policy, &params, None, &s.env.initial_state, &opts)?;
    write_trajectory(out, "greedy_rollout.csv", &greedy.trajectory)?;

    let episodes: Vec<f64> = outcome.log.iter().map(|e| e.episode as f64).collect();
    let returns: Vec<f64> = outcome.log.iter().map(|e| e.ret).collect();
    let (ge, gr): (Vec<f64>, Vec<f64>) =
        outcome.log.iter().filter_map(|e| e.greedy_return.map(|r| (e.episode as f64, r))).unzip();
    let plot = LinePlot::new("Training", "episode", "return")
        .with(Series::new("episode return", episodes, returns))
        .with(Series::new("greedy return", ge, gr).dashed());
    let mut panels = vec![plot];
    panels.extend(response_panels(PlantKind::Pendulum, &[("greedy", &greedy.trajectory)]));
    write_text(out, "training.svg", &render(&panels))?;
    write_json(
        out,
        "train_summary.json",
        &TrainSummary {
            mode: s.mode,
            seed: s.ddpg.seed,
            episodes_run: outcome.log.len(),
            solved_at: outcome.solved_at,
            greedy_success: greedy.success,
            greedy_return: greedy.ret,
        },
    )?;
    println!(
        "trained {} episodes, solved at {:?}, greedy success {}",
        outcome.log.len(),
        outcome.solved_at,
        greedy.success
    );
    Ok(Outcome::Completed)
}

#[derive(Serialize)]
struct SimulateSummary {
    params: PlantParams,
    transform: Option<HomogeneityTransform>,
    success: Option<bool>,
    samples: usize,
    final_state: Vec<f64>,
}

pub fn simulate(s: &SimulateSettings, out: &Path) -> Result<Outcome> {
    let (policy, nominal) = base_policy(s.plant, s.controller, s.policy.as_deref())?;
    let params = s.params.resolve(s.plant)?;
    let x0 = s.x0.clone().unwrap_or_else(|| default_x0(s.plant));
    if s.adaptive {
        return simulate_adaptive(s, policy, nominal, params, &x0, out);
    }
    if !s.l_steps.is_empty() || !s.m_steps.is_empty() {
        return Err(Error::InvalidInput("parameter steps require --adaptive on".into()));
    }
    let spec = NominalSpec::new(nominal)?;
    let transform = if s.transform {
        transform_for(&params, &spec)?
    } else {
        HomogeneityTransform::identity(s.plant.state_dim())
    };
    let rs = RolloutSpec {
        t_final: s.t_final,
        control_period: s.control_period,
        saturation: s.saturation,
        recording: Recording::ControlInstants,
    };
    let traj = rollout(policy.as_ref(), &params, &transform, &x0, &rs)?;
    let success = (s.plant == PlantKind::Pendulum).then(|| SuccessCriterion::default().holds(&traj, 0, 1));
    write_trajectory(out, "trajectory.csv", &traj)?;
    write_text(out, "response.svg", &render(&response_panels(s.plant, &[("response", &traj)])))?;
    write_json(
        out,
        "simulate_summary.json",
        &SimulateSummary {
            params,
            transform: s.transform.then_some(transform),
            success,
            samples: traj.len(),
            final_state: traj.last_state().map(<[f64]>::to_vec).unwrap_or_default(),
        },
    )?;
    match success {
        Some(ok) => println!("{} samples, swing-up success {ok}", traj.len()),
        None => println!("{} samples", traj.len()),
    }
    Ok(Outcome::Completed)
}

struct AdaptiveRun {
    trajectory: Trajectory,
    records: Vec<EstimateRecord>,
    plant: SteppedPendulum,
}

fn run_adaptive(
    policy: DynPolicy,
    nominal: PlantParams,
    initial: PendulumParams,
    l_steps: &[StepSpec],
    m_steps: &[StepSpec],
    x0: &[f64],
    t_final: f64,
    cfg: &crate::estimation::AdaptiveConfig,
) -> Result<AdaptiveRun> {
    let PlantParams::Pendulum(_) = nominal else {
        return Err(Error::UnsupportedParameter("online estimation is available for the pendulum only".into()));
    };
    let plant = SteppedPendulum::new(initial, param_steps(l_steps, m_steps))?;
    let spec = NominalSpec::new(nominal)?;
    let mut ctl = adaptive_homogeneous_controller(policy, &spec, cfg)?;
    let sim = SimConfig::new(t_final, cfg.sample_period, x0.to_vec()).with_recording(Recording::ControlInstants);
    let trajectory = integrate(&plant, &mut ctl, &sim)?;
    Ok(AdaptiveRun { trajectory, records: ctl.records().to_vec(), plant })
}

impl PolicyMap for DynPolicy {
    fn input_dim(&self) -> usize {
        self.as_ref().input_dim()
    }

    fn act(&self, observation: &[f64]) -> Result<f64> {
        self.as_ref().act(observation)
    }
}

fn estimation_panels(run: &AdaptiveRun) -> Vec<LinePlot> {
    let t: Vec<f64> = run.records.iter().map(|r| r.t).collect();
    let truth: Vec<PendulumParams> = t.iter().map(|&x| run.plant.params_at(x)).collect();
    let l = LinePlot::new("Length estimate", "t (s)", "l (m)")
        .with(Series::new("estimate", t.clone(), run.records.iter().map(|r| r.l_hat).collect()))
        .with(Series::new("true", t.clone(), truth.iter().map(|p| p.l).collect()).dashed());
    let m = LinePlot::new("Mass estimate", "t (s)", "m (kg)")
        .with(Series::new("estimate", t.clone(), run.records.iter().map(|r| r.m_hat).collect()))
        .with(Series::new("true", t, truth.iter().map(|p| p.m).collect()).dashed());
    vec![l, m]
}

fn write_estimation(out: &Path, run: &AdaptiveRun) -> Result<()> {
    let mut w = create(out, "estimation.csv")?;
    write_estimation_csv(&run.records, |t| run.plant.params_at(t), &mut w)?;
    w.flush()?;
    Ok(())
}

fn simulate_adaptive(
    s: &SimulateSettings,
    policy: DynPolicy,
    nominal: PlantParams,
    params: PlantParams,
    x0: &[f64],
    out: &Path,
) -> Result<Outcome> {
    let PlantParams::Pendulum(initial) = params else {
        return Err(Error::UnsupportedParameter("online estimation is available for the pendulum only".into()));
    };
    let run = run_adaptive(policy, nominal, initial, &s.l_steps, &s.m_steps, x0, s.t_final, &s.adaptive_config)?;
    let success = SuccessCriterion::default().holds(&run.trajectory, 0, 1);
    write_trajectory(out, "trajectory.csv", &run.trajectory)?;
    write_estimation(out, &run)?;
    let mut panels = response_panels(PlantKind::Pendulum, &[("adaptive", &run.trajectory)]);
    panels.extend(estimation_panels(&run));
    write_text(out, "response.svg", &render(&panels))?;
    write_json(
        out,
        "simulate_summary.json",
        &SimulateSummary {
            params,
            transform: None,
            success: Some(success),
            samples: run.trajectory.len(),
            final_state: run.trajectory.last_state().map(<[f64]>::to_vec).unwrap_or_default(),
        },
    )?;
    println!("{} samples, swing-up success {success}", run.trajectory.len());
    Ok(Outcome::Completed)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelReport {
    pub channel: usize,
    #[serde(flatten)]
    pub report: HomogeneityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub params: PlantParams,
    pub zeta: f64,
    pub channels: Vec<ChannelReport>,
    pub ts_itae: f64,
    pub ts_itae_nominal: f64,
    pub ts_itae_rel_diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub nominal: PlantParams,
    pub transform_applied: bool,
    pub cells: Vec<CellReport>,
    pub all_pass: bool,
}

/// Relative TS-ITAE agreement required of every cell.
const ITAE_REL_TOL: f64 = 0.01;

pub fn verify(s: &VerifySettings, out: &Path) -> Result<Outcome> {
    if s.samples_per_period == 0 || !(s.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance and samples per period must be positive".into()));
    }
    let (policy, nominal) = base_policy(s.plant, s.controller, s.policy.as_deref())?;
    let grid = if s.cells.is_empty() { default_cells(s.plant) } else { s.cells.clone() };
    let cells = grid.iter().map(|c| parse_cell(s.plant, c)).collect::<Result<Vec<_>>>()?;
    let spec = NominalSpec::new(nominal)?;
    let x0 = s.x0.clone().unwrap_or_else(|| default_x0(s.plant));
    let rs = RolloutSpec {
        t_final: s.t_final,
        control_period: s.control_period,
        saturation: s.saturation,
        recording: Recording::Uniform(s.samples_per_period),
    };
    let identity = HomogeneityTransform::identity(s.plant.state_dim());
    let reference = rollout(policy.as_ref(), &nominal, &identity, &x0, &rs)?;
    let itae_nominal = ts_itae(&reference, &identity, 0)?;
    let channels: &[usize] = if s.plant == PlantKind::Pendulum { &[0] } else { &[0, 2] };

    let reports = cells
        .par_iter()
        .map(|params| -> Result<(CellReport, Trajectory)> {
            let analytic = transform_for(params, &spec)?;
            let applied = if s.transform { analytic.clone() } else { identity.clone() };
            let test = rollout(policy.as_ref(), params, &applied, &x0, &rs)?;
            let mut chans = Vec::new();
            for &i in channels {
                let report = verify_homogeneity(&reference, &test, &analytic, i, s.tol * analytic.kappa[i])?;
                chans.push(ChannelReport { channel: i, report });
            }
            let itae = ts_itae(&test, &analytic, 0)?;
            let rel = (itae - itae_nominal).abs() / itae_nominal.abs().max(f64::MIN_POSITIVE);
            let pass = chans.iter().all(|c| c.report.pass) && rel < ITAE_REL_TOL;
            let cell = CellReport {
                params: *params,
                zeta: analytic.zeta,
                channels: chans,
                ts_itae: itae,
                ts_itae_nominal: itae_nominal,
                ts_itae_rel_diff: rel,
                pass,
            };
            Ok((cell, test))
        })
        .collect::<Result<Vec<_>>>()?;

    let all_pass = reports.iter().all(|(c, _)| c.pass);
    let mut overlay = LinePlot::new("Angle, warped to the nominal time axis", "nominal time (s)", "theta (rad)");
    overlay.series.push(Series::new("nominal", reference.times().to_vec(), reference.channel(0)));
    for (cell, traj) in &reports {
        let ts = traj.times().iter().map(|t| t * cell.zeta).collect();
        overlay.series.push(Series::new(cell_label(&cell.params), ts, traj.channel(0)).dashed());
    }
    write_text(out, "verify.svg", &render(&[overlay]))?;
    let report = VerifyReport {
        nominal,
        transform_applied: s.transform,
        cells: reports.into_iter().map(|(c, _)| c).collect(),
        all_pass,
    };
    write_json(out, "verify.json", &report)?;
    println!("{:<28} {:>8} {:>12} {:>10} {:>5}", "cell", "zeta", "max_dev", "itae_rel", "pass");
    for c in &report.cells {
        let max_dev = c.channels.iter().map(|r| r.report.max_dev).fold(0.0, f64::max);
        println!(
            "{:<28} {:>8.4} {:>12.3e} {:>10.2e} {:>5}",
            cell_label(&c.params),
            c.zeta,
            max_dev,
            c.ts_itae_rel_diff,
            c.pass
        );
    }
    if all_pass {
        Ok(Outcome::Completed)
    } else {
        let failed = report.cells.iter().filter(|c| !c.pass).count();
        Ok(Outcome::CheckFailed(format!("{failed} of {} cells failed verification", report.cells.len())))
    }
}

fn cell_label(p: &PlantParams) -> String {
    match p {
        PlantParams::Pendulum(p) => format!("m={} l={}", p.m, p.l),
        PlantParams::DriverLoad(p) => format!("M={} m={} l={}", p.big_m, p.m, p.l),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTracking {
    pub time: f64,
    pub parameter: &'static str,
    pub truth: f64,
    /// Seconds after the step until the estimate stays inside the band.
    pub settle: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub swing_up_success: bool,
    pub band: f64,
    pub window: f64,
    pub steps: Vec<StepTracking>,
    pub final_estimate: PendulumParams,
    pub pass: bool,
}

/// Time after `t0` from which `est/truth` stays within `band` until `t1`.
fn settle_time(records: &[EstimateRecord], t0: f64, t1: f64, band: f64, pick: impl Fn(&EstimateRecord) -> f64, truth: f64) -> Option<f64> {
    let mut since = None;
    for r in records.iter().filter(|r| r.t >= t0 && r.t < t1) {
        let inside = ((pick(r) - truth) / truth).abs() <= band;
        match (inside, since) {
            (true, None) => since = Some(r.t - t0),
            (false, _) => since = None,
            _ => {}
        }
    }
    since
}

pub fn estimate(s: &EstimateSettings, out: &Path) -> Result<Outcome> {
    if !(s.band > 0.0 && s.window > 0.0) {
        return Err(Error::InvalidInput("band and window must be positive".into()));
    }
    let (policy, nominal) = base_policy(PlantKind::Pendulum, s.controller, s.policy.as_deref())?;
    let run = run_adaptive(policy, nominal, s.initial, &s.l_steps, &s.m_steps, &s.x0, s.t_final, &s.adaptive)?;
    let swing_up_success = SuccessCriterion::default().holds(&run.trajectory, 0, 1);
    let steps = param_steps(&s.l_steps, &s.m_steps);
    let mut bounds: Vec<f64> = steps.iter().map(|p| p.time).collect();
    bounds.push(s.t_final + 1.0);
    let mut tracking = Vec::new();
    for (k, step) in steps.iter().enumerate() {
        let truth = run.plant.params_at(step.time);
        let next = bounds[k + 1];
        let checks: [(&'static str, f64, fn(&EstimateRecord) -> f64); 2] =
            [("l", truth.l, |r| r.l_hat), ("m", truth.m, |r| r.m_hat)];
        for (name, value, pick) in checks {
            let settle = settle_time(&run.records, step.time, next, s.band, pick, value);
            let pass = settle.is_some_and(|d| d <= s.window);
            tracking.push(StepTracking { time: step.time, parameter: name, truth: value, settle, pass });
        }
    }
    let final_estimate = run
        .records
        .last()
        .map(|r| PendulumParams { m: r.m_hat, l: r.l_hat, g: s.initial.g })
        .unwrap_or(s.initial);
    let pass = swing_up_success && tracking.iter().all(|t| t.pass);
    write_estimation(out, &run)?;
    write_trajectory(out, "trajectory.csv", &run.trajectory)?;
    let mut panels = estimation_panels(&run);
    panels.extend(response_panels(PlantKind::Pendulum, &[("adaptive", &run.trajectory)]));
    write_text(out, "estimation.svg", &render(&panels))?;
    let summary = EstimateSummary { swing_up_success, band: s.band, window: s.window, steps: tracking, final_estimate, pass };
    write_json(out, "estimate_summary.json", &summary)?;
    for t in &summary.steps {
        println!("step at {:>5.2}s {} -> {:<6} settle {:?} pass {}", t.time, t.parameter, t.truth, t.settle, t.pass);
    }
    println!("swing-up success {swing_up_success}");
    if pass {
        Ok(Outcome::Completed)
    } else {
        Ok(Outcome::CheckFailed("estimates or swing-up missed the targets".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeldOutCheck {
    pub params: PlantParams,
    pub discovered: HomogeneityTransform,
    pub analytic: HomogeneityTransform,
    pub report: HomogeneityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizeReport {
    pub j_h: f64,
    pub generations_run: usize,
    pub held_out: Option<HeldOutCheck>,
    pub held_out_error: Option<String>,
}

/// GP configuration for `kind` with the settings' overrides applied.
pub fn gp_config(s: &HomogenizeSettings, seed: Option<u64>) -> GPConfig {
    let mut cfg = match nominal_params(s.plant) {
        PlantParams::Pendulum(p) => GPConfig::pendulum(&p),
        PlantParams::DriverLoad(p) => GPConfig::driver_load(&p),
    };
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(v) = s.population {
        cfg.population = v;
    }
    if let Some(v) = s.generations {
        cfg.generations = v;
    }
    if let Some(v) = s.max_depth {
        cfg.max_depth = v;
        cfg.init_depth = cfg.init_depth.min(v);
    }
    if let Some(v) = s.tournament {
        cfg.tournament = v;
    }
    if let Some(v) = s.tolerance {
        cfg.tolerance = v;
    }
    cfg
}

fn held_out(s: &HomogenizeSettings, cfg: &GPConfig, best: &crate::homogenizer::CandidateTransform) -> Result<HeldOutCheck> {
    let nominal = nominal_params(s.plant);
    let params = match nominal {
        PlantParams::Pendulum(p) => PlantParams::Pendulum(PendulumParams { l: p.l * s.held_out_length, ..p }),
        PlantParams::DriverLoad(p) => {
            PlantParams::DriverLoad(crate::dynamics::DriverLoadParams { l: p.l * s.held_out_length, ..p })
        }
    };
    let discovered = best.evaluate(&params, &nominal)?;
    let analytic = transform_for(&params, &NominalSpec::new(nominal)?)?;
    let (nom, test) = generate_response_data(&nominal, &params, &discovered, &cfg.response)?;
    let report = verify_homogeneity(&nom, &test, &discovered, 0, s.held_out_tol)?;
    Ok(HeldOutCheck { params, discovered, analytic, report })
}

pub fn homogenize(s: &HomogenizeSettings, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    if !(s.held_out_length > 0.0 && s.held_out_tol > 0.0) {
        return Err(Error::InvalidInput("held-out length and tolerance must be positive".into()));
    }
    let cfg = gp_config(s, seed);
    let nominal = nominal_params(s.plant);
    let result = evolve(&nominal, &cfg)?;
    let discovered = DiscoveredTransform::new(s.plant, &result, &cfg);
    write_text(out, "transform.json", &(discovered.to_json()? + "\n"))?;
    let mut w = create(out, "history.csv")?;
    write_history_csv(&result.history, &mut w)?;
    w.flush()?;
    let g: Vec<f64> = result.history.iter().map(|h| h.generation as f64).collect();
    let log = |v: f64| v.max(1e-12).log10();
    let plot = LinePlot::new("Homogenizer fitness", "generation", "log10 fitness")
        .with(Series::new("best", g.clone(), result.history.iter().map(|h| log(h.best_fitness)).collect()))
        .with(Series::new("median", g, result.history.iter().map(|h| log(h.median_fitness)).collect()).dashed());
    write_text(out, "fitness.svg", &render(&[plot]))?;
    let (check, err) = match held_out(s, &cfg, &result.best) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = HomogenizeReport {
        j_h: result.report.j_h,
        generations_run: result.history.len().saturating_sub(1),
        held_out: check,
        held_out_error: err,
    };
    write_json(out, "homogenize_report.json", &report)?;
    println!("best J_h {:.3e}", report.j_h);
    println!("c = [{}], c0 = {}, zeta = {}", discovered.state_scales.join(", "), discovered.control_scale, discovered.zeta);
    match (&report.held_out, &report.held_out_error) {
        (Some(c), _) => println!("held-out max deviation {:.3e} (pass {})", c.report.max_dev, c.report.pass),
        (None, Some(e)) => println!("held-out check failed: {e}"),
        _ => {}
    }
    Ok(Outcome::Completed)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    /// Row values.
    pub m: Vec<f64>,
    /// Column values.
    pub l: Vec<f64>,
    pub homogeneous: Vec<Vec<bool>>,
    pub homogeneous_rate: f64,
    pub dr: Option<Vec<Vec<bool>>>,
    pub dr_rate: Option<f64>,
}

fn success_grid(
    policy: &Policy,
    transform: bool,
    ms: &[f64],
    ls: &[f64],
    s: &CompareSettings,
) -> Result<(Vec<Vec<bool>>, Vec<Trajectory>)> {
    let spec = NominalSpec::new(policy.nominal)?;
    let opts = EvalOptions {
        t_final: s.t_final,
        control_period: s.control_period,
        saturation: s.saturation,
        ..EvalOptions::default()
    };
    let g = match policy.nominal {
        PlantParams::Pendulum(p) => p.g,
        PlantParams::DriverLoad(p) => p.g,
    };
    let cells: Vec<(usize, usize)> = (0..ms.len()).flat_map(|i| (0..ls.len()).map(move |j| (i, j))).collect();
    let runs = cells
        .par_iter()
        .map(|&(i, j)| {
            let params = PlantParams::Pendulum(PendulumParams::new(ms[i], ls[j], g)?);
            let t = if transform { Some(transform_for(&params, &spec)?) } else { None };
            evaluate_policy(policy, &params, t.as_ref(), &s.x0, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = vec![vec![false; ls.len()]; ms.len()];
    for (&(i, j), r) in cells.iter().zip(&runs) {
        grid[i][j] = r.success;
    }
    Ok((grid, runs.into_iter().map(|r| r.trajectory).collect()))
}

fn rate(grid: &[Vec<bool>]) -> f64 {
    let n: usize = grid.iter().map(Vec::len).sum();
    grid.iter().flatten().filter(|v| **v).count() as f64 / n.max(1) as f64
}

pub fn compare(s: &CompareSettings, out: &Path) -> Result<Outcome> {
    if s.grid == 0 {
        return Err(Error::InvalidInput("the comparison grid is empty".into()));
    }
    let ms = linspace(s.m_range, s.grid);
    let ls = linspace(s.l_range, s.grid);
    for v in ms.iter().chain(&ls) {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidInput("grid values must be positive".into()));
        }
    }
    let policy = load_policy(s.policy.as_deref(), "--policy")?;
    let dr_policy = s.dr_policy.as_deref().map(|p| load_policy(Some(p), "--dr-policy")).transpose()?;
    let (homog, homog_runs) = success_grid(&policy, true, &ms, &ls, s)?;
    let dr = dr_policy.as_ref().map(|p| success_grid(p, false, &ms, &ls, s)).transpose()?;

    let mut maps = vec![SuccessMap {
        title: "Homogenized nominal policy".into(),
        row_label: "m (kg)".into(),
        col_label: "l (m)".into(),
        rows: ms.clone(),
        cols: ls.clone(),
        cells: homog.clone(),
    }];
    let corner = ms.len() * ls.len() - 1;
    let mut overlay = LinePlot::new(
        format!("Angle at m={} l={}", ms[ms.len() - 1], ls[ls.len() - 1]),
        "t (s)",
        "theta (rad)",
    );
    let angle = |t: &Trajectory| t.channel(0).into_iter().map(wrap_angle).collect::<Vec<_>>();
    overlay.series.push(Series::new("homogenized", homog_runs[corner].times().to_vec(), angle(&homog_runs[corner])));
    if let Some((grid, runs)) = &dr {
        maps.push(SuccessMap { title: "Domain randomisation".into(), cells: grid.clone(), ..maps[0].clone() });
        overlay.series.push(Series::new("domain randomisation", runs[corner].times().to_vec(), angle(&runs[corner])).dashed());
    }
    write_text(out, "compare_map.svg", &render_maps(&maps))?;
    write_text(out, "compare_overlay.svg", &render(&[overlay]))?;
    let report = CompareReport {
        homogeneous_rate: rate(&homog),
        dr_rate: dr.as_ref().map(|(g, _)| rate(g)),
        m: ms,
        l: ls,
        homogeneous: homog,
        dr: dr.map(|(g, _)| g),
    };
    write_json(out, "compare.json", &report)?;
    println!("homogenized success {:.0}%", 100.0 * report.homogeneous_rate);
    if let Some(r) = report.dr_rate {
        println!("domain randomisation success {:.0}%", 100.0 * r);
    }
    Ok(Outcome::Completed)
}
