//! Run configuration: a TOML file with one table per command, overridden by
//! command-line flags.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DriverLoadParams, ParamStep, PendulumParams, PlantKind, PlantParams};
use crate::estimation::AdaptiveConfig;
use crate::rl::{DdpgConfig, PendulumEnvSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub train: TrainSettings,
    pub simulate: SimulateSettings,
    pub verify: VerifySettings,
    pub estimate: EstimateSettings,
    pub homogenize: HomogenizeSettings,
    pub compare: CompareSettings,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Nominal parameters only.
    Nominal,
    /// Domain randomisation over the `l`/`m` ranges.
    Dr,
}

/// Base controller used by rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    /// A policy file written by `train`.
    Policy,
    /// A fixed hand-written state-feedback law.
    Scripted,
}

/// A parameter step written `value@time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StepSpec {
    pub value: f64,
    pub time: f64,
}

impl FromStr for StepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("step `{s}` is not of the form value@time"));
        let (v, t) = s.split_once('@').ok_or_else(bad)?;
        let value: f64 = v.trim().parse().map_err(|_| bad())?;
        let time: f64 = t.trim().parse().map_err(|_| bad())?;
        if !(value.is_finite() && value > 0.0 && time.is_finite() && time >= 0.0) {
            return Err(bad());
        }
        Ok(Self { value, time })
    }
}

impl TryFrom<String> for StepSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StepSpec> for String {
    fn from(s: StepSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for StepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.value, self.time)
    }
}

/// Merges `l` and `m` steps into one sorted schedule.
pub fn param_steps(l_steps: &[StepSpec], m_steps: &[StepSpec]) -> Vec<ParamStep> {
    let mut steps: Vec<ParamStep> = l_steps
        .iter()
        .map(|s| ParamStep { time: s.time, m: None, l: Some(s.value) })
        .chain(m_steps.iter().map(|s| ParamStep { time: s.time, m: Some(s.value), l: None }))
        .collect();
    steps.sort_by(|a, b| a.time.total_cmp(&b.time));
    steps
}

/// Plant parameters with per-field fallbacks to the nominal plant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(rename = "M")]
    pub big_m: Option<f64>,
    pub m: Option<f64>,
    pub l: Option<f64>,
    pub g: Option<f64>,
}

impl ParamOverrides {
    pub fn resolve(&self, kind: PlantKind) -> Result<PlantParams> {
        let p = match kind {
            PlantKind::Pendulum => {
                if self.big_m.is_some() {
                    return Err(Error::InvalidInput("the pendulum has no vehicle mass M".into()));
                }
                let n = PendulumParams::nominal();
                PlantParams::Pendulum(PendulumParams {
                    m: self.m.unwrap_or(n.m),
                    l: self.l.unwrap_or(n.l),
                    g: self.g.unwrap_or(n.g),
                })
            }
            PlantKind::DriverLoad => {
                let n = DriverLoadParams::nominal();
                PlantParams::DriverLoad(DriverLoadParams {
                    big_m: self.big_m.unwrap_or(n.big_m),
                    m: self.m.unwrap_or(n.m),
                    l: self.l.unwrap_or(n.l),
                    g: self.g.unwrap_or(n.g),
                })
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Nominal plant of each kind.
pub fn nominal_params(kind: PlantKind) -> PlantParams {
    match kind {
        PlantKind::Pendulum => PlantParams::Pendulum(PendulumParams::nominal()),
        PlantKind::DriverLoad => PlantParams::DriverLoad(DriverLoadParams::nominal()),
    }
}

/// Parses a grid cell: `m,l` (optionally `m,l,g`) for the pendulum and
/// `M,m,l` (optionally `M,m,l,g`) for the vehicle/load plant.
pub fn parse_cell(kind: PlantKind, values: &[f64]) -> Result<PlantParams> {
    let o = match (kind, values) {
        (PlantKind::Pendulum, [m, l]) => ParamOverrides { m: Some(*m), l: Some(*l), ..Default::default() },
        (PlantKind::Pendulum, [m, l, g]) => ParamOverrides { m: Some(*m), l: Some(*l), g: Some(*g), big_m: None },
        (PlantKind::DriverLoad, [bm, m, l]) => ParamOverrides { big_m: Some(*bm), m: Some(*m), l: Some(*l), g: None },
        (PlantKind::DriverLoad, [bm, m, l, g]) => {
            ParamOverrides { big_m: Some(*bm), m: Some(*m), l: Some(*l), g: Some(*g) }
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "cell {values:?} does not match the {} layout",
                if kind == PlantKind::Pendulum { "m,l[,g]" } else { "M,m,l[,g]" }
            )))
        }
    };
    o.resolve(kind)
}

pub fn parse_cell_str(kind: PlantKind, s: &str) -> Result<PlantParams> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("cell `{s}` is not numeric"))))
        .collect::<Result<Vec<_>>>()?;
    parse_cell(kind, &values)
}

/// Default initial state in nominal coordinates.
pub fn default_x0(kind: PlantKind) -> Vec<f64> {
    match kind {
        PlantKind::Pendulum => vec![PI, 0.0],
        PlantKind::DriverLoad => vec![0.0, 0.0, -0.75, 0.0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub plant: PlantKind,
    pub mode: TrainMode,
    pub l_range: [f64; 2],
    pub m_range: [f64; 2],
    pub env: PendulumEnvSpec,
    pub ddpg: DdpgConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            plant: PlantKind::Pendulum,
            mode: TrainMode::Nominal,
            l_range: [6.0, 8.0],
            m_range: [0.5, 2.5],
            env: PendulumEnvSpec::default(),
            ddpg: DdpgConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub plant: PlantKind,
    pub controller: ControllerKind,
    pub policy: Option<PathBuf>,
    pub params: ParamOverrides,
    pub transform: bool,
    pub adaptive: bool,
    pub l_steps: Vec<StepSpec>,
    pub m_steps: Vec<StepSpec>,
    /// Initial state in nominal coordinates.
    pub x0: Option<Vec<f64>>,
    pub t_final: f64,
    pub control_period: f64,
    /// Limit on the policy output before control scaling.
    pub saturation: Option<f64>,
    pub adaptive_config: AdaptiveConfig,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            plant: PlantKind::Pendulum,
            controller: ControllerKind::Policy,
            policy: None,
            params: ParamOverrides::default(),
            transform: false,
            adaptive: false,
            l_steps: Vec::new(),
            m_steps: Vec::new(),
            x0: None,
            t_final: 20.0,
            control_period: 0.05,
            saturation: None,
            adaptive_config: AdaptiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub plant: PlantKind,
    pub controller: ControllerKind,
    pub policy: Option<PathBuf>,
    /// Parameter tuples compared against the nominal plant.
    pub cells: Vec<Vec<f64>>,
    pub transform: bool,
    /// Tolerance on the angle; other channels scale it by their `kappa`.
    pub tol: f64,
    pub x0: Option<Vec<f64>>,
    pub t_final: f64,
    pub control_period: f64,
    pub saturation: Option<f64>,
    /// Recorded points per hold interval.
    pub samples_per_period: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            plant: PlantKind::Pendulum,
            controller: ControllerKind::Scripted,
            policy: None,
            cells: Vec::new(),
            transform: true,
            tol: 1e-4,
            x0: None,
            t_final: 20.0,
            control_period: 0.05,
            saturation: None,
            samples_per_period: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSettings {
    pub controller: ControllerKind,
    pub policy: Option<PathBuf>,
    /// True parameters at `t = 0`.
    pub initial: PendulumParams,
    pub l_steps: Vec<StepSpec>,
    pub m_steps: Vec<StepSpec>,
    pub x0: [f64; 2],
    pub t_final: f64,
    pub adaptive: AdaptiveConfig,
    /// Relative band the estimates must enter after every step.
    pub band: f64,
    /// Time allowed to enter the band after every step (s).
    pub window: f64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            controller: ControllerKind::Policy,
            policy: None,
            initial: PendulumParams { m: 2.0, l: 7.0, g: 9.81 },
            l_steps: vec![StepSpec { value: 8.0, time: 4.0 }],
            m_steps: vec![StepSpec { value: 3.0, time: 2.0 }],
            x0: [PI, 0.0],
            t_final: 20.0,
            adaptive: AdaptiveConfig::default(),
            band: 0.02,
            window: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogenizeSettings {
    pub plant: PlantKind,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub max_depth: Option<usize>,
    pub tournament: Option<usize>,
    pub tolerance: Option<f64>,
    /// Held-out length as a multiple of the nominal length.
    pub held_out_length: f64,
    /// Angle tolerance of the held-out check.
    pub held_out_tol: f64,
}

impl Default for HomogenizeSettings {
    fn default() -> Self {
        Self {
            plant: PlantKind::Pendulum,
            population: None,
            generations: None,
            max_depth: None,
            tournament: None,
            tolerance: None,
            held_out_length: 3.0,
            held_out_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    /// Nominal policy run through the transform.
    pub policy: Option<PathBuf>,
    /// Domain-randomised policy run without a transform.
    pub dr_policy: Option<PathBuf>,
    pub l_range: [f64; 2],
    pub m_range: [f64; 2],
    /// Points per axis.
    pub grid: usize,
    pub x0: [f64; 2],
    pub t_final: f64,
    pub control_period: f64,
    pub saturation: Option<f64>,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            policy: None,
            dr_policy: None,
            l_range: [6.0, 8.0],
            m_range: [0.5, 2.5],
            grid: 5,
            x0: [PI, 0.0],
            t_final: 20.0,
            control_period: 0.05,
            saturation: None,
        }
    }
}

/// Grid checked by `verify` when no cells are given: mass and length
/// sweeps for the pendulum, a longer plant at equal mass ratio for the
/// vehicle/load system.
pub fn default_cells(kind: PlantKind) -> Vec<Vec<f64>> {
    match kind {
        PlantKind::Pendulum => {
            let g = PendulumParams::nominal().l;
            let masses = [0.5, 1.0, 2.0, 3.0].map(|m| vec![m, g]);
            let lengths = [6.0, 7.0, 8.0, 4.0 * g].map(|l| vec![1.0, l]);
            masses.into_iter().chain(lengths).collect()
        }
        PlantKind::DriverLoad => {
            let n = DriverLoadParams::nominal();
            vec![vec![2.0 * n.big_m, 2.0 * n.m, 2.5 * n.l]]
        }
    }
}

/// `n` evenly spaced values over `range` (the midpoint when `n == 1`).
pub fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (range[0] + range[1])],
        _ => (0..n).map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_specs_parse_and_print() {
        let s: StepSpec = "8@4".parse().unwrap();
        assert_eq!(s, StepSpec { value: 8.0, time: 4.0 });
        assert_eq!(s.to_string(), "8@4");
        assert!("8".parse::<StepSpec>().is_err());
        assert!("-1@2".parse::<StepSpec>().is_err());
    }

    #[test]
    fn steps_merge_in_time_order() {
        let steps = param_steps(&["8@4".parse().unwrap()], &["3@2".parse().unwrap()]);
        assert_eq!(steps[0].time, 2.0);
        assert_eq!(steps[0].m, Some(3.0));
        assert_eq!(steps[1].l, Some(8.0));
    }

    #[test]
    fn cells_follow_plant_layout() {
        assert!(matches!(parse_cell_str(PlantKind::Pendulum, "2, 9.81").unwrap(), PlantParams::Pendulum(p) if p.m == 2.0));
        assert!(parse_cell_str(PlantKind::Pendulum, "1,2,3,4").is_err());
        let d = parse_cell_str(PlantKind::DriverLoad, "1.7,0.3,2.5").unwrap();
        assert!(matches!(d, PlantParams::DriverLoad(p) if p.big_m == 1.7 && p.l == 2.5));
        assert!(parse_cell_str(PlantKind::Pendulum, "a,b").is_err());
    }

    #[test]
    fn toml_round_trip_with_partial_tables() {
        let text = r#"
            seed = 7
            [train]
            mode = "dr"
            [train.ddpg]
            episodes = 10
            [simulate]
            l_steps = ["8@4"]
            params = { m = 2.0 }
        "#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.train.mode, TrainMode::Dr);
        assert_eq!(cfg.train.ddpg.episodes, 10);
        assert_eq!(cfg.train.ddpg.batch_size, DdpgConfig::default().batch_size);
        assert_eq!(cfg.simulate.l_steps[0].value, 8.0);
        assert_eq!(cfg.simulate.params.m, Some(2.0));
        let back: FileConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[train]\nepisodes = 3").is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace([6.0, 8.0], 5), vec![6.0, 6.5, 7.0, 7.5, 8.0]);
        assert_eq!(linspace([6.0, 8.0], 1), vec![7.0]);
        assert!(linspace([6.0, 8.0], 0).is_empty());
    }
}
