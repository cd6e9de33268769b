use serde::{Deserialize, Serialize};

use crate::dynamics::{DriverLoadParams, PendulumParams, PlantKind, PlantParams};
use crate::{Error, Result};

/// Default tolerance on the mass-ratio match required by the
/// vehicle/load transform.
pub const DEFAULT_MU_TOL: f64 = 1e-9;

/// Scalings relating a perturbed plant to the nominal one.
///
/// The homogenizing input is `u = control_scale * pi(state_scales .* x)`,
/// and the perturbed response satisfies `x_i(t) = kappa_i * x_nom_i(zeta * t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityTransform {
    pub zeta: f64,
    pub kappa: Vec<f64>,
    pub state_scales: Vec<f64>,
    pub control_scale: f64,
    /// Parameters that survive normalisation, by name.
    pub reduced_params: Vec<(String, f64)>,
}

impl HomogeneityTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            zeta: 1.0,
            kappa: vec![1.0; dim],
            state_scales: vec![1.0; dim],
            control_scale: 1.0,
            reduced_params: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.state_scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let good = |v: f64| v.is_finite() && v != 0.0;
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::InvalidInput(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !good(self.control_scale)
            || !self.state_scales.iter().all(|&c| good(c))
            || !self.kappa.iter().all(|&k| good(k))
        {
            return Err(Error::InvalidInput("transform scales must be finite and nonzero".into()));
        }
        if self.kappa.len() != self.state_scales.len() {
            return Err(Error::InvalidInput("kappa and state scales differ in length".into()));
        }
        Ok(())
    }

    /// Feedback seen by the nominal policy: `c_i * x_i`.
    pub fn scale_state(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.state_scales).map(|(v, c)| v * c).collect()
    }

    /// Inverse of [`Self::scale_state`].
    pub fn unscale_state(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.state_scales).map(|(v, c)| v / c).collect()
    }

    /// Sampling period on the perturbed plant that corresponds to
    /// `nominal_period` on the nominal one.
    pub fn scaled_period(&self, nominal_period: f64) -> f64 {
        nominal_period / self.zeta
    }

    pub fn reduced(&self, name: &str) -> Option<f64> {
        self.reduced_params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// The operating point a policy was trained at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalSpec {
    pub params: PlantParams,
    /// Names of the policy inputs, in order.
    pub input_order: Vec<String>,
}

impl NominalSpec {
    pub fn new(params: PlantParams) -> Result<Self> {
        params.validate()?;
        let input_order = match params.kind() {
            PlantKind::Pendulum => vec!["theta".into(), "theta_dot".into()],
            PlantKind::DriverLoad => vec!["theta".into(), "theta_dot".into(), "x".into(), "x_dot".into()],
        };
        Ok(Self { params, input_order })
    }

    pub fn pendulum(p: PendulumParams) -> Result<Self> {
        Self::new(PlantParams::Pendulum(p))
    }

    pub fn driver_load(p: DriverLoadParams) -> Result<Self> {
        Self::new(PlantParams::DriverLoad(p))
    }

    pub fn kind(&self) -> PlantKind {
        self.params.kind()
    }
}

/// Transform of a pendulum with parameters `p` relative to `nominal`.
pub fn pendulum_transform(p: &PendulumParams, nominal: &NominalSpec) -> Result<HomogeneityTransform> {
    p.validate()?;
    let PlantParams::Pendulum(n) = nominal.params else {
        return Err(Error::InvalidInput("nominal spec is not a pendulum".into()));
    };
    let freq = (p.g / p.l).sqrt();
    let freq_n = (n.g / n.l).sqrt();
    let zeta = freq / freq_n;
    Ok(HomogeneityTransform {
        zeta,
        kappa: vec![1.0, zeta],
        state_scales: vec![1.0, 1.0 / zeta],
        control_scale: (p.m * p.g * p.l) / (n.m * n.g * n.l),
        reduced_params: Vec::new(),
    })
}

/// Transform of a vehicle/load plant relative to `nominal`; the mass ratios
/// must agree to [`DEFAULT_MU_TOL`].
pub fn driverload_transform(p: &DriverLoadParams, nominal: &NominalSpec) -> Result<HomogeneityTransform> {
    driverload_transform_with_tol(p, nominal, DEFAULT_MU_TOL)
}

pub fn driverload_transform_with_tol(
    p: &DriverLoadParams,
    nominal: &NominalSpec,
    mu_tol: f64,
) -> Result<HomogeneityTransform> {
    p.validate()?;
    let PlantParams::DriverLoad(n) = nominal.params else {
        return Err(Error::InvalidInput("nominal spec is not a driver-load plant".into()));
    };
    if (p.mu() - n.mu()).abs() > mu_tol {
        return Err(Error::UnsupportedParameter(format!(
            "mass ratio {} differs from the trained ratio {}",
            p.mu(),
            n.mu()
        )));
    }
    let zeta = (p.g / p.l).sqrt() / (n.g / n.l).sqrt();
    let length = p.l / n.l;
    Ok(HomogeneityTransform {
        zeta,
        kappa: vec![1.0, zeta, length, length * zeta],
        state_scales: vec![1.0, 1.0 / zeta, 1.0 / length, 1.0 / (length * zeta)],
        control_scale: (p.m * p.g) / (n.m * n.g),
        reduced_params: vec![("mu".into(), p.mu())],
    })
}

/// Dispatches on the plant kind.
pub fn transform_for(params: &PlantParams, nominal: &NominalSpec) -> Result<HomogeneityTransform> {
    match params {
        PlantParams::Pendulum(p) => pendulum_transform(p, nominal),
        PlantParams::DriverLoad(p) => driverload_transform(p, nominal),
    }
}
