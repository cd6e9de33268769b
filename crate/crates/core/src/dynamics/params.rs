use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Point-mass pendulum on a massless rod.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    /// Bob mass (kg).
    pub m: f64,
    /// Rod length (m).
    pub l: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
}

impl PendulumParams {
    pub fn new(m: f64, l: f64, g: f64) -> Result<Self> {
        let p = Self { m, l, g };
        p.validate()?;
        Ok(p)
    }

    /// The training point: unit mass with the rod length equal to `g`.
    pub fn nominal() -> Self {
        Self { m: 1.0, l: 9.81, g: 9.81 }
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[("m", self.m), ("l", self.l), ("g", self.g)])
    }
}

/// One-dimensional vehicle carrying a suspended load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverLoadParams {
    /// Vehicle mass (kg).
    #[serde(rename = "M")]
    pub big_m: f64,
    /// Load mass (kg).
    pub m: f64,
    /// Cable length (m).
    pub l: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
}

impl DriverLoadParams {
    pub fn new(big_m: f64, m: f64, l: f64, g: f64) -> Result<Self> {
        let p = Self { big_m, m, l, g };
        p.validate()?;
        Ok(p)
    }

    pub fn nominal() -> Self {
        Self { big_m: 0.85, m: 0.15, l: 1.0, g: 9.81 }
    }

    /// Mass ratio `m / (M + m)`.
    pub fn mu(&self) -> f64 {
        self.m / (self.big_m + self.m)
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[("M", self.big_m), ("m", self.m), ("l", self.l), ("g", self.g)])
    }
}

fn positive(fields: &[(&str, f64)]) -> Result<()> {
    for (name, v) in fields {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Pendulum,
    DriverLoad,
}

impl PlantKind {
    pub fn state_dim(self) -> usize {
        match self {
            PlantKind::Pendulum => 2,
            PlantKind::DriverLoad => 4,
        }
    }

    /// State indices holding angles (wrapped before they are fed back).
    pub fn angle_indices(self) -> &'static [usize] {
        &[0]
    }
}

impl std::str::FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(PlantKind::Pendulum),
            "driver-load" | "driverload" => Ok(PlantKind::DriverLoad),
            other => Err(Error::InvalidInput(format!("unknown plant kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantParams {
    Pendulum(PendulumParams),
    DriverLoad(DriverLoadParams),
}

impl PlantParams {
    pub fn kind(&self) -> PlantKind {
        match self {
            PlantParams::Pendulum(_) => PlantKind::Pendulum,
            PlantParams::DriverLoad(_) => PlantKind::DriverLoad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PlantParams::Pendulum(p) => p.validate(),
            PlantParams::DriverLoad(p) => p.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(PendulumParams::new(0.0, 1.0, 9.81).is_err());
        assert!(PendulumParams::new(1.0, f64::NAN, 9.81).is_err());
        assert!(DriverLoadParams::new(1.0, 1.0, -1.0, 9.81).is_err());
        assert!(PendulumParams::new(1.0, 9.81, 9.81).is_ok());
    }

    #[test]
    fn mass_ratio() {
        let p = DriverLoadParams::nominal();
        assert!((p.mu() - 0.15).abs() < 1e-15);
    }
}
