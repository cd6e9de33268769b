use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::DenseNetwork;
use crate::dynamics::PlantParams;
use crate::{Error, Result};

pub const POLICY_FORMAT_VERSION: u32 = 1;
const POLICY_FORMAT: &str = "dualscale-policy";

/// A trained (or scripted) static policy together with the operating point
/// it is valid for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actor: DenseNetwork,
    /// Names of the observation entries, in input order.
    pub observation: Vec<String>,
    /// Output limit used during training; equals the actor's output scale.
    pub saturation: f64,
    pub nominal: PlantParams,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    policy: Policy,
}

impl Policy {
    pub fn new(actor: DenseNetwork, observation: Vec<String>, nominal: PlantParams, seed: u64) -> Result<Self> {
        actor.validate()?;
        if observation.len() != actor.input_dim() || actor.output_dim() != 1 {
            return Err(Error::InvalidInput("policy must map the observation vector to one output".into()));
        }
        nominal.validate()?;
        let saturation = actor.output_scale.abs();
        Ok(Self { actor, observation, saturation, nominal, seed })
    }

    /// Greedy action for an observation.
    pub fn act(&self, observation: &[f64]) -> Result<f64> {
        Ok(self.actor.forward(observation)?[0])
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PolicyFile { format: POLICY_FORMAT.into(), version: POLICY_FORMAT_VERSION, policy: self.clone() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.format != POLICY_FORMAT {
            return Err(Error::InvalidInput(format!("not a policy file (format `{}`)", file.format)));
        }
        if file.version != POLICY_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported policy file version {}", file.version)));
        }
        let p = file.policy;
        Self::new(p.actor, p.observation, p.nominal, p.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
