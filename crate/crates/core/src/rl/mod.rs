//! Deterministic policy-gradient training of a swing-up policy.

mod critic;
mod ddpg;
mod env;
mod gradcheck;
mod evaluate;
mod network;
mod policy;
mod replay;

pub use critic::{Critic, CriticCache, CriticGrads};
pub use ddpg::{
    train_ddpg, train_ddpg_dr, write_training_log, ActorHidden, DdpgConfig, DrRanges, EpisodeLog, NoiseKind, StartState, TrainingOutcome,
};
pub use env::{reward, PendulumEnv, PendulumEnvSpec, SuccessCriterion};
pub use evaluate::{evaluate_policy, EpisodeResult, EvalOptions};
pub use network::{
    flatten_grads, soft_update, Activation, Adam, Dense, DenseNetwork, ForwardCache, LayerGrad, Parameters,
};
pub use policy::{Policy, POLICY_FORMAT_VERSION};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use gradcheck::{check_critic, check_network};
