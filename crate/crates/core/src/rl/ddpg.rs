use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::critic::Critic;
use super::env::{reward, PendulumEnv, PendulumEnvSpec, SuccessCriterion};
use super::evaluate::{evaluate_policy, EvalOptions};
use super::network::{flatten_grads, soft_update, Activation, Adam, DenseNetwork};
use super::policy::Policy;
use super::replay::{ReplayBuffer, Transition};
use crate::dynamics::{PendulumParams, PlantParams};
use crate::{Error, Result};

/// Activation after the actor's second hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorHidden {
    Relu,
    Linear,
}

/// Exploration process added to the normalised action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseKind {
    /// Independent draws with the scheduled variance.
    Gaussian,
    /// `n += -theta n dt + sigma sqrt(dt) w`, with `sigma^2` the scheduled
    /// variance and `dt` the control period; reset every episode.
    OrnsteinUhlenbeck { theta: f64 },
}

/// Initial state of the training episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StartState {
    /// The environment's initial state every episode.
    Fixed,
    /// Angle uniform on `[-pi, pi)`, rate uniform on `[-rate, rate]`.
    Uniform { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Exploration variance on the normalised action at the first episode.
    pub noise_variance: f64,
    /// Variance reached at the last episode (linear schedule).
    pub noise_variance_final: f64,
    pub noise: NoiseKind,
    pub start: StartState,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    pub tau: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub seed: u64,
    pub actor_hidden: [usize; 2],
    pub actor_hidden_activation: ActorHidden,
    pub critic_hidden: usize,
    pub critic_joint: usize,
    /// Run a greedy rollout every this many episodes (0 disables).
    pub eval_every: usize,
    /// Stop as soon as a greedy rollout meets `success`.
    pub stop_on_success: bool,
    pub success: SuccessCriterion,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            noise_variance: 0.6,
            noise_variance_final: 0.05,
            noise: NoiseKind::Gaussian,
            start: StartState::Uniform { rate: 1.0 },
            reward_scale: 0.01,
            tau: 1e-3,
            replay_capacity: 1_000_000,
            batch_size: 64,
            episodes: 2000,
            steps_per_episode: 400,
            seed: 0,
            actor_hidden: [400, 300],
            actor_hidden_activation: ActorHidden::Relu,
            critic_hidden: 400,
            critic_joint: 300,
            eval_every: 10,
            stop_on_success: true,
            success: SuccessCriterion::default(),
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.actor_lr, self.critic_lr, self.tau, self.noise_variance, self.reward_scale];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) || self.tau > 1.0 {
            return Err(Error::InvalidInput("learning rates, tau and noise variance must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput("discount must lie in [0, 1]".into()));
        }
        if let NoiseKind::OrnsteinUhlenbeck { theta } = self.noise {
            if !(theta.is_finite() && theta >= 0.0) {
                return Err(Error::InvalidInput("noise mean reversion must be non-negative".into()));
            }
        }
        if let StartState::Uniform { rate } = self.start {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::InvalidInput("start rate spread must be non-negative".into()));
            }
        }
        if !(self.noise_variance_final >= 0.0) {
            return Err(Error::InvalidInput("final noise variance must be non-negative".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::InvalidInput("replay capacity must be at least the batch size".into()));
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::InvalidInput("episodes and steps must be positive".into()));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden == 0 || self.critic_joint == 0 {
            return Err(Error::InvalidInput("hidden widths must be positive".into()));
        }
        Ok(())
    }

    fn noise_std(&self, episode: usize) -> f64 {
        let frac = if self.episodes > 1 { episode as f64 / (self.episodes - 1) as f64 } else { 1.0 };
        let var = self.noise_variance + (self.noise_variance_final - self.noise_variance) * frac;
        var.max(0.0).sqrt()
    }
}

/// Uniform parameter ranges for domain randomisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrRanges {
    pub l: [f64; 2],
    pub m: [f64; 2],
}

impl DrRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("l", self.l), ("m", self.m)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]) {
                return Err(Error::InvalidInput(format!("invalid {name} range [{}, {}]", r[0], r[1])));
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, g: f64, rng: &mut R) -> PendulumParams {
        let draw = |r: [f64; 2], rng: &mut R| {
            if r[0] == r[1] {
                r[0]
            } else {
                Uniform::new_inclusive(r[0], r[1]).expect("validated range").sample(rng)
            }
        };
        let l = draw(self.l, rng);
        let m = draw(self.m, rng);
        PendulumParams { m, l, g }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub steps: usize,
    pub m: f64,
    pub l: f64,
    /// Greedy evaluation outcome, when one ran after this episode.
    pub greedy_success: Option<bool>,
    pub greedy_return: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub policy: Policy,
    pub log: Vec<EpisodeLog>,
    /// First episode after which a greedy rollout succeeded.
    pub solved_at: Option<usize>,
}

/// Writes the `episode,return,steps` training log.
pub fn write_training_log(log: &[EpisodeLog], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "episode,return,steps")?;
    for e in log {
        writeln!(out, "{},{},{}", e.episode, crate::dynamics::fmt17(e.ret), e.steps)?;
    }
    out.flush()?;
    Ok(())
}

/// Trains on the plant described by `env`.
pub fn train_ddpg(env: &PendulumEnvSpec, cfg: &DdpgConfig) -> Result<TrainingOutcome> {
    train(env, cfg, None)
}

/// Trains with `m` and `l` redrawn uniformly at the start of every episode.
///
/// Parameters come from their own random stream, so collapsed ranges
/// reproduce [`train_ddpg`] at those values exactly.
pub fn train_ddpg_dr(env: &PendulumEnvSpec, cfg: &DdpgConfig, ranges: &DrRanges) -> Result<TrainingOutcome> {
    ranges.validate()?;
    train(env, cfg, Some(ranges))
}

struct Learner {
    actor: DenseNetwork,
    critic: Critic,
    target_actor: DenseNetwork,
    target_critic: Critic,
    actor_opt: Adam,
    critic_opt: Adam,
}

fn train(env: &PendulumEnvSpec, cfg: &DdpgConfig, ranges: Option<&DrRanges>) -> Result<TrainingOutcome> {
    cfg.validate()?;
    env.params.validate()?;
    if !(env.saturation > 0.0 && env.saturation.is_finite()) {
        return Err(Error::InvalidInput("training saturation must be positive".into()));
    }
    let sat = env.saturation;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut param_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let hidden_act = match cfg.actor_hidden_activation {
        ActorHidden::Relu => Activation::Relu,
        ActorHidden::Linear => Activation::Linear,
    };
    let [h1, h2] = cfg.actor_hidden;
    let actor = DenseNetwork::random(&[2, h1, h2, 1], &[Activation::Relu, hidden_act, Activation::Tanh], sat, Some(3e-3), &mut rng)?;
    let critic = Critic::random(2, 1, cfg.critic_hidden, cfg.critic_joint, &mut rng);
    let mut learner = Learner {
        target_actor: actor.clone(),
        target_critic: critic.clone(),
        actor_opt: Adam::new(&actor, cfg.actor_lr),
        critic_opt: Adam::new(&critic, cfg.critic_lr),
        actor,
        critic,
    };
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity, 2, 1)?;
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut solved_at = None;
    let observation = vec!["theta".to_string(), "theta_dot".to_string()];
    let nominal = PlantParams::Pendulum(env.params);
    let make_policy = |actor: &DenseNetwork| Policy::new(actor.clone(), observation.clone(), nominal, cfg.seed);

    for episode in 0..cfg.episodes {
        let params = match ranges {
            Some(r) => r.sample(env.params.g, &mut param_rng),
            None => env.params,
        };
        let std = cfg.noise_std(episode);
        let white = Normal::new(0.0, 1.0).expect("unit normal");
        let mut ou = 0.0;
        let dt = env.control_period;
        let x0 = match cfg.start {
            StartState::Fixed => env.initial_state,
            StartState::Uniform { rate } => [rng.random_range(-PI..PI), rng.random_range(-rate..=rate)],
        };
        let mut plant = PendulumEnv::new(params, env.control_period, x0)?;
        let mut obs = plant.observation();
        let mut ret = 0.0;
        for _ in 0..cfg.steps_per_episode {
            let greedy = learner.actor.forward(&obs)?[0] / sat;
            if !greedy.is_finite() {
                log.push(EpisodeLog { episode, ret, steps: cfg.steps_per_episode, m: params.m, l: params.l, greedy_success: None, greedy_return: None });
                return Err(Error::TrainingFailure { episode, message: "actor output is not finite".into(), log });
            }
            let w: f64 = white.sample(&mut rng);
            let n = match cfg.noise {
                NoiseKind::Gaussian => std * w,
                NoiseKind::OrnsteinUhlenbeck { theta } => {
                    ou += -theta * ou * dt + std * dt.sqrt() * w;
                    ou
                }
            };
            let a = (greedy + n).clamp(-1.0, 1.0);
            let u = a * sat;
            let (next, _) = plant.step(u)?;
            let r = reward(next[0], next[1], u);
            ret += r;
            buffer.push(Transition { obs: obs.to_vec(), action: vec![a], reward: r * cfg.reward_scale, next_obs: next.to_vec(), done: false })?;
            obs = next;
            if buffer.len() >= cfg.batch_size {
                let loss = learner.update(&buffer, cfg, sat, &mut rng)?;
                if !loss.is_finite() {
                    log.push(EpisodeLog { episode, ret, steps: cfg.steps_per_episode, m: params.m, l: params.l, greedy_success: None, greedy_return: None });
                    return Err(Error::TrainingFailure { episode, message: "critic loss is not finite".into(), log });
                }
            }
        }
        if !ret.is_finite() {
            return Err(Error::TrainingFailure { episode, message: "episode return is not finite".into(), log });
        }
        let mut entry = EpisodeLog { episode, ret, steps: cfg.steps_per_episode, m: params.m, l: params.l, greedy_success: None, greedy_return: None };
        if cfg.eval_every > 0 && (episode + 1) % cfg.eval_every == 0 {
            let policy = make_policy(&learner.actor)?;
            let opts = EvalOptions {
                t_final: cfg.steps_per_episode as f64 * env.control_period,
                control_period: env.control_period,
                saturation: Some(sat),
                success: cfg.success,
                ..EvalOptions::default()
            };
            let result = evaluate_policy(&policy, &PlantParams::Pendulum(env.params), None, &env.initial_state, &opts)?;
            entry.greedy_success = Some(result.success);
            entry.greedy_return = Some(result.ret);
            if result.success && solved_at.is_none() {
                solved_at = Some(episode);
            }
        }
        log.push(entry);
        if cfg.stop_on_success && solved_at.is_some() {
            break;
        }
    }
    Ok(TrainingOutcome { policy: make_policy(&learner.actor)?, log, solved_at })
}

impl Learner {
    /// One critic and actor step on a sampled minibatch; returns the critic loss.
    fn update<R: Rng>(&mut self, buffer: &ReplayBuffer, cfg: &DdpgConfig, sat: f64, rng: &mut R) -> Result<f64> {
        let batch = buffer.sample(cfg.batch_size, rng)?;
        let n = cfg.batch_size as f64;

        let (next_a, _) = self.target_actor.forward_batch(batch.next_obs.view());
        let next_a = next_a / sat;
        let (next_q, _) = self.target_critic.forward_batch(batch.next_obs.view(), next_a.view());
        let (q, cache) = self.critic.forward_batch(batch.obs.view(), batch.action.view());
        let mut d_q = Array2::zeros((batch.reward.len(), 1));
        let mut loss = 0.0;
        for i in 0..batch.reward.len() {
            let cont = if batch.done[i] { 0.0 } else { 1.0 };
            let y = batch.reward[i] + cfg.gamma * cont * next_q[[i, 0]];
            let err = q[[i, 0]] - y;
            loss += err * err / n;
            d_q[[i, 0]] = 2.0 * err / n;
        }
        let grads = self.critic.backward(&cache, d_q.view());
        self.critic_opt.step(&mut self.critic, &grads.flat());

        let (a, actor_cache) = self.actor.forward_batch(batch.obs.view());
        let a = a / sat;
        let (_, q_cache) = self.critic.forward_batch(batch.obs.view(), a.view());
        // ascend Q: descend -Q/n, chained through a = out / sat
        let d_out = self.critic.action_gradient(&q_cache).mapv(|g| -g / (n * sat));
        let (actor_grads, _) = self.actor.backward(&actor_cache, d_out.view());
        self.actor_opt.step(&mut self.actor, &flatten_grads(&actor_grads));

        soft_update(&mut self.target_actor, &self.actor, cfg.tau)?;
        soft_update(&mut self.target_critic, &self.critic, cfg.tau)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64, episodes: usize) -> DdpgConfig {
        DdpgConfig {
            episodes,
            steps_per_episode: 40,
            batch_size: 16,
            replay_capacity: 1000,
            actor_hidden: [16, 12],
            critic_hidden: 16,
            critic_joint: 12,
            eval_every: 0,
            seed,
            ..DdpgConfig::default()
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let env = PendulumEnvSpec::default();
        let a = train_ddpg(&env, &tiny(3, 3)).unwrap();
        let b = train_ddpg(&env, &tiny(3, 3)).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.log, b.log);
        let c = train_ddpg(&env, &tiny(4, 3)).unwrap();
        assert_ne!(a.policy, c.policy);
    }

    #[test]
    fn collapsed_ranges_match_nominal_training() {
        let env = PendulumEnvSpec { params: PendulumParams { m: 1.5, l: 7.0, g: 9.81 }, ..Default::default() };
        let plain = train_ddpg(&env, &tiny(5, 2)).unwrap();
        let dr = train_ddpg_dr(&env, &tiny(5, 2), &DrRanges { l: [7.0, 7.0], m: [1.5, 1.5] }).unwrap();
        assert_eq!(plain.policy.actor, dr.policy.actor);
        assert_eq!(plain.log, dr.log);
    }

    #[test]
    fn dr_samples_within_ranges() {
        let env = PendulumEnvSpec::default();
        let mut cfg = tiny(1, 6);
        cfg.steps_per_episode = 2;
        let out = train_ddpg_dr(&env, &cfg, &DrRanges { l: [6.0, 8.0], m: [0.5, 2.5] }).unwrap();
        for e in &out.log {
            assert!((6.0..=8.0).contains(&e.l) && (0.5..=2.5).contains(&e.m));
        }
    }

    #[test]
    fn divergence_reports_log() {
        let env = PendulumEnvSpec::default();
        let mut cfg = tiny(2, 3);
        cfg.critic_lr = 1e300;
        cfg.steps_per_episode = 30;
        match train_ddpg(&env, &cfg) {
            Err(Error::TrainingFailure { log, .. }) => assert!(!log.is_empty()),
            other => panic!("expected training failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let env = PendulumEnvSpec::default();
        let mut cfg = tiny(0, 1);
        cfg.gamma = 1.5;
        assert!(train_ddpg(&env, &cfg).is_err());
        let mut cfg = tiny(0, 1);
        cfg.replay_capacity = 4;
        assert!(train_ddpg(&env, &cfg).is_err());
        assert!(train_ddpg_dr(&env, &tiny(0, 1), &DrRanges { l: [8.0, 6.0], m: [1.0, 1.0] }).is_err());
    }

    #[test]
    fn training_log_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = vec![EpisodeLog { episode: 0, ret: -1.5, steps: 400, m: 1.0, l: 9.81, greedy_success: None, greedy_return: None }];
        write_training_log(&log, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("episode,return,steps\n0,"));
    }
}
