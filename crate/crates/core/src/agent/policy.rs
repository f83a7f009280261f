//! Execution-time policies and the shared evaluation harness.

use rand::Rng;

use super::masked_argmax;
use super::train::{finish_episode, EpisodeMetrics};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::nn::QNetwork;
use crate::rng::{derive_seed, rng_from_seed, stream, SimRng};

/// Chooses a joint action from the current environment state.
pub trait Policy {
    fn name(&self) -> &str;

    fn act(&mut self, env: &Env) -> Result<Vec<usize>>;

    /// Whether every chosen action is unmasked. Policies that may pick
    /// masked actions are executed through the fallback path.
    fn respects_mask(&self) -> bool;
}

/// ε = 0 execution of trained networks on local observations only.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    networks: Vec<QNetwork>,
    masked: bool,
    name: String,
}

impl GreedyPolicy {
    /// `networks` holds one network per UAV, or one shared network.
    pub fn new(networks: Vec<QNetwork>, masked: bool) -> Self {
        let name = if masked { "ddqn_with_mask" } else { "ddqn_no_mask" }.to_string();
        Self { networks, masked, name }
    }

    pub fn networks(&self) -> &[QNetwork] {
        &self.networks
    }
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, env: &Env) -> Result<Vec<usize>> {
        let m = env.config().n_uavs;
        if self.networks.len() != 1 && self.networks.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.networks.len() });
        }
        env.observations()
            .iter()
            .zip(env.encoded_states())
            .enumerate()
            .map(|(u, (obs, features))| {
                let net = &self.networks[if self.networks.len() == 1 { 0 } else { u }];
                let q = net.forward(&features)?;
                let all = vec![true; q.len()];
                let allowed = if self.masked { &obs.mask } else { &all };
                masked_argmax(&q, allowed).ok_or(Error::EmptyMask)
            })
            .collect()
    }

    fn respects_mask(&self) -> bool {
        self.masked
    }
}

/// Uniform choice over unmasked actions, or over every action with
/// `all_actions` (masked picks then incur the fallback penalty).
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: SimRng,
    all_actions: bool,
}

impl RandomPolicy {
    pub fn new(seed: u64, all_actions: bool) -> Self {
        Self { rng: rng_from_seed(derive_seed(seed, stream::BASELINE, 0)), all_actions }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, env: &Env) -> Result<Vec<usize>> {
        env.observations()
            .iter()
            .map(|obs| {
                if self.all_actions {
                    return Ok(self.rng.random_range(0..obs.mask.len()));
                }
                let open: Vec<usize> = (0..obs.mask.len()).filter(|&i| obs.mask[i]).collect();
                if open.is_empty() {
                    return Err(Error::EmptyMask);
                }
                Ok(open[self.rng.random_range(0..open.len())])
            })
            .collect()
    }

    fn respects_mask(&self) -> bool {
        !self.all_actions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub policy: String,
    pub episodes: Vec<EpisodeMetrics>,
    pub mean_reward: f64,
    /// Mean over episodes of the summed task delay, seconds.
    pub mean_total_delay: f64,
    /// Mean over episodes of the summed task energy, joules.
    pub mean_total_energy: f64,
    pub mean_violations: f64,
    pub mask_overrides: u64,
}

/// Reset seed of evaluation episode `episode`.
pub fn eval_episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, stream::EVALUATION, episode as u64)
}

/// Runs `policy` for `episodes` episodes without learning. Mask-respecting
/// policies go through the strict step, so a masked choice is an error.
pub fn run_distributed(policy: &mut dyn Policy, env_cfg: &EnvConfig, seed: u64, episodes: usize) -> Result<EvalMetrics> {
    run_episodes(policy, env_cfg, seed, episodes, eval_episode_seed)
}

/// Runs `policy` over the episode sequence [`super::train`] uses for `seed`,
/// so its curve is comparable with a training curve.
pub fn run_training_episodes(policy: &mut dyn Policy, env_cfg: &EnvConfig, seed: u64, episodes: usize) -> Result<EvalMetrics> {
    run_episodes(policy, env_cfg, seed, episodes, super::train::episode_seed)
}

pub(crate) fn run_episodes(
    policy: &mut dyn Policy,
    env_cfg: &EnvConfig,
    seed: u64,
    episodes: usize,
    reset_seed: fn(u64, usize) -> u64,
) -> Result<EvalMetrics> {
    let mut env = Env::new(EnvConfig { seed, ..env_cfg.clone() })?;
    let mut metrics = Vec::with_capacity(episodes);
    let mut overrides = 0u64;
    for episode in 0..episodes {
        env.reset(reset_seed(seed, episode))?;
        let mut ep = EpisodeMetrics {
            episode,
            cumulative_reward: 0.0,
            moving_avg_reward: 0.0,
            total_delay: 0.0,
            total_energy: 0.0,
            violations: 0,
            epsilon: 0.0,
        };
        while !env.is_done() {
            let joint = policy.act(&env)?;
            let out = if policy.respects_mask() { env.step(&joint)? } else { env.step_lenient(&joint)? };
            ep.cumulative_reward += out.global_reward;
            ep.total_delay += out.total_delay;
            ep.total_energy += out.total_energy;
            ep.violations += out.violations.total();
            overrides += out.violations.mask_override as u64;
        }
        finish_episode(&mut metrics, ep);
    }
    let n = episodes.max(1) as f64;
    let mean = |f: fn(&EpisodeMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
    Ok(EvalMetrics {
        policy: policy.name().to_string(),
        mean_reward: mean(|e| e.cumulative_reward),
        mean_total_delay: mean(|e| e.total_delay),
        mean_total_energy: mean(|e| e.total_energy),
        mean_violations: mean(|e| e.violations as f64),
        mask_overrides: overrides,
        episodes: metrics,
    })
}
