//! The training loop.

use std::io::Write;

use serde::Serialize;

use super::{compute_targets, select_action, stack, AgentConfig, Experience, ReplayBuffer};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::nn::{init_network, sync_target, QNetwork};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Window of the moving-average reward column.
pub const MOVING_AVERAGE_WINDOW: usize = 10;

pub const METRICS_HEADER: &str =
    "episode,cumulative_reward,moving_avg_reward,total_delay_s,total_energy_J,violations,epsilon";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub moving_avg_reward: f64,
    #[serde(rename = "total_delay_s")]
    pub total_delay: f64,
    #[serde(rename = "total_energy_J")]
    pub total_energy: f64,
    pub violations: u32,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// One network per UAV, or a single shared one.
    pub networks: Vec<QNetwork>,
    pub metrics: Vec<EpisodeMetrics>,
    /// Executed actions that were masked at decision time. Always zero.
    pub masked_executions: u64,
    /// Selections the environment replaced by the fallback action.
    pub mask_overrides: u64,
    pub gradient_updates: u64,
}

/// Reset seed of training episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, stream::TASKS, 1 + episode as u64)
}

/// Appends the moving average of the last [`MOVING_AVERAGE_WINDOW`] rewards.
pub(crate) fn finish_episode(metrics: &mut Vec<EpisodeMetrics>, mut m: EpisodeMetrics) {
    let start = (metrics.len() + 1).saturating_sub(MOVING_AVERAGE_WINDOW);
    let window: Vec<f64> = metrics[start..]
        .iter()
        .map(|e| e.cumulative_reward)
        .chain([m.cumulative_reward])
        .collect();
    m.moving_avg_reward = window.iter().sum::<f64>() / window.len() as f64;
    metrics.push(m);
}

/// Runs the masked multi-agent DDQN loop on a fresh environment seeded by
/// `seed`. With `cfg.masking` off the agents choose over every action and
/// the environment converts masked choices into the fallback plus penalty.
pub fn train(env_cfg: &EnvConfig, cfg: &AgentConfig, seed: u64) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut env = Env::new(EnvConfig { seed, ..env_cfg.clone() })?;
    let m = env.config().n_uavs;
    let n_actions = env.config().n_actions();
    let dims = cfg.layer_dims(env.config().n_task_types);
    let n_nets = if cfg.share_parameters { 1 } else { m };
    let mut online = (0..n_nets)
        .map(|i| init_network(&dims, derive_seed(seed, stream::NETWORK_INIT, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut target = online.clone();
    let net_of = |u: usize| if cfg.share_parameters { 0 } else { u };

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, m)?;
    let mut explore_rng = rng_from_seed(derive_seed(seed, stream::EXPLORATION, 0));
    let mut replay_rng = rng_from_seed(derive_seed(seed, stream::REPLAY, 0));
    let schedule = cfg.epsilon_schedule();
    let all_open = vec![true; n_actions];

    let mut out = TrainOutput {
        networks: Vec::new(),
        metrics: Vec::with_capacity(cfg.episodes),
        masked_executions: 0,
        mask_overrides: 0,
        gradient_updates: 0,
    };
    let mut slots_seen = 0u64;

    for episode in 0..cfg.episodes {
        env.reset(episode_seed(seed, episode))?;
        let epsilon = schedule.value(episode);
        let mut states = env.encoded_states();
        let mut masks: Vec<Vec<bool>> = env.observations().iter().map(|o| o.mask.clone()).collect();
        let mut ep = EpisodeMetrics {
            episode,
            cumulative_reward: 0.0,
            moving_avg_reward: 0.0,
            total_delay: 0.0,
            total_energy: 0.0,
            violations: 0,
            epsilon,
        };

        while !env.is_done() {
            let joint = (0..m)
                .map(|u| {
                    let allowed = if cfg.masking { &masks[u] } else { &all_open };
                    select_action(&online[net_of(u)], &states[u], allowed, epsilon, &mut explore_rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let outcome = if cfg.masking { env.step(&joint)? } else { env.step_lenient(&joint)? };
            for (u, s) in outcome.per_uav.iter().enumerate() {
                out.masked_executions += !masks[u][s.executed] as u64;
            }
            out.mask_overrides += outcome.violations.mask_override as u64;

            let next_states = env.encoded_states();
            let next_masks: Vec<Vec<bool>> = env.observations().iter().map(|o| o.mask.clone()).collect();
            let group = (0..m)
                .map(|u| Experience {
                    state: std::mem::take(&mut states[u]),
                    action: joint[u],
                    reward: outcome.global_reward * cfg.reward_scale,
                    next_state: next_states[u].clone(),
                    mask: std::mem::take(&mut masks[u]),
                    next_mask: next_masks[u].clone(),
                    terminal: outcome.done,
                })
                .collect();
            buffer.store(group)?;
            states = next_states;
            masks = next_masks;

            ep.cumulative_reward += outcome.global_reward;
            ep.total_delay += outcome.total_delay;
            ep.total_energy += outcome.total_energy;
            ep.violations += outcome.violations.total();

            slots_seen += 1;
            let warm = buffer.len() >= cfg.batch_size;
            if cfg.updates_enabled && warm && slots_seen.is_multiple_of(cfg.update_every as u64) {
                update(&buffer, &mut online, &target, cfg, &mut replay_rng)?;
                out.gradient_updates += 1;
                if out.gradient_updates.is_multiple_of(cfg.target_sync as u64) {
                    for (o, t) in online.iter().zip(target.iter_mut()) {
                        sync_target(o, t)?;
                    }
                }
            }
        }
        finish_episode(&mut out.metrics, ep);
    }
    if out.masked_executions != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} masked actions were executed",
            out.masked_executions
        )));
    }
    out.networks = online;
    Ok(out)
}

fn update(
    buffer: &ReplayBuffer,
    online: &mut [QNetwork],
    target: &[QNetwork],
    cfg: &AgentConfig,
    rng: &mut crate::rng::SimRng,
) -> Result<()> {
    let batch = buffer.sample_com(cfg.batch_size, rng)?;
    let m = batch.groups[0].len();
    let columns: Vec<Vec<&Experience>> = if online.len() == 1 {
        vec![batch.groups.iter().flat_map(|g| g.iter()).collect()]
    } else {
        (0..m).map(|u| batch.column(u).collect()).collect()
    };
    for (i, exps) in columns.iter().enumerate() {
        let y = compute_targets(exps, &online[i], &target[i], cfg.gamma, cfg.mode, cfg.masking)?;
        let x = stack(exps.iter().map(|e| e.state.as_slice()), online[i].input_dim());
        let actions: Vec<usize> = exps.iter().map(|e| e.action).collect();
        online[i].train_step(x.view(), &actions, &y, cfg.learning_rate)?;
    }
    Ok(())
}

/// Writes the metrics stream, preceded by `# key=value` comment lines.
pub fn write_metrics_csv<W: Write>(mut out: W, comments: &[(&str, String)], metrics: &[EpisodeMetrics]) -> Result<()> {
    for (k, v) in comments {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in metrics {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
