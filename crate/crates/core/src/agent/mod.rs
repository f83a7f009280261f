//! Multi-agent DDQN with action masking.
//!
//! Every UAV owns an online and a target Q-network. During training each
//! UAV picks an ε-greedy action restricted to its mask, the environment
//! steps, and the slot's experiences go into a shared replay pool as one
//! group. Updates sample whole groups (coordination mini-batches) and
//! regress each UAV's network on its own column of the batch.

mod policy;
mod replay;
mod train;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::QNetwork;

pub use policy::{eval_episode_seed, run_distributed, run_training_episodes, EvalMetrics, GreedyPolicy, Policy, RandomPolicy};
pub use replay::{CoMBatch, Experience, ReplayBuffer};
pub use train::{episode_seed, train, write_metrics_csv, EpisodeMetrics, TrainOutput, METRICS_HEADER, MOVING_AVERAGE_WINDOW};

/// Bootstrap target used in the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Online network picks the next action, target network scores it.
    Double,
    /// Maximum of the target network over feasible next actions.
    PaperEq24,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Self::Double),
            "paper_eq24" => Ok(Self::PaperEq24),
            _ => Err(Error::Parse(format!("unknown mode `{s}` (expected double or paper_eq24)"))),
        }
    }
}

impl std::fmt::Display for TargetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Double => "double",
            Self::PaperEq24 => "paper_eq24",
        })
    }
}

/// Linear decay from `start` to `end` over the first `decay_episodes`
/// episodes, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    /// Slot groups per coordination mini-batch.
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    /// Gradient updates between target synchronisations.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episodes over which ε decays.
    pub epsilon_decay_fraction: f64,
    /// Slots between gradient updates once the pool is warm.
    pub update_every: usize,
    pub mode: TargetMode,
    /// Restrict exploration, greedy choice and targets to the mask.
    pub masking: bool,
    /// One network shared by every UAV.
    pub share_parameters: bool,
    /// Disables learning entirely (networks stay at initialisation).
    pub updates_enabled: bool,
    /// Multiplier applied to rewards before they enter the replay buffer.
    /// Reported metrics always use the raw reward.
    pub reward_scale: f64,
}

impl AgentConfig {
    /// Published hyperparameters plus the documented defaults.
    pub fn table2() -> Self {
        Self {
            learning_rate: 1e-4,
            gamma: 0.9,
            batch_size: 300,
            buffer_capacity: 10_000,
            episodes: 1000,
            hidden: vec![32, 64, 128],
            target_sync: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            update_every: 1,
            mode: TargetMode::Double,
            masking: true,
            share_parameters: false,
            updates_enabled: true,
            reward_scale: 1.0,
        }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_episodes: (self.episodes as f64 * self.epsilon_decay_fraction).round() as usize,
        }
    }

    pub fn layer_dims(&self, n_task_types: usize) -> Vec<usize> {
        let mut dims = vec![2 + 3 * n_task_types];
        dims.extend(&self.hidden);
        dims.push(1 << n_task_types);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: &str| {
            Err(Error::Validation { field: field.into(), reason: reason.into() })
        };
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma", "must lie in [0, 1)");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return fail("reward_scale", "must be positive and finite");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return fail("buffer_capacity", "must hold at least one batch");
        }
        if self.target_sync == 0 {
            return fail("target_sync", "must be positive");
        }
        if self.update_every == 0 {
            return fail("update_every", "must be positive");
        }
        if self.hidden.contains(&0) {
            return fail("hidden", "layer widths must be positive");
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_start) || !eps_ok(self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return fail("epsilon", "need 0 <= end <= start <= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return fail("epsilon_decay_fraction", "must lie in [0, 1]");
        }
        Ok(())
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self::table2()
    }
}

/// Index of the largest `q` among `allowed` entries, lowest index on ties.
pub fn masked_argmax(q: &[f64], allowed: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(allowed).enumerate() {
        if ok && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// ε-greedy choice restricted to `mask`: uniform over unmasked entries with
/// probability ε, otherwise the masked argmax of the network's Q-values.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    features: &[f64],
    mask: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let open: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if open.is_empty() {
        return Err(Error::EmptyMask);
    }
    if open.len() == 1 {
        return Ok(open[0]);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(open[rng.random_range(0..open.len())]);
    }
    let q = net.forward(features)?;
    Ok(masked_argmax(&q, mask).expect("mask has an open entry"))
}

/// Stacks feature vectors into a batch matrix.
pub fn stack<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, width), flat).expect("feature rows share one width")
}

/// Regression targets for `batch`. With `masked`, the bootstrap maximum
/// runs over each experience's `next_mask`; otherwise over every action.
pub fn compute_targets(
    batch: &[&Experience],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
    mode: TargetMode,
    masked: bool,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let width = online.input_dim();
    let next = stack(batch.iter().map(|e| e.next_state.as_slice()), width);
    let q_target = target.forward_batch(next.view())?;
    let q_online = match mode {
        TargetMode::Double => Some(online.forward_batch(next.view())?),
        TargetMode::PaperEq24 => None,
    };
    let all = vec![true; online.output_dim()];
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.terminal || gamma == 0.0 {
                return e.reward;
            }
            let allowed = if masked && e.next_mask.iter().any(|&m| m) { &e.next_mask } else { &all };
            let qt = q_target.row(i);
            let bootstrap = match &q_online {
                Some(qo) => {
                    let row = qo.row(i);
                    let a = masked_argmax(row.as_slice().expect("contiguous row"), allowed).expect("non-empty");
                    qt[a]
                }
                None => {
                    let a = masked_argmax(qt.as_slice().expect("contiguous row"), allowed).expect("non-empty");
                    qt[a]
                }
            };
            e.reward + gamma * bootstrap
        })
        .collect())
}
