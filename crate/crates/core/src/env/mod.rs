//! The multi-agent offloading MDP.
//!
//! Each UAV is an agent. In every slot each associated device emits one
//! task of a random type; the UAV picks one of `2^K` action combinations
//! where bit `k` set means "process type-`k` tasks locally" and clear means
//! "offload them to the best secure target". The global reward is the
//! negative priority-weighted delay/energy cost of the slot minus a penalty
//! per delay breach, fallback secrecy breach or mask override.

mod links;
mod mask;
mod trace;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::SecrecyLink;
use crate::compute::{compute_energy, compute_time, task_totals, ComputeParams, Task, TaskLegs, TaskOutcome};
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::knapsack::select_local_candidates;
use crate::rng::{derive_seed, rng_from_seed, stream, SimRng};
use crate::topology::{generate_topology, Bounds, NetworkTopology, Node, Position3};

pub use links::{select_offload_target, LinkTable};
pub use mask::{build_mask, fallback_action, MaskInputs};
pub use trace::{write_trace_csv, TraceRow};

/// Rate charged on a hop whose secrecy rate is zero while the configured
/// minimum is also zero, so that breached transfers stay finite.
pub const BREACH_RATE_FLOOR: f64 = 1e3;

/// Bits per (decimal) megabyte.
pub const BITS_PER_MB: f64 = 8e6;

/// Rate used for timing a hop, and whether the hop breaches the minimum
/// secrecy rate. Breached hops are timed at the contracted minimum.
pub fn effective_rate(secrecy: f64, min_secrecy: f64) -> (f64, bool) {
    if secrecy >= min_secrecy && secrecy > 0.0 {
        (secrecy, false)
    } else {
        (min_secrecy.max(BREACH_RATE_FLOOR), true)
    }
}

/// Whether `action` processes type-`k` tasks locally.
pub fn is_local(action: usize, task_type: usize) -> bool {
    action >> task_type & 1 == 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub mean: f64,
    pub std: f64,
}

impl GaussianSpec {
    /// Draws from the Gaussian truncated to `mean ± 3σ` and to positive values.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        let normal = Normal::new(self.mean, self.std).expect("validated std");
        loop {
            let x = normal.sample(rng);
            if (x - self.mean).abs() <= 3.0 * self.std && x > 0.0 {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub channel: ChannelParams,
    pub compute: ComputeParams,
    pub n_devices: usize,
    pub n_uavs: usize,
    pub n_task_types: usize,
    pub bounds: Bounds,
    pub mec_position: Option<Position3>,
    /// Initial UAV battery, joules.
    pub battery_init: f64,
    /// Per-slot UAV capacity for local processing, bits.
    pub capacity_bits: f64,
    pub delay_threshold: f64,
    /// Minimum secrecy rate on both hops, bits/s.
    pub min_secrecy_rate: f64,
    pub max_tx_energy_device: f64,
    pub max_tx_energy_uav: f64,
    pub max_proc_energy_uav: f64,
    pub max_proc_energy_edge: f64,
    pub slots_per_episode: usize,
    /// Task data size, bits.
    pub data_size: GaussianSpec,
    /// Task CPU requirement, cycles.
    pub cpu_cycles: GaussianSpec,
    pub priority_set: Vec<f64>,
    pub violation_penalty: f64,
    pub knapsack_gates_mask: bool,
    /// Draw a fresh deployment at every reset instead of keeping the one
    /// derived from `seed`.
    pub resample_topology: bool,
    pub seed: u64,
}

impl EnvConfig {
    /// Published system parameters, verbatim.
    pub fn table1() -> Self {
        Self {
            channel: ChannelParams::rural(),
            compute: ComputeParams::table1(),
            n_devices: 10,
            n_uavs: 4,
            n_task_types: 3,
            bounds: Bounds::cube(100.0),
            mec_position: None,
            battery_init: 3e4,
            capacity_bits: 3.0 * BITS_PER_MB,
            delay_threshold: 5.0,
            min_secrecy_rate: 1e6,
            max_tx_energy_device: 5.0,
            max_tx_energy_uav: 20.0,
            max_proc_energy_uav: 10.0,
            max_proc_energy_edge: 10.0,
            slots_per_episode: 100,
            data_size: GaussianSpec { mean: BITS_PER_MB, std: 0.1 * BITS_PER_MB },
            cpu_cycles: GaussianSpec { mean: 100e6, std: 10e6 },
            priority_set: vec![0.3, 0.6, 0.9],
            violation_penalty: 100.0,
            knapsack_gates_mask: false,
            resample_topology: true,
            seed: 0,
        }
    }

    /// [`EnvConfig::table1`] with energy coefficients rescaled (1e-27 UAV, 1e-28 MEC) so
    /// that processing energy is commensurate with the battery.
    pub fn consistent() -> Self {
        let mut cfg = Self::table1();
        cfg.compute.kappa_uav = 1e-27;
        cfg.compute.kappa_mec = 1e-28;
        cfg
    }

    pub fn n_actions(&self) -> usize {
        1 << self.n_task_types
    }

    /// Length of [`encode_state`] vectors.
    pub fn feature_len(&self) -> usize {
        2 + 3 * self.n_task_types
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: &str| {
            Err(Error::Validation { field: field.to_string(), reason: reason.to_string() })
        };
        if let Some((field, reason)) = self.channel.invalid_field() {
            return fail(field, reason);
        }
        if let Some((field, reason)) = self.compute.invalid_field() {
            return fail(field, reason);
        }
        let positive = [
            ("n_devices", self.n_devices as f64),
            ("n_uavs", self.n_uavs as f64),
            ("n_task_types", self.n_task_types as f64),
            ("space", self.bounds.x.min(self.bounds.y).min(self.bounds.z)),
            ("battery", self.battery_init),
            ("delay_threshold", self.delay_threshold),
            ("max_tx_energy_device", self.max_tx_energy_device),
            ("max_tx_energy_uav", self.max_tx_energy_uav),
            ("max_proc_energy_uav", self.max_proc_energy_uav),
            ("max_proc_energy_edge", self.max_proc_energy_edge),
            ("slots_per_episode", self.slots_per_episode as f64),
            ("data_size_mean", self.data_size.mean),
            ("cycles_mean", self.cpu_cycles.mean),
        ];
        for (field, v) in positive {
            if !(v > 0.0) {
                return fail(field, "must be positive");
            }
        }
        if self.n_task_types > 16 {
            return fail("n_task_types", "at most 16 task types are supported");
        }
        if !(self.capacity_bits >= 0.0) {
            return fail("capacity", "must be non-negative");
        }
        if !(self.min_secrecy_rate >= 0.0) {
            return fail("min_secrecy_rate", "must be non-negative");
        }
        if !(self.data_size.std >= 0.0) {
            return fail("data_size_std", "must be non-negative");
        }
        if !(self.cpu_cycles.std >= 0.0) {
            return fail("cycles_std", "must be non-negative");
        }
        if self.priority_set.is_empty() || self.priority_set.iter().any(|p| !(*p >= 0.0)) {
            return fail("priorities", "must be a non-empty list of non-negative values");
        }
        if !(self.violation_penalty >= 0.0) {
            return fail("violation_penalty", "must be non-negative");
        }
        if let Some(mec) = self.mec_position {
            if !self.bounds.contains(&mec) || mec.z <= 0.0 {
                return fail("mec_position", "must lie inside the space with z > 0");
            }
        }
        Ok(())
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::table1()
    }
}

/// Per-type view of a UAV's tasks in the current slot.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TypeSummary {
    pub count: usize,
    /// Total data of the type's tasks, bits.
    pub data_bits: f64,
    pub mean_priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavObservation {
    pub battery: f64,
    pub capacity_free: f64,
    pub task_types: Vec<TypeSummary>,
    pub knapsack_flags: Vec<bool>,
    pub mask: Vec<bool>,
}

/// Breach counts per constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    /// C1: task delay above the threshold.
    pub delay: u32,
    /// C2: first-hop secrecy below the minimum.
    pub n2m_secrecy: u32,
    /// C3: second-hop secrecy below the minimum.
    pub m2q_secrecy: u32,
    /// C4: device transmit energy above its cap.
    pub device_tx_energy: u32,
    /// C5: UAV transmit energy above its cap.
    pub uav_tx_energy: u32,
    /// C6: local processing energy above the UAV cap.
    pub local_proc_energy: u32,
    /// C7: edge processing energy above the edge cap.
    pub edge_proc_energy: u32,
    /// C9: local data above the UAV capacity.
    pub capacity: u32,
    /// A masked action was submitted and replaced by the fallback.
    pub mask_override: u32,
}

impl Violations {
    /// Breaches that carry the reward penalty: delay, second-hop secrecy
    /// (reachable only through the fallback action) and mask overrides.
    /// The others are reported but not penalised.
    pub fn penalized(&self) -> u32 {
        self.delay + self.m2q_secrecy + self.mask_override
    }

    pub fn total(&self) -> u32 {
        self.as_array().iter().map(|(_, v)| v).sum()
    }

    pub fn as_array(&self) -> [(&'static str, u32); 9] {
        [
            ("C1", self.delay),
            ("C2", self.n2m_secrecy),
            ("C3", self.m2q_secrecy),
            ("C4", self.device_tx_energy),
            ("C5", self.uav_tx_energy),
            ("C6", self.local_proc_energy),
            ("C7", self.edge_proc_energy),
            ("C9", self.capacity),
            ("mask", self.mask_override),
        ]
    }
}

impl std::ops::AddAssign for Violations {
    fn add_assign(&mut self, o: Self) {
        self.delay += o.delay;
        self.n2m_secrecy += o.n2m_secrecy;
        self.m2q_secrecy += o.m2q_secrecy;
        self.device_tx_energy += o.device_tx_energy;
        self.uav_tx_energy += o.uav_tx_energy;
        self.local_proc_energy += o.local_proc_energy;
        self.edge_proc_energy += o.edge_proc_energy;
        self.capacity += o.capacity;
        self.mask_override += o.mask_override;
    }
}

/// Result of executing one UAV's action for a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UavSlot {
    /// Action submitted by the agent.
    pub action: usize,
    /// Action actually executed (differs after a fallback override).
    pub executed: usize,
    pub cost: f64,
    pub delay: f64,
    pub energy: f64,
    /// Energy drawn from this UAV's battery.
    pub battery_draw: f64,
    pub violations: Violations,
    pub tasks: Vec<TaskOutcome>,
}

/// Outcome of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub global_reward: f64,
    /// Σ p·(α·T + β·E) over all tasks of the slot.
    pub objective: f64,
    pub per_uav: Vec<UavSlot>,
    pub total_delay: f64,
    pub total_energy: f64,
    pub violations: Violations,
    pub done: bool,
}

impl StepOutcome {
    pub fn per_uav_cost(&self) -> Vec<f64> {
        self.per_uav.iter().map(|u| u.cost).collect()
    }

    /// Positive cost of the slot, penalties included.
    pub fn cost(&self) -> f64 {
        -self.global_reward
    }
}

/// Draws one task per device, grouped by serving UAV.
pub fn sample_tasks<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig, topo: &NetworkTopology) -> Vec<Vec<Task>> {
    let mut per_uav = vec![Vec::new(); topo.n_uavs()];
    for device in 0..topo.n_devices() {
        let task_type = rng.random_range(0..cfg.n_task_types);
        let data_bits = cfg.data_size.sample(rng);
        let priority = cfg.priority_set[rng.random_range(0..cfg.priority_set.len())];
        let cpu_cycles = cfg.cpu_cycles.sample(rng);
        per_uav[topo.uav_of(device)].push(Task { device, task_type, data_bits, priority, cpu_cycles });
    }
    per_uav
}

/// Network input for one UAV: `[B/B0, C/C0, (D_k/(3·mean_D), p_k, R_k) for k]`.
pub fn encode_state(obs: &UavObservation, cfg: &EnvConfig) -> Vec<f64> {
    let mut f = Vec::with_capacity(cfg.feature_len());
    f.push(obs.battery / cfg.battery_init);
    f.push(if cfg.capacity_bits > 0.0 { obs.capacity_free / cfg.capacity_bits } else { 0.0 });
    for (summary, &flag) in obs.task_types.iter().zip(&obs.knapsack_flags) {
        if summary.count == 0 {
            f.extend([0.0, 0.0, 0.0]);
        } else {
            f.push(summary.data_bits / (3.0 * cfg.data_size.mean));
            f.push(summary.mean_priority);
            f.push(if flag { 1.0 } else { 0.0 });
        }
    }
    f
}

/// Plans a single task under a route and counts its per-task breaches.
pub(crate) fn plan_task(
    task: &Task,
    local: bool,
    first_hop: &SecrecyLink,
    second_hop: (Node, SecrecyLink),
    cfg: &EnvConfig,
) -> (TaskOutcome, f64, Violations) {
    let ch = &cfg.channel;
    let c = &cfg.compute;
    let mut v = Violations::default();

    let (rate1, breach1) = effective_rate(first_hop.secrecy_rate, cfg.min_secrecy_rate);
    let t1 = task.data_bits / rate1;
    let e1 = ch.p_device * t1;
    v.n2m_secrecy += breach1 as u32;
    v.device_tx_energy += (e1 > cfg.max_tx_energy_device) as u32;

    let mut legs = TaskLegs {
        first_hop_time: t1,
        first_hop_energy: e1,
        decision_time: c.decision_time,
        ..Default::default()
    };
    let (target, uav_draw) = if local {
        legs.compute_time = compute_time(task.cpu_cycles, c.f_uav);
        legs.compute_energy = compute_energy(c.kappa_uav, c.f_uav, task.cpu_cycles);
        v.local_proc_energy += (legs.compute_energy > cfg.max_proc_energy_uav) as u32;
        (None, legs.compute_energy)
    } else {
        let (node, link) = second_hop;
        let (rate2, breach2) = effective_rate(link.secrecy_rate, cfg.min_secrecy_rate);
        legs.second_hop_time = task.data_bits / rate2;
        legs.second_hop_energy = ch.p_uav * legs.second_hop_time;
        let (f, kappa) = c.processor(node);
        legs.compute_time = compute_time(task.cpu_cycles, f);
        legs.compute_energy = compute_energy(kappa, f, task.cpu_cycles);
        v.m2q_secrecy += breach2 as u32;
        v.uav_tx_energy += (legs.second_hop_energy > cfg.max_tx_energy_uav) as u32;
        v.edge_proc_energy += (legs.compute_energy > cfg.max_proc_energy_edge) as u32;
        (Some(node), legs.second_hop_energy)
    };
    let outcome = task_totals(task, local, target, &legs, c).expect("route set by construction");
    v.delay += (outcome.total_delay > cfg.delay_threshold) as u32;
    (outcome, uav_draw, v)
}

/// One environment instance. Not shareable across threads while stepping;
/// clone it to evaluate hypothetical actions.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    topology: NetworkTopology,
    links: LinkTable,
    rng: SimRng,
    slot: usize,
    batteries: Vec<f64>,
    capacity_free: Vec<f64>,
    tasks: Vec<Vec<Task>>,
    observations: Vec<UavObservation>,
    done: bool,
}

impl Env {
    /// Validates `config`, builds the deployment from `config.seed` and
    /// resets with the same seed.
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let (topology, links) = Self::deployment(&config, seed)?;
        let mut env = Self {
            rng: rng_from_seed(derive_seed(seed, stream::TASKS, 0)),
            batteries: Vec::new(),
            capacity_free: Vec::new(),
            tasks: Vec::new(),
            observations: Vec::new(),
            slot: 0,
            done: false,
            config,
            topology,
            links,
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Builds an environment over an explicit deployment.
    pub fn with_topology(config: EnvConfig, topology: NetworkTopology) -> Result<Self> {
        config.validate()?;
        if topology.n_devices() != config.n_devices || topology.n_uavs() != config.n_uavs {
            return Err(Error::InvalidArgument("topology does not match the configured node counts".into()));
        }
        let links = LinkTable::build(&topology, &config.channel)?;
        let seed = config.seed;
        let mut env = Self {
            rng: rng_from_seed(derive_seed(seed, stream::TASKS, 0)),
            batteries: Vec::new(),
            capacity_free: Vec::new(),
            tasks: Vec::new(),
            observations: Vec::new(),
            slot: 0,
            done: false,
            config: EnvConfig { resample_topology: false, ..config },
            topology,
            links,
        };
        env.reset(seed)?;
        Ok(env)
    }

    fn deployment(cfg: &EnvConfig, seed: u64) -> Result<(NetworkTopology, LinkTable)> {
        let mut topo = generate_topology(
            derive_seed(seed, stream::TOPOLOGY, 0),
            cfg.n_devices,
            cfg.n_uavs,
            cfg.bounds,
        )?;
        if let Some(mec) = cfg.mec_position {
            topo.set_mec_position(mec);
        }
        let links = LinkTable::build(&topo, &cfg.channel)?;
        Ok((topo, links))
    }

    /// Starts a new episode: full batteries, free capacity, first slot's
    /// tasks, knapsack flags and masks. The task stream is seeded by `seed`;
    /// the deployment is redrawn from `seed` only with `resample_topology`.
    pub fn reset(&mut self, seed: u64) -> Result<&[UavObservation]> {
        if self.config.resample_topology {
            let (topology, links) = Self::deployment(&self.config, seed)?;
            self.topology = topology;
            self.links = links;
        }
        let m = self.config.n_uavs;
        self.rng = rng_from_seed(derive_seed(seed, stream::TASKS, 0));
        self.slot = 0;
        self.done = false;
        self.batteries = vec![self.config.battery_init; m];
        self.capacity_free = vec![self.config.capacity_bits; m];
        self.tasks = sample_tasks(&mut self.rng, &self.config, &self.topology);
        self.rebuild_observations();
        Ok(&self.observations)
    }

    fn rebuild_observations(&mut self) {
        self.observations = (0..self.config.n_uavs).map(|m| self.observe(m)).collect();
    }

    fn observe(&self, uav: usize) -> UavObservation {
        let k = self.config.n_task_types;
        let tasks = &self.tasks[uav];
        let mut types = vec![TypeSummary::default(); k];
        for t in tasks {
            let s = &mut types[t.task_type];
            s.count += 1;
            s.data_bits += t.data_bits;
            s.mean_priority += t.priority;
        }
        for s in &mut types {
            if s.count > 0 {
                s.mean_priority /= s.count as f64;
            }
        }
        let knapsack_flags = knapsack_flags(tasks, k, self.capacity_free[uav]);
        let (_, second_hop) = self.links.best(uav);
        let mask = build_mask(
            &MaskInputs {
                battery: self.batteries[uav],
                capacity_free: self.capacity_free[uav],
                tasks,
                second_hop: &second_hop,
                knapsack_flags: &knapsack_flags,
            },
            &self.config,
        );
        UavObservation {
            battery: self.batteries[uav],
            capacity_free: self.capacity_free[uav],
            task_types: types,
            knapsack_flags,
            mask,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn links(&self) -> &LinkTable {
        &self.links
    }

    pub fn observations(&self) -> &[UavObservation] {
        &self.observations
    }

    /// Current slot's tasks per UAV.
    pub fn tasks(&self) -> &[Vec<Task>] {
        &self.tasks
    }

    pub fn batteries(&self) -> &[f64] {
        &self.batteries
    }

    pub fn capacity_free(&self) -> &[f64] {
        &self.capacity_free
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Encoded observations of all UAVs.
    pub fn encoded_states(&self) -> Vec<Vec<f64>> {
        self.observations.iter().map(|o| encode_state(o, &self.config)).collect()
    }

    /// Overrides the current slot's tasks and rebuilds observations. Meant
    /// for constructing test scenarios.
    pub fn set_tasks(&mut self, tasks: Vec<Vec<Task>>) -> Result<()> {
        if tasks.len() != self.config.n_uavs {
            return Err(Error::JointActionSize { expected: self.config.n_uavs, got: tasks.len() });
        }
        if tasks.iter().flatten().any(|t| t.task_type >= self.config.n_task_types) {
            return Err(Error::InvalidArgument("task type out of range".into()));
        }
        self.tasks = tasks;
        self.rebuild_observations();
        Ok(())
    }

    /// Overrides batteries and capacity and rebuilds observations.
    pub fn set_resources(&mut self, batteries: Vec<f64>, capacity_free: Vec<f64>) -> Result<()> {
        let m = self.config.n_uavs;
        if batteries.len() != m || capacity_free.len() != m {
            return Err(Error::JointActionSize { expected: m, got: batteries.len().min(capacity_free.len()) });
        }
        self.batteries = batteries;
        self.capacity_free = capacity_free;
        self.rebuild_observations();
        Ok(())
    }

    fn evaluate_uav(&self, uav: usize, action: usize, executed: usize) -> UavSlot {
        let second = self.links.best(uav);
        let mut slot = UavSlot {
            action,
            executed,
            cost: 0.0,
            delay: 0.0,
            energy: 0.0,
            battery_draw: 0.0,
            violations: Violations::default(),
            tasks: Vec::with_capacity(self.tasks[uav].len()),
        };
        let mut local_bits = 0.0;
        for task in &self.tasks[uav] {
            let local = is_local(executed, task.task_type);
            let (outcome, draw, v) = plan_task(task, local, self.links.n2m(task.device), second, &self.config);
            if local {
                local_bits += task.data_bits;
            }
            slot.cost += outcome.weighted_cost;
            slot.delay += outcome.total_delay;
            slot.energy += outcome.total_energy;
            slot.battery_draw += draw;
            slot.violations += v;
            slot.tasks.push(outcome);
        }
        slot.violations.capacity += (local_bits > self.capacity_free[uav]) as u32;
        slot
    }

    fn evaluate_inner(&self, joint: &[usize], lenient: bool) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if joint.len() != self.config.n_uavs {
            return Err(Error::JointActionSize { expected: self.config.n_uavs, got: joint.len() });
        }
        let n_actions = self.config.n_actions();
        let mut per_uav = Vec::with_capacity(joint.len());
        for (m, &action) in joint.iter().enumerate() {
            if action >= n_actions {
                return Err(Error::InvalidArgument(format!("action {action} out of range for uav {m}")));
            }
            let mask = &self.observations[m].mask;
            let slot = if mask[action] {
                self.evaluate_uav(m, action, action)
            } else if lenient {
                let mut s = self.evaluate_uav(m, action, fallback_action(mask));
                s.violations.mask_override += 1;
                s
            } else {
                return Err(Error::MaskViolation { uav: m, action });
            };
            per_uav.push(slot);
        }
        let mut violations = Violations::default();
        let (mut objective, mut delay, mut energy) = (0.0, 0.0, 0.0);
        for s in &per_uav {
            objective += s.cost;
            delay += s.delay;
            energy += s.energy;
            violations += s.violations;
        }
        let global_reward = -(objective + self.config.violation_penalty * violations.penalized() as f64);
        Ok(StepOutcome {
            global_reward,
            objective,
            per_uav,
            total_delay: delay,
            total_energy: energy,
            violations,
            done: false,
        })
    }

    /// Outcome of `joint` in the current slot without advancing. Masked
    /// actions are rejected.
    pub fn evaluate(&self, joint: &[usize]) -> Result<StepOutcome> {
        self.evaluate_inner(joint, false)
    }

    /// Like [`Env::evaluate`], but masked actions are replaced by the
    /// fallback action and counted as `mask_override` breaches.
    pub fn evaluate_lenient(&self, joint: &[usize]) -> Result<StepOutcome> {
        self.evaluate_inner(joint, true)
    }

    /// Executes `joint`; every action must be unmasked.
    pub fn step(&mut self, joint: &[usize]) -> Result<StepOutcome> {
        let outcome = self.evaluate(joint)?;
        Ok(self.advance(outcome))
    }

    /// Executes `joint`, replacing masked actions by the fallback.
    pub fn step_lenient(&mut self, joint: &[usize]) -> Result<StepOutcome> {
        let outcome = self.evaluate_lenient(joint)?;
        Ok(self.advance(outcome))
    }

    fn advance(&mut self, mut outcome: StepOutcome) -> StepOutcome {
        for (b, s) in self.batteries.iter_mut().zip(&outcome.per_uav) {
            *b = (*b - s.battery_draw).max(0.0);
        }
        self.slot += 1;
        let depleted = self.batteries.iter().any(|&b| b <= 0.0);
        self.done = self.slot >= self.config.slots_per_episode || depleted;
        outcome.done = self.done;
        self.capacity_free = vec![self.config.capacity_bits; self.config.n_uavs];
        self.tasks = sample_tasks(&mut self.rng, &self.config, &self.topology);
        self.rebuild_observations();
        outcome
    }
}

/// Knapsack flags per task type: the type's tasks are grouped into a single
/// item (total data, total priority) and selected against `capacity`.
/// Types without tasks are never flagged.
pub fn knapsack_flags(tasks: &[Task], n_types: usize, capacity: f64) -> Vec<bool> {
    let mut groups: Vec<Option<Task>> = vec![None; n_types];
    for t in tasks {
        let g = groups[t.task_type].get_or_insert(Task { data_bits: 0.0, priority: 0.0, cpu_cycles: 0.0, ..*t });
        g.data_bits += t.data_bits;
        g.priority += t.priority;
        g.cpu_cycles += t.cpu_cycles;
    }
    let present: Vec<(usize, Task)> = groups
        .iter()
        .enumerate()
        .filter_map(|(k, g)| g.map(|g| (k, g)))
        .collect();
    let items: Vec<Task> = present.iter().map(|(_, g)| *g).collect();
    let result = select_local_candidates(&items, capacity);
    let mut flags = vec![false; n_types];
    for ((k, _), sel) in present.iter().zip(result.selected) {
        flags[*k] = sel;
    }
    flags
}
