//! Brute-force references for small instances: the per-slot optimal joint
//! action, exhaustive knapsack, and a straight-line cost evaluator that
//! shares no code with the channel/compute/env modules.

use std::io::Write;

use serde::Serialize;

use crate::agent::Policy;
use crate::compute::Task;
use crate::env::{Env, EnvConfig, BREACH_RATE_FLOOR};
use crate::error::{Error, Result};
use crate::knapsack::KnapsackResult;
use crate::rng::{derive_seed, stream};
use crate::topology::{NetworkTopology, Node, Position3};

/// Largest joint action space [`optimal_joint_action`] will enumerate.
pub const MAX_CANDIDATES: u128 = 1_000_000;

/// Largest item count [`knapsack_exhaustive`] will enumerate.
pub const MAX_KNAPSACK_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_joint_action: Vec<usize>,
    /// Cost (negative reward) of the best joint action.
    pub best_cost: f64,
    pub evaluated_count: u128,
    pub feasible_count: u128,
}

/// Enumerates every joint action of the current slot and returns the
/// cheapest one whose per-UAV actions are all unmasked. Ties go to the
/// lexicographically smallest joint action.
pub fn optimal_joint_action(env: &Env) -> Result<OracleResult> {
    let m = env.config().n_uavs;
    let a = env.config().n_actions();
    let total = (a as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if total > MAX_CANDIDATES {
        return Err(Error::InstanceTooLarge(total));
    }
    let masks: Vec<&[bool]> = env.observations().iter().map(|o| o.mask.as_slice()).collect();
    let mut joint = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut feasible = 0u128;
    for _ in 0..total {
        if joint.iter().zip(&masks).all(|(&j, mask)| mask[j]) {
            feasible += 1;
            let cost = env.evaluate(&joint)?.cost();
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, joint.clone()));
            }
        }
        // Odometer with UAV 0 as the most significant digit.
        for d in (0..m).rev() {
            joint[d] += 1;
            if joint[d] < a {
                break;
            }
            joint[d] = 0;
        }
    }
    let (best_cost, best_joint_action) = best.ok_or(Error::EmptyMask)?;
    Ok(OracleResult { best_joint_action, best_cost, evaluated_count: total, feasible_count: feasible })
}

/// The oracle used as a policy.
#[derive(Debug, Clone, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn act(&mut self, env: &Env) -> Result<Vec<usize>> {
        Ok(optimal_joint_action(env)?.best_joint_action)
    }

    fn respects_mask(&self) -> bool {
        true
    }
}

/// Exact subset enumeration with the same unit rounding and tie rules as
/// the dynamic program: maximal value, then minimal weight, then the
/// selection that takes the lowest-indexed items.
pub fn knapsack_exhaustive(tasks: &[Task], capacity_bits: f64) -> Result<KnapsackResult> {
    let n = tasks.len();
    if n > MAX_KNAPSACK_ITEMS {
        return Err(Error::InstanceTooLarge(1u128 << n));
    }
    let to_units = |bits: f64, up: bool| -> u64 {
        let u = bits / 1000.0;
        let r = u.round();
        let v = if (u - r).abs() < 1e-6 { r } else if up { u.ceil() } else { u.floor() };
        v.max(0.0) as u64
    };
    let cap = to_units(capacity_bits.max(0.0), false);
    let units: Vec<u64> = tasks.iter().map(|t| to_units(t.data_bits, true)).collect();

    let mut best: Option<(f64, f64, Vec<bool>)> = None;
    for subset in 0u32..(1u32 << n) {
        let sel: Vec<bool> = (0..n).map(|i| subset >> i & 1 == 1).collect();
        let used: u64 = (0..n).filter(|&i| sel[i]).map(|i| units[i]).sum();
        if used > cap {
            continue;
        }
        let (mut value, mut weight) = (0.0, 0.0);
        for i in (0..n).filter(|&i| sel[i]) {
            value += tasks[i].priority;
            weight += tasks[i].data_bits;
        }
        let better = match &best {
            None => true,
            Some((bv, bw, bsel)) => {
                if value > bv + 1e-9 {
                    true
                } else if value < bv - 1e-9 {
                    false
                } else if weight < bw - 1e-6 {
                    true
                } else if weight > bw + 1e-6 {
                    false
                } else {
                    // true > false: prefer taking earlier items.
                    sel > *bsel
                }
            }
        };
        if better {
            best = Some((value, weight, sel));
        }
    }
    let (total_value, total_weight, selected) = best.expect("the empty set always fits");
    Ok(KnapsackResult { selected, total_value, total_weight })
}

/// Routing of one task: `x` = process locally, `y` = offload target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub local: bool,
    pub target: Option<Node>,
}

/// Everything [`cost_recompute`] reads from an environment.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub config: EnvConfig,
    pub topology: NetworkTopology,
    pub tasks: Vec<Vec<Task>>,
    pub capacity_free: Vec<f64>,
}

impl Snapshot {
    pub fn of(env: &Env) -> Self {
        Self {
            config: env.config().clone(),
            topology: env.topology().clone(),
            tasks: env.tasks().to_vec(),
            capacity_free: env.capacity_free().to_vec(),
        }
    }

    /// Decision variables implied by a joint action under the environment's
    /// routing rule (offloaded tasks go to the UAV's best target).
    pub fn decisions(&self, env: &Env, joint: &[usize]) -> Vec<Vec<Decision>> {
        self.tasks
            .iter()
            .enumerate()
            .map(|(u, tasks)| {
                tasks
                    .iter()
                    .map(|t| {
                        let local = joint[u] >> t.task_type & 1 == 1;
                        Decision { local, target: (!local).then(|| env.links().best(u).0) }
                    })
                    .collect()
            })
            .collect()
    }
}

fn dist(a: &Position3, b: &Position3) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// Cost of the slot, `Σ p·(α·T + β·E)` plus the penalty for every delay and
/// second-hop secrecy breach, evaluated from raw positions.
pub fn cost_recompute(snapshot: &Snapshot, decisions: &[Vec<Decision>]) -> Result<f64> {
    let cfg = &snapshot.config;
    let ch = &cfg.channel;
    let cp = &cfg.compute;
    let topo = &snapshot.topology;
    let k0 = 4.0 * std::f64::consts::PI * ch.carrier_freq / 2.998e8;
    let rate = |share: f64, power: f64, loss: f64| (ch.bandwidth / share) * (1.0 + power / loss / ch.noise_power).log2();
    let ground_air_loss = |g: &Position3, a: &Position3| {
        let d = dist(g, a);
        let theta = ((a.z - g.z) / d).asin() * 180.0 / std::f64::consts::PI;
        let p = 1.0 / (1.0 + ch.a * (-ch.b * (theta - ch.a)).exp());
        (ch.eta_los * p + ch.eta_nlos * (1.0 - p)) * (k0 * d).powf(ch.path_loss_exp)
    };
    let los_loss = |a: &Position3, b: &Position3| ch.eta_los * (k0 * dist(a, b)).powf(ch.path_loss_exp);
    let timing_rate = |secrecy: f64| {
        if secrecy >= cfg.min_secrecy_rate && secrecy > 0.0 {
            (secrecy, false)
        } else {
            (cfg.min_secrecy_rate.max(BREACH_RATE_FLOOR), true)
        }
    };

    let m_count = topo.n_uavs() as f64;
    let mut total = 0.0;
    let mut breaches = 0u32;
    for (u, (tasks, decs)) in snapshot.tasks.iter().zip(decisions).enumerate() {
        if tasks.len() != decs.len() {
            return Err(Error::DimensionMismatch { expected: tasks.len(), got: decs.len() });
        }
        let uav = &topo.uavs()[u];
        let n_m = topo.association().iter().filter(|&&a| a == u).count() as f64;
        for (t, d) in tasks.iter().zip(decs) {
            let dev = &topo.devices()[t.device];
            let s1 = (rate(n_m, ch.p_device, ground_air_loss(dev, uav))
                - rate(n_m, ch.p_device, ground_air_loss(dev, topo.eve())))
            .max(0.0);
            let (r1, _) = timing_rate(s1);
            let t_ns = t.data_bits / r1;
            let e_ns = ch.p_device * t_ns;
            let (delay, energy) = match (d.local, d.target) {
                (true, None) => {
                    let t_loc = t.cpu_cycles / cp.f_uav;
                    let e_loc = cp.kappa_uav * cp.f_uav * cp.f_uav * t.cpu_cycles;
                    (t_ns + cp.decision_time + t_loc, e_ns + e_loc)
                }
                (false, Some(q)) => {
                    let (pos, f, kappa) = match q {
                        Node::Mec => (topo.mec(), cp.f_mec, cp.kappa_mec),
                        Node::Uav(i) => (&topo.uavs()[i], cp.f_uav, cp.kappa_uav),
                    };
                    let s2 = (rate(m_count, ch.p_uav, los_loss(uav, pos))
                        - rate(m_count, ch.p_uav, los_loss(uav, topo.eve())))
                    .max(0.0);
                    let (r2, breach) = timing_rate(s2);
                    breaches += breach as u32;
                    let t_ms = t.data_bits / r2;
                    let mut e = ch.p_uav * t_ms + kappa * f * f * t.cpu_cycles;
                    if cp.charge_first_hop_on_offload {
                        e += e_ns;
                    }
                    (t_ns + t_ms + cp.decision_time + t.cpu_cycles / f, e)
                }
                _ => return Err(Error::RouteConflict),
            };
            breaches += (delay > cfg.delay_threshold) as u32;
            total += t.priority * (cp.alpha * delay + cp.beta * energy);
        }
    }
    Ok(total + cfg.violation_penalty * breaches as f64)
}

/// One slot of a gap study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub seed: u64,
    pub slot: usize,
    pub policy_cost: f64,
    pub oracle_cost: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub mean_ratio: f64,
}

/// Cost ratio of `policy` against the per-slot optimum over `slots` slots
/// per seed. Both sides see the same task draws; the environment advances
/// with the policy's action.
pub fn optimality_gap(policy: &mut dyn Policy, env_cfg: &EnvConfig, seeds: &[u64], slots: usize) -> Result<GapReport> {
    let mut rows = Vec::with_capacity(seeds.len() * slots);
    for &seed in seeds {
        let mut env = Env::new(EnvConfig { seed, ..env_cfg.clone() })?;
        let mut episode = 0u64;
        for slot in 0..slots {
            if env.is_done() {
                episode += 1;
                env.reset(derive_seed(seed, stream::EVALUATION, episode))?;
            }
            let oracle = optimal_joint_action(&env)?;
            let joint = policy.act(&env)?;
            let policy_cost = if policy.respects_mask() {
                env.evaluate(&joint)?.cost()
            } else {
                env.evaluate_lenient(&joint)?.cost()
            };
            let ratio = if oracle.best_cost > 0.0 {
                policy_cost / oracle.best_cost
            } else if policy_cost <= oracle.best_cost {
                1.0
            } else {
                f64::INFINITY
            };
            rows.push(GapRow { seed, slot, policy_cost, oracle_cost: oracle.best_cost, ratio });
            env.step_lenient(&joint)?;
        }
    }
    let mean_ratio = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len().max(1) as f64;
    Ok(GapReport { rows, mean_ratio })
}

/// Writes `seed,slot,policy_cost,oracle_cost,ratio` rows after `# key=value`
/// comment lines.
pub fn write_gap_csv<W: Write>(mut out: W, comments: &[(&str, String)], rows: &[GapRow]) -> Result<()> {
    for (k, v) in comments {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
