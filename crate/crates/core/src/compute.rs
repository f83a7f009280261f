//! Computation time/energy, per-task totals and the priority-weighted cost.

use crate::error::{Error, Result};
use crate::topology::Node;

/// One unit of offloadable work emitted by a device in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub device: usize,
    pub task_type: usize,
    pub data_bits: f64,
    pub priority: f64,
    pub cpu_cycles: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeParams {
    /// UAV CPU frequency, also used when another UAV is the offload target.
    pub f_uav: f64,
    /// MEC server CPU frequency.
    pub f_mec: f64,
    pub kappa_uav: f64,
    pub kappa_mec: f64,
    /// Decision-making time `t_a`, seconds.
    pub decision_time: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Also charge the device's first-hop energy on the offload path.
    pub charge_first_hop_on_offload: bool,
}

impl ComputeParams {
    /// 100 MHz UAVs, 500 MHz MEC, κ = 1e-16 / 1e-22, t_a = 10 ms, α = β = 0.5.
    pub fn table1() -> Self {
        Self {
            f_uav: 100e6,
            f_mec: 500e6,
            kappa_uav: 1e-16,
            kappa_mec: 1e-22,
            decision_time: 0.01,
            alpha: 0.5,
            beta: 0.5,
            charge_first_hop_on_offload: false,
        }
    }

    /// Frequency and energy coefficient of the processor at `node`.
    pub fn processor(&self, node: Node) -> (f64, f64) {
        match node {
            Node::Uav(_) => (self.f_uav, self.kappa_uav),
            Node::Mec => (self.f_mec, self.kappa_mec),
        }
    }

    pub fn invalid_field(&self) -> Option<(&'static str, &'static str)> {
        let checks: [(&str, bool, &str); 7] = [
            ("f_uav", self.f_uav > 0.0, "must be positive"),
            ("f_mec", self.f_mec > 0.0, "must be positive"),
            ("kappa_uav", self.kappa_uav >= 0.0, "must be non-negative"),
            ("kappa_mec", self.kappa_mec >= 0.0, "must be non-negative"),
            ("decision_time", self.decision_time >= 0.0, "must be non-negative"),
            ("alpha", self.alpha >= 0.0 && self.beta >= 0.0, "weights must be non-negative"),
            ("beta", self.alpha + self.beta > 0.0, "alpha + beta must be positive"),
        ];
        checks
            .into_iter()
            .find(|(_, ok, _)| !ok)
            .map(|(name, _, why)| (name, why))
    }
}

impl Default for ComputeParams {
    fn default() -> Self {
        Self::table1()
    }
}

pub fn compute_time(cycles: f64, freq: f64) -> f64 {
    cycles / freq
}

pub fn compute_energy(kappa: f64, freq: f64, cycles: f64) -> f64 {
    kappa * freq * freq * cycles
}

/// Per-leg times and energies feeding [`task_totals`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TaskLegs {
    pub first_hop_time: f64,
    pub first_hop_energy: f64,
    /// Ignored on the local route.
    pub second_hop_time: f64,
    pub second_hop_energy: f64,
    pub decision_time: f64,
    pub compute_time: f64,
    pub compute_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskOutcome {
    pub processed_locally: bool,
    pub target: Option<Node>,
    pub total_delay: f64,
    pub total_energy: f64,
    pub weighted_cost: f64,
}

/// Totals for one task. Exactly one of `local` and `target` must be set.
///
/// Local: `T = t_ns + t_a + t_loc`, `E = E_ns + E_loc`.
/// Offload: `T = t_ns + t_ms + t_a + t_edg`, `E = E_ms + E_edg`, plus `E_ns`
/// when `charge_first_hop_on_offload` is set.
pub fn task_totals(
    task: &Task,
    local: bool,
    target: Option<Node>,
    legs: &TaskLegs,
    params: &ComputeParams,
) -> Result<TaskOutcome> {
    let (delay, energy) = match (local, target) {
        (true, None) => (
            legs.first_hop_time + legs.decision_time + legs.compute_time,
            legs.first_hop_energy + legs.compute_energy,
        ),
        (false, Some(_)) => {
            let mut energy = legs.second_hop_energy + legs.compute_energy;
            if params.charge_first_hop_on_offload {
                energy += legs.first_hop_energy;
            }
            (
                legs.first_hop_time + legs.second_hop_time + legs.decision_time + legs.compute_time,
                energy,
            )
        }
        _ => return Err(Error::RouteConflict),
    };
    Ok(TaskOutcome {
        processed_locally: local,
        target,
        total_delay: delay,
        total_energy: energy,
        weighted_cost: weighted_cost(task.priority, delay, energy, params.alpha, params.beta),
    })
}

/// `p · (α·T + β·E)`.
pub fn weighted_cost(priority: f64, delay: f64, energy: f64, alpha: f64, beta: f64) -> f64 {
    priority * (alpha * delay + beta * energy)
}
