//! Combination-level feasibility masks over the `2^K` per-UAV actions.

use crate::channel::SecrecyLink;
use crate::compute::{compute_energy, Task};

use super::{effective_rate, is_local, EnvConfig};

/// Everything a UAV's mask depends on.
#[derive(Debug, Clone, Copy)]
pub struct MaskInputs<'a> {
    pub battery: f64,
    pub capacity_free: f64,
    pub tasks: &'a [Task],
    /// Second hop to the UAV's offload target.
    pub second_hop: &'a SecrecyLink,
    pub knapsack_flags: &'a [bool],
}

/// Feasibility of every action combination.
///
/// Combination `c` passes when
/// 1. the data of locally processed tasks fits `capacity_free`;
/// 2. each local task stays within the UAV processing-energy cap and each
///    offloaded task within the UAV transmit-energy cap;
/// 3. offloaded tasks have a second hop meeting the minimum secrecy rate;
/// 4. the UAV's energy for the slot does not exceed its battery;
/// 5. with `knapsack_gates_mask`, local bits only on knapsack-selected types.
///
/// The first hop is shared by every combination and is not part of the mask.
/// If nothing passes, the all-offload combination is unmasked as fallback.
pub fn build_mask(inputs: &MaskInputs<'_>, cfg: &EnvConfig) -> Vec<bool> {
    let n_actions = 1usize << cfg.n_task_types;
    let r_min = cfg.min_secrecy_rate;
    let secure_hop = inputs.second_hop.secrecy_rate >= r_min && inputs.second_hop.secrecy_rate > 0.0;
    let (hop_rate, _) = effective_rate(inputs.second_hop.secrecy_rate, r_min);
    let c = &cfg.compute;

    let mut mask: Vec<bool> = (0..n_actions)
        .map(|action| {
            if cfg.knapsack_gates_mask
                && (0..cfg.n_task_types).any(|k| is_local(action, k) && !inputs.knapsack_flags[k])
            {
                return false;
            }
            let mut local_bits = 0.0;
            let mut energy = 0.0;
            for t in inputs.tasks {
                if is_local(action, t.task_type) {
                    let e = compute_energy(c.kappa_uav, c.f_uav, t.cpu_cycles);
                    if e > cfg.max_proc_energy_uav {
                        return false;
                    }
                    local_bits += t.data_bits;
                    energy += e;
                } else {
                    if !secure_hop {
                        return false;
                    }
                    let e = cfg.channel.p_uav * t.data_bits / hop_rate;
                    if e > cfg.max_tx_energy_uav {
                        return false;
                    }
                    energy += e;
                }
            }
            local_bits <= inputs.capacity_free && energy <= inputs.battery
        })
        .collect();
    if !mask.iter().any(|&m| m) {
        mask[0] = true;
    }
    mask
}

/// Action executed in place of a masked choice: all-offload when it is
/// available, otherwise the lowest unmasked combination.
pub fn fallback_action(mask: &[bool]) -> usize {
    if mask[0] {
        0
    } else {
        mask.iter().position(|&m| m).unwrap_or(0)
    }
}
