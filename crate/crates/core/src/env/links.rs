//! Static per-topology link budget: first-hop secrecy per device and
//! second-hop secrecy from every UAV to every candidate target.

use crate::channel::{m2q_link, n2m_link, ChannelParams, SecrecyLink};
use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, Node};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n2m: Vec<SecrecyLink>,
    m2q: Vec<Vec<(Node, SecrecyLink)>>,
    best: Vec<(Node, SecrecyLink)>,
}

impl LinkTable {
    /// Evaluates every hop of `topo`. The second-hop bandwidth share `N_q` is
    /// the number of UAVs, the worst case at any target.
    pub fn build(topo: &NetworkTopology, params: &ChannelParams) -> Result<Self> {
        let n2m = (0..topo.n_devices())
            .map(|n| {
                let m = topo.uav_of(n);
                n2m_link(
                    &topo.devices()[n],
                    &topo.uavs()[m],
                    topo.eve(),
                    topo.devices_per_uav()[m],
                    params,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let share = topo.n_uavs();
        let mut m2q = Vec::with_capacity(topo.n_uavs());
        for (m, uav) in topo.uavs().iter().enumerate() {
            let mut targets = vec![(Node::Mec, m2q_link(uav, topo.mec(), topo.eve(), share, params)?)];
            for (q, other) in topo.uavs().iter().enumerate() {
                if q != m {
                    targets.push((Node::Uav(q), m2q_link(uav, other, topo.eve(), share, params)?));
                }
            }
            m2q.push(targets);
        }
        let best = m2q.iter().map(|t| best_target(t)).collect();
        Ok(Self { n2m, m2q, best })
    }

    /// First hop of device `n`.
    pub fn n2m(&self, device: usize) -> &SecrecyLink {
        &self.n2m[device]
    }

    /// All second-hop candidates of `uav`, MEC first then UAVs ascending.
    pub fn targets(&self, uav: usize) -> &[(Node, SecrecyLink)] {
        &self.m2q[uav]
    }

    /// The highest-secrecy target of `uav` regardless of the minimum rate.
    pub fn best(&self, uav: usize) -> (Node, SecrecyLink) {
        self.best[uav]
    }
}

fn best_target(targets: &[(Node, SecrecyLink)]) -> (Node, SecrecyLink) {
    // Candidates are ordered MEC first, then UAVs by index; a strict
    // comparison keeps the earliest on ties.
    let mut best = targets[0];
    for cand in &targets[1..] {
        if cand.1.secrecy_rate > best.1.secrecy_rate {
            best = *cand;
        }
    }
    best
}

/// Picks the offload target of `uav`: maximum second-hop secrecy rate, ties
/// to the MEC server then the lowest UAV index. Fails when no target reaches
/// `min_secrecy`.
pub fn select_offload_target(uav: usize, links: &LinkTable, min_secrecy: f64) -> Result<Node> {
    let (node, link) = links.best(uav);
    if link.secrecy_rate >= min_secrecy && link.secrecy_rate > 0.0 {
        Ok(node)
    } else {
        Err(Error::NoSecureTarget { uav })
    }
}
