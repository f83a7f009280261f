//! Per-slot, per-UAV episode traces.

use std::io::Write;

use serde::Serialize;

use super::StepOutcome;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub slot: usize,
    pub uav: usize,
    pub action: usize,
    pub reward: f64,
    pub delay: f64,
    pub energy: f64,
    pub violations: u32,
}

impl TraceRow {
    /// One row per UAV for a finished slot. `reward` is the global reward.
    pub fn from_step(slot: usize, outcome: &StepOutcome) -> Vec<TraceRow> {
        outcome
            .per_uav
            .iter()
            .enumerate()
            .map(|(uav, s)| TraceRow {
                slot,
                uav,
                action: s.executed,
                reward: outcome.global_reward,
                delay: s.delay,
                energy: s.energy,
                violations: s.violations.total(),
            })
            .collect()
    }
}

/// Writes `slot,uav,action,reward,delay,energy,violations` rows.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
