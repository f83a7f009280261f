//! 0/1 knapsack selection of local-processing candidates.
//!
//! Items are weighted by data size and valued by priority. Weights are
//! discretised into 1 kbit units, rounding item weights up and the capacity
//! down, so any selection feasible in units is feasible in bits.

use crate::compute::Task;

/// Bits per weight unit.
pub const WEIGHT_UNIT_BITS: f64 = 1000.0;

/// Value ties closer than this are broken by weight.
const VALUE_TOL: f64 = 1e-9;
/// Weight ties closer than this (bits) are broken by index order.
const WEIGHT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackResult {
    pub selected: Vec<bool>,
    pub total_value: f64,
    pub total_weight: f64,
}

impl KnapsackResult {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| i)
            .collect()
    }
}

// Snap values within 1e-6 units of an integer so that exact multiples of the
// unit survive floating-point noise (1.1 MB is not exactly 8.8e6 bits).
fn snapped(units: f64) -> Option<f64> {
    let r = units.round();
    ((units - r).abs() < 1e-6).then_some(r)
}

/// Item weight in units, rounded up.
pub fn item_units(bits: f64) -> usize {
    let u = bits / WEIGHT_UNIT_BITS;
    snapped(u).unwrap_or_else(|| u.ceil()).max(0.0) as usize
}

/// Capacity in units, rounded down.
pub fn capacity_units(bits: f64) -> usize {
    let u = bits / WEIGHT_UNIT_BITS;
    snapped(u).unwrap_or_else(|| u.floor()).max(0.0) as usize
}

/// Maximises total priority subject to total data size within `capacity_bits`.
pub fn select_local_candidates(tasks: &[Task], capacity_bits: f64) -> KnapsackResult {
    let items: Vec<(f64, f64)> = tasks.iter().map(|t| (t.data_bits, t.priority)).collect();
    select_items(&items, capacity_bits)
}

/// Solves the 0/1 knapsack over `(weight_bits, value)` items.
///
/// Among value-optimal selections the lighter one wins (in bits); remaining
/// ties take each item whenever possible, scanning from index 0.
pub fn select_items(items: &[(f64, f64)], capacity_bits: f64) -> KnapsackResult {
    let n = items.len();
    let units: Vec<usize> = items.iter().map(|&(w, _)| item_units(w)).collect();
    let total_units: usize = units.iter().sum();
    let cap = capacity_units(capacity_bits.max(0.0)).min(total_units);

    // best[w] holds the optimum over the suffix items[i..] with capacity w;
    // take[i][w] records whether item i is in that optimum. Walking items from
    // last to first and preferring "take" on ties makes the forward
    // reconstruction pick the lowest indices among equivalent optima.
    let mut best = vec![(0.0f64, 0.0f64); cap + 1];
    let mut take = vec![vec![false; cap + 1]; n];
    for i in (0..n).rev() {
        let (wb, v) = items[i];
        let u = units[i];
        let prev = best.clone();
        for w in u..=cap {
            let skip = prev[w];
            let (rv, rw) = prev[w - u];
            let cand = (rv + v, rw + wb);
            if at_least_as_good(cand, skip) {
                best[w] = cand;
                take[i][w] = true;
            }
        }
    }

    let mut selected = vec![false; n];
    let mut w = cap;
    for i in 0..n {
        if take[i][w] {
            selected[i] = true;
            w -= units[i];
        }
    }
    let (total_value, total_weight) = items
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .fold((0.0, 0.0), |(v, wt), (&(wb, iv), _)| (v + iv, wt + wb));
    debug_assert!(total_weight <= capacity_bits.max(0.0) + WEIGHT_TOL);
    KnapsackResult { selected, total_value, total_weight }
}

fn at_least_as_good(a: (f64, f64), b: (f64, f64)) -> bool {
    if a.0 > b.0 + VALUE_TOL {
        return true;
    }
    if a.0 < b.0 - VALUE_TOL {
        return false;
    }
    a.1 <= b.1 + WEIGHT_TOL
}
