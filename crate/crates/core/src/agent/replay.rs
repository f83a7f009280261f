//! Shared replay pool of per-slot experience groups.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// One UAV's transition in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    /// Global reward of the slot.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub mask: Vec<bool>,
    pub next_mask: Vec<bool>,
    pub terminal: bool,
}

/// Ring buffer of slot groups, each holding one experience per UAV.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    group_size: usize,
    groups: VecDeque<Vec<Experience>>,
}

/// Whole slot groups drawn uniformly without replacement.
#[derive(Debug, Clone)]
pub struct CoMBatch<'a> {
    pub groups: Vec<&'a [Experience]>,
}

impl CoMBatch<'_> {
    /// The experiences of `uav` across the batch.
    pub fn column(&self, uav: usize) -> impl Iterator<Item = &Experience> + '_ {
        self.groups.iter().map(move |g| &g[uav])
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, group_size: usize) -> Result<Self> {
        if capacity == 0 || group_size == 0 {
            return Err(Error::InvalidArgument("replay capacity and group size must be positive".into()));
        }
        Ok(Self { capacity, group_size, groups: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group `i`, oldest first.
    pub fn get(&self, i: usize) -> Option<&[Experience]> {
        self.groups.get(i).map(Vec::as_slice)
    }

    /// Appends one slot's experiences, evicting the oldest group when full.
    pub fn store(&mut self, group: Vec<Experience>) -> Result<()> {
        if group.len() != self.group_size {
            return Err(Error::GroupSizeMismatch { expected: self.group_size, got: group.len() });
        }
        if self.groups.len() == self.capacity {
            self.groups.pop_front();
        }
        self.groups.push_back(group);
        Ok(())
    }

    pub fn sample_com<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<CoMBatch<'_>> {
        if batch_size > self.groups.len() || batch_size == 0 {
            return Err(Error::InsufficientData { available: self.groups.len(), requested: batch_size });
        }
        let idx = rand::seq::index::sample(rng, self.groups.len(), batch_size);
        Ok(CoMBatch { groups: idx.iter().map(|i| self.groups[i].as_slice()).collect() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn exp(tag: usize) -> Experience {
        Experience {
            state: vec![tag as f64, 0.5],
            action: tag % 4,
            reward: -(tag as f64),
            next_state: vec![tag as f64 + 1.0, 0.5],
            mask: vec![true; 4],
            next_mask: vec![true, false, true, true],
            terminal: tag % 2 == 0,
        }
    }

    fn group(tag: usize, m: usize) -> Vec<Experience> {
        (0..m).map(|u| exp(tag * 10 + u)).collect()
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2, 2).unwrap();
        for t in 0..3 {
            b.store(group(t, 2)).unwrap();
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.get(0).unwrap()[0], exp(10));
        assert_eq!(b.get(1).unwrap()[1], exp(21));
    }

    #[test]
    fn size_is_min_of_inserts_and_capacity() {
        let mut b = ReplayBuffer::new(5, 1).unwrap();
        for k in 1..=8 {
            b.store(group(k, 1)).unwrap();
            assert_eq!(b.len(), k.min(5));
        }
    }

    #[test]
    fn group_size_enforced() {
        let mut b = ReplayBuffer::new(5, 3).unwrap();
        assert_eq!(b.store(group(0, 2)), Err(Error::GroupSizeMismatch { expected: 3, got: 2 }));
        b.store(group(4, 3)).unwrap();
        assert_eq!(b.get(0).unwrap(), group(4, 3).as_slice());
    }

    #[test]
    fn exhaustive_sample_covers_every_group() {
        let mut b = ReplayBuffer::new(10, 3).unwrap();
        for t in 0..7 {
            b.store(group(t, 3)).unwrap();
        }
        let batch = b.sample_com(7, &mut rng_from_seed(1)).unwrap();
        let mut tags: Vec<usize> = batch.groups.iter().map(|g| g[0].state[0] as usize / 10).collect();
        tags.sort();
        assert_eq!(tags, (0..7).collect::<Vec<_>>());
        for g in &batch.groups {
            assert_eq!(g.len(), 3);
            let slot = g[0].state[0] as usize / 10;
            assert!(g.iter().all(|e| e.state[0] as usize / 10 == slot));
        }
        assert_eq!(
            b.sample_com(8, &mut rng_from_seed(1)).unwrap_err(),
            Error::InsufficientData { available: 7, requested: 8 }
        );
    }

    #[test]
    fn sampling_is_uniform_over_groups() {
        let mut b = ReplayBuffer::new(10, 1).unwrap();
        for t in 0..10 {
            b.store(group(t, 1)).unwrap();
        }
        let mut rng = rng_from_seed(2);
        let mut counts = [0f64; 10];
        let draws = 100_000;
        for _ in 0..draws {
            let batch = b.sample_com(1, &mut rng).unwrap();
            counts[batch.groups[0][0].state[0] as usize / 10] += 1.0;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 99.9% quantile of χ² with 9 degrees of freedom.
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }
}
