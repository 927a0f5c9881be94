use std::collections::VecDeque;

use rand::Rng;

/// A stored sample split into `k` copies, `remaining` of which are still to be replayed.
#[derive(Clone, Debug, PartialEq)]
pub struct OutlierEntry<P> {
    pub payload: P,
    pub k: u64,
    pub remaining: u64,
}

/// Bounded store of split samples awaiting replay. On overflow the oldest entry is dropped.
#[derive(Clone, Debug)]
pub struct OutlierBuffer<P> {
    entries: VecDeque<OutlierEntry<P>>,
    capacity: usize,
    /// `Σ (k − 1)` over all insertions.
    pub inserted_copies: u64,
    pub insertions: u64,
    pub replays: u64,
    pub high_water: usize,
    pub dropped: u64,
}

impl<P> OutlierBuffer<P> {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: VecDeque::new(),
            capacity,
            inserted_copies: 0,
            insertions: 0,
            replays: 0,
            high_water: 0,
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &OutlierEntry<P>> {
        self.entries.iter()
    }

    /// Stores `(payload, k, k − 1)`; `k ≤ 1` is ignored.
    pub fn insert(&mut self, payload: P, k: u64) {
        if k <= 1 {
            return;
        }
        if self.entries.len() >= self.capacity {
            self.entries.pop_front();
            self.dropped += 1;
            log::warn!(
                "outlier buffer full ({} entries); dropped the oldest entry",
                self.capacity
            );
        }
        self.entries.push_back(OutlierEntry {
            payload,
            k,
            remaining: k - 1,
        });
        self.insertions += 1;
        self.inserted_copies += k - 1;
        self.high_water = self.high_water.max(self.entries.len());
    }

    /// With probability `min(1, σ·len)` picks an entry uniformly at random.
    pub fn draw<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Option<usize> {
        if self.entries.is_empty() {
            return None;
        }
        let p = (sigma * self.entries.len() as f64).min(1.0);
        if rng.gen::<f64>() < p {
            Some(rng.gen_range(0..self.entries.len()))
        } else {
            None
        }
    }

    pub fn get(&self, idx: usize) -> &OutlierEntry<P> {
        &self.entries[idx]
    }

    /// Uses one copy of entry `idx`, removing the entry once none remain.
    pub fn consume(&mut self, idx: usize) {
        self.replays += 1;
        let entry = &mut self.entries[idx];
        if entry.remaining > 1 {
            entry.remaining -= 1;
        } else {
            self.entries.remove(idx);
        }
    }
}
