use std::collections::VecDeque;

use rand::Rng;

/// One agent's experience tuple. Observations are stored as state indices
/// (see [`super::ObsCodec`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: u32,
    pub action: u16,
    pub reward: f64,
    pub next_obs: u32,
    pub done: bool,
}

/// FIFO experience buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Draws `n` transitions uniformly at random, with replacement.
    pub fn sample_into<R: Rng>(&self, n: usize, rng: &mut R, out: &mut Vec<Transition>) {
        out.clear();
        if self.items.is_empty() {
            return;
        }
        out.extend((0..n).map(|_| self.items[rng.gen_range(0..self.items.len())]));
    }
}
