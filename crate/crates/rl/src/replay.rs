use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RlError};

/// One replay record. Tasks here never terminate, so `continuing` is true for
/// everything the cache agents produce; the flag is kept for toy problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub continuing: bool,
}

/// Bounded ring buffer with a seeded uniform sampler (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
    rng: ChaCha8Rng,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
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

    /// Appends, overwriting the oldest record once full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample(&mut self, batch_size: usize) -> Result<Vec<&T>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(RlError::NotReady {
                stored: self.items.len(),
                batch: batch_size,
            });
        }
        let n = self.items.len();
        let picks: Vec<usize> = (0..batch_size).map(|_| self.rng.gen_range(0..n)).collect();
        Ok(picks.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Records in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_evicts_oldest() {
        let mut buf = ReplayBuffer::new(2, 0);
        buf.push('a');
        buf.push('b');
        buf.push('c');
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.iter().copied().collect::<Vec<_>>(), vec!['b', 'c']);
    }

    #[test]
    fn single_element_sample() {
        let mut buf = ReplayBuffer::new(4, 1);
        buf.push(42);
        assert_eq!(buf.sample(1).unwrap(), vec![&42]);
    }

    #[test]
    fn undersized_sample_refused() {
        let mut buf = ReplayBuffer::new(4, 1);
        buf.push(1);
        assert!(matches!(buf.sample(2), Err(RlError::NotReady { stored: 1, batch: 2 })));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(4, 12345);
        for x in 0..4usize {
            buf.push(x);
        }
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[*buf.sample(1).unwrap()[0]] += 1;
        }
        // Binomial(10_000, 1/4): sigma = sqrt(n p (1-p)).
        let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let mut a = ReplayBuffer::new(8, 99);
        let mut b = ReplayBuffer::new(8, 99);
        for x in 0..8 {
            a.push(x);
            b.push(x);
        }
        assert_eq!(a.sample(5).unwrap(), b.sample(5).unwrap());
    }
}
