//! Indexed binary min-heap of deadlines keyed by string.
//!
//! Every key has at most one node and the position map is kept exact, so a
//! key can be rescheduled or removed in O(log n) and the heap never holds a
//! node for a key that is gone. Equal deadlines pop in insertion order.

use std::borrow::Borrow;
use std::hash::Hash;

use rustc_hash::FxHashMap;

#[derive(Debug, Clone)]
struct Node<K> {
    deadline: f64,
    seq: u64,
    key: K,
}

impl<K> Node<K> {
    fn before(&self, other: &Self) -> bool {
        match self.deadline.total_cmp(&other.deadline) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.seq < other.seq,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeadlineQueue<K> {
    heap: Vec<Node<K>>,
    pos: FxHashMap<K, usize>,
    seq: u64,
}

impl<K: Clone + Hash + Eq> Default for DeadlineQueue<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Clone + Hash + Eq> DeadlineQueue<K> {
    pub fn new() -> Self {
        Self {
            heap: Vec::new(),
            pos: FxHashMap::default(),
            seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Schedules `key`, replacing any existing deadline for it.
    pub fn insert(&mut self, key: K, deadline: f64) {
        self.remove(&key);
        self.seq += 1;
        let i = self.heap.len();
        self.pos.insert(key.clone(), i);
        self.heap.push(Node {
            deadline,
            seq: self.seq,
            key,
        });
        self.sift_up(i);
    }

    pub fn deadline<Q>(&self, key: &Q) -> Option<f64>
    where
        K: Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.pos.get(key).map(|&i| self.heap[i].deadline)
    }

    pub fn remove<Q>(&mut self, key: &Q) -> Option<f64>
    where
        K: Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        let i = self.pos.remove(key)?;
        let last = self.heap.len() - 1;
        self.heap.swap(i, last);
        let node = self.heap.pop().expect("non-empty");
        if i < self.heap.len() {
            self.pos.insert(self.heap[i].key.clone(), i);
            self.sift_down(i);
            self.sift_up(i);
        }
        Some(node.deadline)
    }

    pub fn peek(&self) -> Option<(&K, f64)> {
        self.heap.first().map(|n| (&n.key, n.deadline))
    }

    /// Pops the earliest node if its deadline is `<= now`.
    pub fn pop_due(&mut self, now: f64) -> Option<(K, f64)> {
        let due = self.heap.first().is_some_and(|n| n.deadline <= now);
        if !due {
            return None;
        }
        let key = self.heap[0].key.clone();
        let deadline = self.remove(&key)?;
        Some((key, deadline))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.heap.iter().map(|n| (&n.key, n.deadline))
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.heap[i].before(&self.heap[parent]) {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && self.heap[l].before(&self.heap[best]) {
                best = l;
            }
            if r < self.heap.len() && self.heap[r].before(&self.heap[best]) {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        *self.pos.get_mut(&self.heap[a].key).expect("indexed") = a;
        *self.pos.get_mut(&self.heap[b].key).expect("indexed") = b;
    }
}
