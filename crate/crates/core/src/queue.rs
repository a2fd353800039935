//! Capacity-bounded double-ended priority queue of solved problems.

use std::cmp::Ordering;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
struct Key {
    cost: f64,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Inserted,
    /// Inserted after evicting the previous worst entry.
    Evicted,
    /// Not better than the worst entry of a full queue.
    Rejected,
}

/// Entries ordered by cost, ties by insertion order. Holds at most
/// `capacity` entries; both ends are accessible in `O(log n)`.
#[derive(Debug)]
pub struct SolutionQueue<T> {
    entries: BTreeMap<Key, T>,
    capacity: usize,
    next_seq: u64,
    peak_len: usize,
}

impl<T> SolutionQueue<T> {
    pub fn new(capacity: usize) -> Self {
        SolutionQueue { entries: BTreeMap::new(), capacity, next_seq: 0, peak_len: 0 }
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

    /// Largest number of entries held at any time.
    pub fn peak_len(&self) -> usize {
        self.peak_len
    }

    /// `+inf` while below capacity, else the largest stored cost.
    pub fn worst_bound(&self) -> f64 {
        if self.entries.len() < self.capacity {
            f64::INFINITY
        } else {
            self.entries.last_key_value().map_or(f64::NEG_INFINITY, |(k, _)| k.cost)
        }
    }

    pub fn push(&mut self, cost: f64, item: T) -> PushOutcome {
        if self.capacity == 0 {
            return PushOutcome::Rejected;
        }
        let mut outcome = PushOutcome::Inserted;
        if self.entries.len() >= self.capacity {
            if cost >= self.worst_bound() {
                return PushOutcome::Rejected;
            }
            self.entries.pop_last();
            outcome = PushOutcome::Evicted;
        }
        let key = Key { cost, seq: self.next_seq };
        self.next_seq += 1;
        self.entries.insert(key, item);
        self.peak_len = self.peak_len.max(self.entries.len());
        outcome
    }

    pub fn peek_min(&self) -> Option<(f64, &T)> {
        self.entries.first_key_value().map(|(k, v)| (k.cost, v))
    }

    pub fn pop_min(&mut self) -> Option<(f64, T)> {
        self.entries.pop_first().map(|(k, v)| (k.cost, v))
    }

    pub fn pop_max(&mut self) -> Option<(f64, T)> {
        self.entries.pop_last().map(|(k, v)| (k.cost, v))
    }

    /// Shrinks (or grows) the capacity, dropping the worst entries that no
    /// longer fit.
    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity;
        while self.entries.len() > capacity {
            self.entries.pop_last();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bound_and_eviction() {
        let mut q = SolutionQueue::new(2);
        assert_eq!(q.worst_bound(), f64::INFINITY);
        assert_eq!(q.push(3.0, 'a'), PushOutcome::Inserted);
        assert_eq!(q.push(1.0, 'b'), PushOutcome::Inserted);
        assert_eq!(q.worst_bound(), 3.0);
        assert_eq!(q.push(3.0, 'c'), PushOutcome::Rejected);
        assert_eq!(q.push(2.0, 'd'), PushOutcome::Evicted);
        assert_eq!(q.pop_min(), Some((1.0, 'b')));
        assert_eq!(q.pop_max(), Some((2.0, 'd')));
        assert!(q.is_empty());
    }

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = SolutionQueue::new(4);
        for c in ['x', 'y', 'z'] {
            q.push(0.5, c);
        }
        let order: Vec<char> = std::iter::from_fn(|| q.pop_min().map(|(_, c)| c)).collect();
        assert_eq!(order, vec!['x', 'y', 'z']);
    }

    #[test]
    fn shrinking_drops_worst() {
        let mut q = SolutionQueue::new(3);
        for c in [1.0, 2.0, 3.0] {
            q.push(c, ());
        }
        q.set_capacity(1);
        assert_eq!(q.len(), 1);
        assert_eq!(q.peek_min().map(|x| x.0), Some(1.0));
    }

    proptest! {
        #[test]
        fn keeps_the_best_capacity_entries(costs in prop::collection::vec(-100.0f64..100.0, 0..60), cap in 1usize..10) {
            let mut q = SolutionQueue::new(cap);
            for &c in &costs {
                q.push(c, c);
                prop_assert!(q.len() <= cap);
            }
            let mut sorted = costs.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.truncate(cap);
            let got: Vec<f64> = std::iter::from_fn(|| q.pop_min().map(|x| x.0)).collect();
            prop_assert_eq!(got, sorted);
            prop_assert!(q.peak_len() <= cap);
        }
    }
}
