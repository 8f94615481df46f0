//! Incremental quicksort: yields indices in ascending key order while only
//! partitioning as much of the input as has been consumed.

use std::cmp::Ordering;

/// Lazily sorted view over a key slice.
///
/// Keys compare with [`f64::total_cmp`]; equal keys come out in ascending
/// index order, so the stream is deterministic.
#[derive(Debug, Clone)]
pub struct IncrementalSort<'a> {
    keys: &'a [f64],
    order: Vec<usize>,
    // Final positions of pivots still bounding unsorted ranges, top = nearest.
    bounds: Vec<usize>,
    next: usize,
}

impl<'a> IncrementalSort<'a> {
    pub fn new(keys: &'a [f64]) -> Self {
        IncrementalSort {
            keys,
            order: (0..keys.len()).collect(),
            bounds: vec![keys.len()],
            next: 0,
        }
    }

    fn key_cmp(&self, a: usize, b: usize) -> Ordering {
        self.keys[a].total_cmp(&self.keys[b]).then(a.cmp(&b))
    }

    /// Partitions `order[lo..hi]` around its middle element; returns the
    /// pivot's final position.
    fn partition(&mut self, lo: usize, hi: usize) -> usize {
        let mid = lo + (hi - lo) / 2;
        self.order.swap(mid, hi - 1);
        let pivot = self.order[hi - 1];
        let mut store = lo;
        for i in lo..hi - 1 {
            if self.key_cmp(self.order[i], pivot) == Ordering::Less {
                self.order.swap(i, store);
                store += 1;
            }
        }
        self.order.swap(store, hi - 1);
        store
    }
}

impl Iterator for IncrementalSort<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next >= self.keys.len() {
            return None;
        }
        loop {
            let top = *self.bounds.last().expect("sentinel bound");
            if top == self.next {
                self.bounds.pop();
                let out = self.order[self.next];
                self.next += 1;
                return Some(out);
            }
            let p = self.partition(self.next, top);
            self.bounds.push(p);
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.keys.len() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for IncrementalSort<'_> {}

/// Convenience constructor matching the other interval helpers.
pub fn incremental_sort_cursor(keys: &[f64]) -> IncrementalSort<'_> {
    IncrementalSort::new(keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_element_is_the_minimum() {
        let keys = [3.0, 1.0, 2.0];
        let mut cursor = incremental_sort_cursor(&keys);
        assert_eq!(cursor.next(), Some(1));
    }

    #[test]
    fn singleton() {
        let keys = [5.0];
        assert_eq!(incremental_sort_cursor(&keys).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn empty() {
        assert_eq!(incremental_sort_cursor(&[]).count(), 0);
    }

    #[test]
    fn ties_come_out_by_index() {
        let keys = [0.5, 0.1, 0.5, 0.1, 0.5];
        let got: Vec<_> = incremental_sort_cursor(&keys).collect();
        assert_eq!(got, vec![1, 3, 0, 2, 4]);
    }

    #[test]
    fn consuming_everything_matches_a_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let keys: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let got: Vec<usize> = incremental_sort_cursor(&keys).collect();
        let mut want: Vec<usize> = (0..keys.len()).collect();
        want.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        assert_eq!(got, want);
    }

    #[test]
    fn sorted_and_reversed_inputs() {
        let up: Vec<f64> = (0..200).map(f64::from).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(incremental_sort_cursor(&up).collect::<Vec<_>>(), (0..200).collect::<Vec<_>>());
        assert_eq!(
            incremental_sort_cursor(&down).collect::<Vec<_>>(),
            (0..200).rev().collect::<Vec<_>>()
        );
    }
}
