use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Candidate with a similarity score and an insertion sequence number.
/// Higher score wins; among equal scores the lower sequence wins.
struct Ranked<T> {
    score: f64,
    seq: usize,
    value: T,
}

impl<T> Ranked<T> {
    fn better_than(&self, other: &Self) -> bool {
        match self.score.total_cmp(&other.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.seq < other.seq,
        }
    }
}

impl<T> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Ranked<T> {}

impl<T> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// The heap keeps the worst retained candidate on top.
impl<T> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.better_than(other) {
            Ordering::Less
        } else if other.better_than(self) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }
}

/// Keeps the `k` best `(score, seq, value)` triples, returned best first.
pub(crate) fn top_k<T>(items: impl IntoIterator<Item = (f64, usize, T)>, k: usize) -> Vec<(f64, T)> {
    if k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Ranked<T>> = BinaryHeap::with_capacity(k + 1);
    for (score, seq, value) in items {
        let cand = Ranked { score, seq, value };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand.better_than(worst)) {
            heap.pop();
            heap.push(cand);
        }
    }
    heap.into_sorted_vec()
        .into_iter()
        .map(|r| (r.score, r.value))
        .collect()
}
