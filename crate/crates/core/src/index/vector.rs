use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

use crate::embedding::dot;

/// Exact cosine index over unit vectors, stored in one flat buffer.
#[derive(Debug, Clone)]
pub struct VectorIndex<I> {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<I>,
    slots: HashMap<I, usize>,
}

struct Ranked<I> {
    score: f32,
    id: I,
}

// Heap order: the greatest element is the worst hit (lowest score, then
// largest id), so the heap top is the one to evict.
impl<I: Ord> Ord for Ranked<I> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl<I: Ord> PartialOrd for Ranked<I> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<I: Ord> PartialEq for Ranked<I> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<I: Ord> Eq for Ranked<I> {}

impl<I: Copy + Ord + Hash> VectorIndex<I> {
    pub fn new(dim: usize) -> Self {
        VectorIndex {
            dim,
            data: Vec::new(),
            ids: Vec::new(),
            slots: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: I) -> Option<&[f32]> {
        self.slots
            .get(&id)
            .map(|&s| &self.data[s * self.dim..(s + 1) * self.dim])
    }

    pub fn upsert(&mut self, id: I, v: &[f32]) {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        match self.slots.get(&id) {
            Some(&s) => self.data[s * self.dim..(s + 1) * self.dim].copy_from_slice(v),
            None => {
                self.slots.insert(id, self.ids.len());
                self.ids.push(id);
                self.data.extend_from_slice(v);
            }
        }
    }

    pub fn remove(&mut self, id: I) -> bool {
        let Some(slot) = self.slots.remove(&id) else {
            return false;
        };
        let last = self.ids.len() - 1;
        if slot != last {
            let moved = self.ids[last];
            self.ids.swap(slot, last);
            let (head, tail) = self.data.split_at_mut(last * self.dim);
            head[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(&tail[..self.dim]);
            self.slots.insert(moved, slot);
        }
        self.ids.pop();
        self.data.truncate(last * self.dim);
        true
    }

    /// Exact top-k by dot product (cosine for unit vectors); ties by
    /// ascending id.
    pub fn search(&self, query: &[f32], k: usize) -> Vec<(I, f32)> {
        self.search_filtered(query, k, |_| true)
    }

    pub fn search_filtered(&self, query: &[f32], k: usize, keep: impl Fn(I) -> bool) -> Vec<(I, f32)> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Ranked<I>> = BinaryHeap::with_capacity(k + 1);
        for (slot, chunk) in self.data.chunks_exact(self.dim).enumerate() {
            let id = self.ids[slot];
            let score = dot(query, chunk);
            let cand = Ranked { score, id };
            if heap.len() < k {
                if keep(id) {
                    heap.push(cand);
                }
            } else if let Some(worst) = heap.peek() {
                if cand < *worst && keep(id) {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        let mut out: Vec<(I, f32)> = heap.into_iter().map(|r| (r.id, r.score)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}
