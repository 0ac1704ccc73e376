//! Best-first beam search over an exact k-NN graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SearchResult;
use crate::data::Dataset;
use crate::oracle::{Neighbor, TopK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnGraphBuild {
    /// Out-degree; clamped to `n - 1`.
    pub degree: usize,
}

#[derive(Debug)]
pub struct KnnGraph<'a> {
    train: &'a Dataset,
    degree: usize,
    // row-major n x degree adjacency, each row sorted by (distance, id)
    adjacency: Vec<u32>,
    entry: usize,
}

#[derive(Debug, Clone, Copy)]
struct Ordered(Neighbor);

impl PartialEq for Ordered {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp_key(&other.0).is_eq()
    }
}
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp_key(&other.0)
    }
}

impl<'a> KnnGraph<'a> {
    /// One symmetric pass over all pairs computes both the truncated
    /// neighbor lists and the distance sums that pick the medoid entry.
    pub fn build(train: &'a Dataset, cfg: &KnnGraphBuild) -> Self {
        let n = train.len();
        let degree = cfg.degree.min(n - 1);
        let mut tops: Vec<TopK> = (0..n).map(|_| TopK::new(degree)).collect();
        let mut sums = vec![0.0f64; n];
        for i in 0..n {
            let pi = train.prepared(i);
            for j in i + 1..n {
                let d = train.metric().eval(&pi, &train.prepared(j));
                sums[i] += d;
                sums[j] += d;
                tops[i].push(Neighbor { id: j, dist: d });
                tops[j].push(Neighbor { id: i, dist: d });
            }
        }
        let entry = (0..n)
            .min_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)))
            .unwrap_or(0);
        let mut adjacency = Vec::with_capacity(n * degree);
        for top in tops {
            adjacency.extend(top.into_sorted().into_iter().map(|nb| nb.id as u32));
        }
        Self { train, degree, adjacency, entry }
    }

    pub fn train(&self) -> &'a Dataset {
        self.train
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn entry(&self) -> usize {
        self.entry
    }

    pub fn neighbors(&self, id: usize) -> &[u32] {
        &self.adjacency[id * self.degree..(id + 1) * self.degree]
    }

    pub fn stored_scalars(&self) -> u64 {
        self.adjacency.len() as u64
    }

    /// Beam search with a result list capped at `max(ef, k)`. Stops when
    /// the nearest unexpanded candidate is worse than the worst retained
    /// result of a full list. `aux` counts priority-queue operations.
    pub fn search(&self, q: &[f32], k: usize, ef: usize) -> SearchResult {
        let cap = ef.max(k);
        let q = self.train.metric().prepare(q);
        let mut visited = vec![false; self.train.len()];
        let mut frontier: BinaryHeap<Reverse<Ordered>> = BinaryHeap::new();
        let mut results: BinaryHeap<Ordered> = BinaryHeap::new();
        let mut heap_ops = 0u64;

        let start = Neighbor { id: self.entry, dist: self.train.dist_to(&q, self.entry) };
        visited[self.entry] = true;
        let mut comps = 1u64;
        frontier.push(Reverse(Ordered(start)));
        results.push(Ordered(start));
        heap_ops += 2;

        while let Some(Reverse(Ordered(current))) = frontier.pop() {
            heap_ops += 1;
            if results.len() >= cap {
                let worst = results.peek().unwrap().0;
                if current.cmp_key(&worst).is_gt() {
                    break;
                }
            }
            for &nb in self.neighbors(current.id) {
                let nb = nb as usize;
                if visited[nb] {
                    continue;
                }
                visited[nb] = true;
                let cand = Neighbor { id: nb, dist: self.train.dist_to(&q, nb) };
                comps += 1;
                let admit = results.len() < cap || cand.cmp_key(&results.peek().unwrap().0).is_lt();
                if admit {
                    frontier.push(Reverse(Ordered(cand)));
                    results.push(Ordered(cand));
                    heap_ops += 2;
                    if results.len() > cap {
                        results.pop();
                        heap_ops += 1;
                    }
                }
            }
        }

        let mut sorted: Vec<Neighbor> = results.into_iter().map(|o| o.0).collect();
        sorted.sort_by(Neighbor::cmp_key);
        sorted.truncate(k);
        SearchResult::from_neighbors(sorted, comps, heap_ops)
    }
}

/// Medoid by a direct double loop, for cross-checking the fused build.
#[cfg(test)]
fn naive_medoid(train: &Dataset) -> usize {
    let mut best = (0, f64::INFINITY);
    for i in 0..train.len() {
        let s: f64 = (0..train.len())
            .filter(|&j| j != i)
            .map(|j| crate::data::distance(train.metric(), train.row(i), train.row(j)).unwrap())
            .sum();
        if s < best.1 {
            best = (i, s);
        }
    }
    best.0
}
