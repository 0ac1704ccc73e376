//! Exact k-NN by linear scan. Results are ordered by `(distance, id)`
//! ascending, which makes ground truth fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::data::{sq_euclidean, Dataset, Metric, Prepared};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

impl Neighbor {
    #[inline]
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    n: Neighbor,
    // squared euclidean distance, or the distance itself for angular
    key: f64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp_key(&other.n)
    }
}

/// Bounded collection of the `k` smallest neighbors seen so far.
#[derive(Debug)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    /// Current k-th best, once full.
    pub fn worst(&self) -> Option<Neighbor> {
        if self.is_full() {
            self.heap.peek().map(|e| e.n)
        } else {
            None
        }
    }

    fn worst_key(&self) -> f64 {
        if self.is_full() {
            self.heap.peek().map_or(f64::INFINITY, |e| e.key)
        } else {
            f64::INFINITY
        }
    }

    /// Offers a candidate; returns whether it was retained.
    pub fn push(&mut self, n: Neighbor) -> bool {
        self.push_keyed(n, n.dist)
    }

    fn push_keyed(&mut self, n: Neighbor, key: f64) -> bool {
        if self.k == 0 {
            return false;
        }
        let e = HeapEntry { n, key };
        if self.heap.len() < self.k {
            self.heap.push(e);
            true
        } else if e < *self.heap.peek().unwrap() {
            self.heap.pop();
            self.heap.push(e);
            true
        } else {
            false
        }
    }

    pub fn into_sorted(self) -> Vec<Neighbor> {
        self.heap.into_sorted_vec().into_iter().map(|e| e.n).collect()
    }
}

/// Exact top-`k` of `train` for one prepared query, optionally skipping one
/// train id. Returns the list and the number of metric evaluations.
pub fn scan_topk(train: &Dataset, q: &Prepared<'_>, k: usize, skip: Option<usize>) -> Vec<Neighbor> {
    let mut top = TopK::new(k);
    match train.metric() {
        Metric::Euclidean => {
            for id in 0..train.len() {
                if Some(id) == skip {
                    continue;
                }
                let sq = sq_euclidean(q.v, train.row(id));
                // sqrt is monotone, so anything clearly beyond the current
                // worst squared distance cannot enter; the slack keeps exact
                // (dist, id) ties under the sqrt reachable.
                if sq > top.worst_key() * (1.0 + 1e-12) {
                    continue;
                }
                top.push_keyed(Neighbor { id, dist: sq.sqrt() }, sq);
            }
        }
        Metric::Angular => {
            for id in 0..train.len() {
                if Some(id) == skip {
                    continue;
                }
                let dist = train.dist_to(q, id);
                top.push_keyed(Neighbor { id, dist }, dist);
            }
        }
    }
    top.into_sorted()
}

/// Exact k-NN lists for a batch of queries, bound to the train set by
/// fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub k: usize,
    pub metric: Metric,
    #[serde(with = "crate::report::hex_u64")]
    pub fingerprint: u64,
    pub exclude_self: bool,
    pub neighbors: Vec<Vec<Neighbor>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn list(&self, query: usize) -> &[Neighbor] {
        &self.neighbors[query]
    }

    /// Distance of the k-th entry (the LID scale `r_k`).
    pub fn kth_distance(&self, query: usize) -> f64 {
        self.neighbors[query].last().map_or(0.0, |n| n.dist)
    }

    /// Structural checks plus the fingerprint binding.
    pub fn validate_against(&self, train: &Dataset) -> Result<()> {
        if self.fingerprint != train.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: train.fingerprint(),
                found: self.fingerprint,
            });
        }
        if self.metric != train.metric() {
            return Err(Error::Schema("ground truth metric differs from dataset".into()));
        }
        for (q, list) in self.neighbors.iter().enumerate() {
            if list.len() != self.k {
                return Err(Error::Schema(format!("query {q} lists {} neighbors, k = {}", list.len(), self.k)));
            }
            if list.iter().any(|n| n.id >= train.len()) {
                return Err(Error::Schema(format!("query {q} references an id outside the train set")));
            }
            if list.windows(2).any(|w| w[0].cmp_key(&w[1]) != Ordering::Less) {
                return Err(Error::Schema(format!("query {q} is not strictly sorted by (distance, id)")));
            }
        }
        Ok(())
    }
}

/// Brute-force ground truth. With `exclude_self`, query `i` is taken to be
/// train point `i` and that id is skipped.
pub fn exact_knn(train: &Dataset, queries: &Dataset, k: usize, exclude_self: bool) -> Result<GroundTruth> {
    if train.dim() != queries.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), got: queries.dim() });
    }
    let available = if exclude_self { train.len().saturating_sub(1) } else { train.len() };
    if k == 0 || k > available {
        return Err(Error::KOutOfRange { k, available });
    }
    if exclude_self && queries.len() > train.len() {
        return Err(Error::invalid("exclude_self needs queries that are train points"));
    }
    let neighbors = (0..queries.len())
        .map(|qi| {
            let q = queries.prepared(qi);
            scan_topk(train, &q, k, exclude_self.then_some(qi))
        })
        .collect();
    Ok(GroundTruth {
        k,
        metric: train.metric(),
        fingerprint: train.fingerprint(),
        exclude_self,
        neighbors,
    })
}

/// Free-function form of [`GroundTruth::kth_distance`].
pub fn kth_distance(gt: &GroundTruth, query: usize) -> f64 {
    gt.kth_distance(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f32]) -> Dataset {
        Dataset::new("line", Metric::Euclidean, 1, points.to_vec()).unwrap()
    }

    fn naive(train: &Dataset, queries: &Dataset, k: usize, exclude_self: bool) -> Vec<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for qi in 0..queries.len() {
            let mut all = Vec::new();
            for id in 0..train.len() {
                if exclude_self && id == qi {
                    continue;
                }
                all.push((id, distance(train.metric(), queries.row(qi), train.row(id)).unwrap()));
            }
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            out.push(all);
        }
        out
    }

    #[test]
    fn one_dimensional_example() {
        let gt = exact_knn(&line(&[0.0, 1.0, 3.0]), &line(&[0.9]), 2, false).unwrap();
        let l = gt.list(0);
        assert_eq!((l[0].id, l[1].id), (1, 0));
        assert_eq!(l[0].dist, (0.9f32 as f64 - 1.0).abs());
        assert_eq!(l[1].dist, 0.9f32 as f64);
        assert_eq!(kth_distance(&gt, 0), 0.9f32 as f64);
    }

    #[test]
    fn equidistant_tie_goes_to_lower_id() {
        let gt = exact_knn(&line(&[0.0, 2.0]), &line(&[1.0]), 1, false).unwrap();
        assert_eq!(gt.list(0), &[Neighbor { id: 0, dist: 1.0 }]);
    }

    #[test]
    fn self_exclusion() {
        let train = line(&[0.0, 1.0]);
        let gt = exact_knn(&train, &train, 1, true).unwrap();
        assert_eq!(gt.list(1), &[Neighbor { id: 0, dist: 1.0 }]);
    }

    #[test]
    fn k_list_of_one() {
        let gt = GroundTruth {
            k: 1,
            metric: Metric::Euclidean,
            fingerprint: 0,
            exclude_self: false,
            neighbors: vec![vec![Neighbor { id: 5, dist: 0.25 }]],
        };
        assert_eq!(kth_distance(&gt, 0), 0.25);
    }

    #[test]
    fn duplicates_give_zero_kth_distance() {
        let train = line(&[4.0, 4.0, 4.0]);
        let gt = exact_knn(&train, &train, 2, true).unwrap();
        assert!((0..3).all(|q| gt.kth_distance(q) == 0.0));
    }

    #[test]
    fn k_range_and_dimension_errors() {
        let train = line(&[0.0, 1.0]);
        assert!(matches!(exact_knn(&train, &train, 2, true), Err(Error::KOutOfRange { .. })));
        assert!(matches!(exact_knn(&train, &train, 3, false), Err(Error::KOutOfRange { .. })));
        assert!(matches!(exact_knn(&train, &train, 0, false), Err(Error::KOutOfRange { .. })));
        let q2 = Dataset::new("q", Metric::Euclidean, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(exact_knn(&train, &q2, 1, false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn agrees_with_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let metric = if trial % 2 == 0 { Metric::Euclidean } else { Metric::Angular };
            let n = rng.random_range(2..400);
            let d = rng.random_range(1..12);
            // coarse grid values so that exact ties are common
            let pts: Vec<f32> = (0..n * d).map(|_| rng.random_range(1..5) as f32).collect();
            let train = Dataset::new("t", metric, d, pts).unwrap();
            let qpts: Vec<f32> = (0..7 * d).map(|_| rng.random_range(1..5) as f32).collect();
            let queries = Dataset::new("q", metric, d, qpts).unwrap();
            let k = rng.random_range(1..n);
            let got = exact_knn(&train, &queries, k, false).unwrap();
            let want = naive(&train, &queries, k, false);
            for (g, w) in got.neighbors.iter().zip(&want) {
                let g: Vec<(usize, f64)> = g.iter().map(|n| (n.id, n.dist)).collect();
                assert_eq!(&g, w);
            }
            got.validate_against(&train).unwrap();
            let selfgt = exact_knn(&train, &train, k, true).unwrap();
            let want = naive(&train, &train, k, true);
            for (g, w) in selfgt.neighbors.iter().zip(&want) {
                let g: Vec<(usize, f64)> = g.iter().map(|n| (n.id, n.dist)).collect();
                assert_eq!(&g, w);
            }
        }
    }

    #[test]
    fn permutation_preserves_distance_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 300;
        let train = Dataset::new(
            "t",
            Metric::Euclidean,
            3,
            (0..n * 3).map(|_| rng.random::<f32>()).collect(),
        )
        .unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = train.select(&perm).unwrap();
        let q = Dataset::new("q", Metric::Euclidean, 3, vec![0.5, 0.5, 0.5, 0.1, 0.9, 0.2]).unwrap();
        let a = exact_knn(&train, &q, 10, false).unwrap();
        let b = exact_knn(&permuted, &q, 10, false).unwrap();
        for (la, lb) in a.neighbors.iter().zip(&b.neighbors) {
            let da: Vec<f64> = la.iter().map(|n| n.dist).collect();
            let db: Vec<f64> = lb.iter().map(|n| n.dist).collect();
            assert_eq!(da, db);
            for (x, y) in la.iter().zip(lb) {
                assert_eq!(x.id, perm[y.id]);
            }
        }
    }
}
