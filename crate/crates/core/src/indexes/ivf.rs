//! Inverted file over k-means cells.
//!
//! Build runs k-means++ seeding followed by at most [`LLOYD_ITERS`] Lloyd
//! rounds; a cell that ends up empty is reseeded at the point farthest from
//! its current centroid. Search ranks all centroids, then scans the
//! `nprobe` nearest cells exhaustively. Centroid comparisons are counted as
//! distance computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SearchResult;
use crate::data::{norm, sq_euclidean, Dataset, Metric, Prepared};
use crate::error::Result;
use crate::oracle::{Neighbor, TopK};

pub const LLOYD_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvfBuild {
    pub nlist: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct Ivf<'a> {
    train: &'a Dataset,
    nlist: usize,
    centroids: Vec<f32>,
    centroid_norms: Vec<f64>,
    lists: Vec<Vec<usize>>,
}

struct Centroids<'c> {
    metric: Metric,
    dim: usize,
    data: &'c [f32],
    norms: &'c [f64],
}

impl Centroids<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn get(&self, c: usize) -> Prepared<'_> {
        Prepared { v: &self.data[c * self.dim..(c + 1) * self.dim], norm: self.norms[c] }
    }

    // Cheap monotone stand-in for the metric, used during training only.
    fn train_dist(&self, p: &Prepared<'_>, c: usize) -> f64 {
        match self.metric {
            Metric::Euclidean => sq_euclidean(p.v, self.get(c).v),
            Metric::Angular => self.metric.eval(p, &self.get(c)),
        }
    }

    fn nearest(&self, p: &Prepared<'_>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for c in 0..self.len() {
            let d = self.train_dist(p, c);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }
}

fn refresh_norms(metric: Metric, dim: usize, data: &[f32], norms: &mut Vec<f64>) {
    norms.clear();
    match metric {
        Metric::Euclidean => norms.resize(data.len() / dim, 0.0),
        Metric::Angular => norms.extend(data.chunks_exact(dim).map(norm)),
    }
}

impl<'a> Ivf<'a> {
    pub fn build(train: &'a Dataset, cfg: &IvfBuild) -> Result<Self> {
        let (n, dim, metric) = (train.len(), train.dim(), train.metric());
        let nlist = cfg.nlist;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        // k-means++ seeding
        let mut chosen = vec![false; n];
        let first = rng.random_range(0..n);
        chosen[first] = true;
        let mut centroids: Vec<f32> = train.row(first).to_vec();
        let mut norms = Vec::new();
        let mut nearest_w: Vec<f64> = vec![f64::INFINITY; n];
        let weight = |d: f64| match metric {
            Metric::Euclidean => d,
            Metric::Angular => d * d,
        };
        for c in 1..nlist {
            let last = c - 1;
            let last_row = centroids[last * dim..c * dim].to_vec();
            let last_p = metric.prepare(&last_row);
            for i in 0..n {
                let d = match metric {
                    Metric::Euclidean => sq_euclidean(train.row(i), &last_row),
                    Metric::Angular => metric.eval(&train.prepared(i), &last_p),
                };
                nearest_w[i] = nearest_w[i].min(weight(d));
            }
            let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| nearest_w[i]).sum();
            let pick = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = None;
                for i in (0..n).filter(|&i| !chosen[i]) {
                    if nearest_w[i] > 0.0 {
                        pick = Some(i);
                        target -= nearest_w[i];
                        if target < 0.0 {
                            break;
                        }
                    }
                }
                pick.unwrap()
            } else {
                // every remaining point coincides with a chosen center
                let rest: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                rest[rng.random_range(0..rest.len())]
            };
            chosen[pick] = true;
            centroids.extend_from_slice(train.row(pick));
        }

        // Lloyd
        let mut assign = vec![0usize; n];
        let mut assign_dist = vec![0.0f64; n];
        refresh_norms(metric, dim, &centroids, &mut norms);
        assign_all(train, &Centroids { metric, dim, data: &centroids, norms: &norms }, &mut assign, &mut assign_dist);
        for _ in 0..LLOYD_ITERS {
            let mut sums = vec![0.0f64; nlist * dim];
            let mut counts = vec![0usize; nlist];
            for i in 0..n {
                let c = assign[i];
                counts[c] += 1;
                for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(train.row(i)) {
                    *s += *v as f64;
                }
            }
            let mut reseeded = vec![false; n];
            for c in 0..nlist {
                let target = &mut centroids[c * dim..(c + 1) * dim];
                if counts[c] > 0 {
                    for (t, s) in target.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                        *t = (s / counts[c] as f64) as f32;
                    }
                } else {
                    // farthest point from its own centroid, lowest id on ties
                    let far = (0..n)
                        .filter(|&i| !reseeded[i])
                        .fold(None::<usize>, |best, i| match best {
                            Some(b) if assign_dist[b] >= assign_dist[i] => Some(b),
                            _ => Some(i),
                        })
                        .expect("nlist <= n leaves a point to reseed with");
                    reseeded[far] = true;
                    assign_dist[far] = 0.0;
                    target.copy_from_slice(train.row(far));
                }
            }
            refresh_norms(metric, dim, &centroids, &mut norms);
            let changed = assign_all(
                train,
                &Centroids { metric, dim, data: &centroids, norms: &norms },
                &mut assign,
                &mut assign_dist,
            );
            if !changed {
                break;
            }
        }

        let mut lists = vec![Vec::new(); nlist];
        for (i, &c) in assign.iter().enumerate() {
            lists[c].push(i);
        }
        Ok(Self { train, nlist, centroids, centroid_norms: norms, lists })
    }

    pub fn train(&self) -> &'a Dataset {
        self.train
    }

    pub fn nlist(&self) -> usize {
        self.nlist
    }

    /// Train ids of every cell, ascending within a cell.
    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.train.dim()..(c + 1) * self.train.dim()]
    }

    pub fn stored_scalars(&self) -> u64 {
        (self.centroids.len() + self.train.len()) as u64
    }

    fn centroid_view(&self) -> Centroids<'_> {
        Centroids {
            metric: self.train.metric(),
            dim: self.train.dim(),
            data: &self.centroids,
            norms: &self.centroid_norms,
        }
    }

    /// Cells ordered by `(distance to q, cell index)`.
    pub fn probe_order(&self, q: &[f32]) -> Vec<usize> {
        let metric = self.train.metric();
        let q = metric.prepare(q);
        let view = self.centroid_view();
        let mut ranked: Vec<Neighbor> = (0..self.nlist)
            .map(|c| Neighbor { id: c, dist: metric.eval(&q, &view.get(c)) })
            .collect();
        ranked.sort_by(Neighbor::cmp_key);
        ranked.into_iter().map(|n| n.id).collect()
    }

    pub fn search(&self, q: &[f32], k: usize, nprobe: usize) -> SearchResult {
        let order = self.probe_order(q);
        let q = self.train.metric().prepare(q);
        let mut top = TopK::new(k);
        let mut comps = self.nlist as u64;
        for &c in order.iter().take(nprobe.min(self.nlist)) {
            for &id in &self.lists[c] {
                top.push(Neighbor { id, dist: self.train.dist_to(&q, id) });
            }
            comps += self.lists[c].len() as u64;
        }
        SearchResult::from_neighbors(top.into_sorted(), comps, 0)
    }
}

fn assign_all(train: &Dataset, cents: &Centroids<'_>, assign: &mut [usize], dist: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..train.len() {
        let (c, d) = cents.nearest(&train.prepared(i));
        if assign[i] != c {
            changed = true;
            assign[i] = c;
        }
        dist[i] = d;
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::oracle::exact_knn;

    fn cube(n: usize, d: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticSpec::uniform_cube(n, d, seed)).unwrap()
    }

    #[test]
    fn single_list_holds_everything() {
        let ds = cube(200, 4, 1);
        let ivf = Ivf::build(&ds, &IvfBuild { nlist: 1, seed: 0 }).unwrap();
        assert_eq!(ivf.lists().len(), 1);
        assert_eq!(ivf.lists()[0], (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn lists_partition_the_train_set() {
        let ds = generate_synthetic(&SyntheticSpec::gaussian_mixture(1000, 8, 10, 0.05, 2)).unwrap();
        let ivf = Ivf::build(&ds, &IvfBuild { nlist: 16, seed: 3 }).unwrap();
        let mut all: Vec<usize> = ivf.lists().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(ivf.lists().iter().all(|l| !l.is_empty()));
    }

    #[test]
    fn duplicates_do_not_break_seeding() {
        let ds = Dataset::new("dup", Metric::Euclidean, 2, [1.0f32, 1.0].repeat(30)).unwrap();
        let ivf = Ivf::build(&ds, &IvfBuild { nlist: 5, seed: 1 }).unwrap();
        assert_eq!(ivf.lists().iter().map(Vec::len).sum::<usize>(), 30);
    }

    #[test]
    fn full_probe_is_exact_and_counts_add_up() {
        let ds = cube(600, 5, 8);
        let qs = cube(15, 5, 9);
        let ivf = Ivf::build(&ds, &IvfBuild { nlist: 12, seed: 4 }).unwrap();
        let gt = exact_knn(&ds, &qs, 10, false).unwrap();
        for (qi, q) in qs.rows().enumerate() {
            let r = ivf.search(q, 10, 12);
            assert_eq!(r.dist_comps, 12 + 600);
            let want: Vec<usize> = gt.list(qi).iter().map(|n| n.id).collect();
            assert_eq!(r.ids, want);
            let r = ivf.search(q, 10, 3);
            let order = ivf.probe_order(q);
            let scanned: usize = order[..3].iter().map(|&c| ivf.lists()[c].len()).sum();
            assert_eq!(r.dist_comps, 12 + scanned as u64);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = cube(300, 3, 5);
        let a = Ivf::build(&ds, &IvfBuild { nlist: 7, seed: 11 }).unwrap();
        let b = Ivf::build(&ds, &IvfBuild { nlist: 7, seed: 11 }).unwrap();
        assert_eq!(a.lists(), b.lists());
        assert_eq!(a.centroids, b.centroids);
    }
}
