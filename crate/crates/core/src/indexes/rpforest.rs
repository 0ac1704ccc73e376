//! Random-projection forest in the style of Annoy.
//!
//! Each internal node splits its points by the perpendicular bisector of two
//! "average points", found by sampling node points and alternating
//! assign/average rounds from two random seeds. All trees are searched
//! together through a single priority queue keyed by hyperplane margin.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SearchResult;
use crate::data::{dot, norm, Dataset, Metric};
use crate::oracle::{Neighbor, TopK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RpForestBuild {
    pub num_trees: usize,
    pub leaf_size: usize,
    /// Points sampled per node to place the split.
    pub split_samples: usize,
    /// Assign/average refinement rounds per split.
    pub split_rounds: usize,
    pub seed: u64,
}

impl Default for RpForestBuild {
    fn default() -> Self {
        Self { num_trees: 10, leaf_size: 16, split_samples: 256, split_rounds: 10, seed: 0 }
    }
}

#[derive(Debug)]
enum Node {
    Leaf(Vec<usize>),
    /// Points with `normal . x - offset > 0` go to `pos`, the rest to `neg`.
    Split { normal: Vec<f32>, offset: f64, pos: usize, neg: usize },
}

#[derive(Debug)]
pub struct RpForest<'a> {
    train: &'a Dataset,
    // one arena per tree; the root is node 0
    trees: Vec<Vec<Node>>,
}

impl<'a> RpForest<'a> {
    pub fn build(train: &'a Dataset, cfg: &RpForestBuild) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let trees = (0..cfg.num_trees).map(|_| build_tree(train, cfg, &mut rng)).collect();
        Self { train, trees }
    }

    pub fn train(&self) -> &'a Dataset {
        self.train
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn stored_scalars(&self) -> u64 {
        let d = self.train.dim() as u64;
        self.trees
            .iter()
            .flatten()
            .map(|node| match node {
                Node::Leaf(ids) => ids.len() as u64,
                Node::Split { .. } => d + 1,
            })
            .sum()
    }

    /// Leaf sizes of every tree, for diagnostics.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.trees
            .iter()
            .flatten()
            .filter_map(|node| match node {
                Node::Leaf(ids) => Some(ids.len()),
                _ => None,
            })
            .collect()
    }

    pub fn search(&self, q: &[f32], k: usize, search_k: usize) -> SearchResult {
        let n = self.train.len();
        let mut seen = vec![false; n];
        let mut candidates = Vec::with_capacity(search_k.min(n));
        let mut inner_products = 0u64;
        let mut queue: BinaryHeap<Frontier> = self
            .trees
            .iter()
            .enumerate()
            .map(|(tree, _)| Frontier { priority: f64::INFINITY, tree, node: 0 })
            .collect();
        while candidates.len() < search_k {
            let Some(top) = queue.pop() else { break };
            match &self.trees[top.tree][top.node] {
                Node::Leaf(ids) => {
                    for &id in ids {
                        if !seen[id] {
                            seen[id] = true;
                            candidates.push(id);
                        }
                    }
                }
                Node::Split { normal, offset, pos, neg } => {
                    inner_products += 1;
                    let margin = dot(normal, q) - offset;
                    queue.push(Frontier { priority: top.priority.min(margin), tree: top.tree, node: *pos });
                    queue.push(Frontier { priority: top.priority.min(-margin), tree: top.tree, node: *neg });
                }
            }
        }
        let qp = self.train.metric().prepare(q);
        let mut best = TopK::new(k);
        for &id in &candidates {
            best.push(Neighbor { id, dist: self.train.dist_to(&qp, id) });
        }
        SearchResult::from_neighbors(best.into_sorted(), candidates.len() as u64, inner_products)
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    priority: f64,
    tree: usize,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // max-heap on priority; lower (tree, node) first among equals
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.tree.cmp(&self.tree))
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn build_tree(train: &Dataset, cfg: &RpForestBuild, rng: &mut ChaCha8Rng) -> Vec<Node> {
    let mut nodes = vec![Node::Leaf(Vec::new())];
    let mut stack = vec![(0usize, (0..train.len()).collect::<Vec<usize>>())];
    while let Some((slot, ids)) = stack.pop() {
        if ids.len() <= cfg.leaf_size {
            nodes[slot] = Node::Leaf(ids);
            continue;
        }
        let Some((normal, offset)) = split_plane(train, &ids, cfg, rng) else {
            nodes[slot] = Node::Leaf(ids);
            continue;
        };
        let (pos_ids, neg_ids): (Vec<usize>, Vec<usize>) = ids
            .iter()
            .partition(|&&id| dot(&normal, train.row(id)) - offset > 0.0);
        if pos_ids.is_empty() || neg_ids.is_empty() {
            // cannot separate (e.g. duplicates); keep an oversized leaf
            nodes[slot] = Node::Leaf(ids);
            continue;
        }
        let pos = nodes.len();
        let neg = pos + 1;
        nodes.push(Node::Leaf(Vec::new()));
        nodes.push(Node::Leaf(Vec::new()));
        nodes[slot] = Node::Split { normal, offset, pos, neg };
        stack.push((neg, neg_ids));
        stack.push((pos, pos_ids));
    }
    nodes
}

/// Two-means split of a sample of `ids`. Returns the hyperplane
/// `(normal, offset)` or `None` when the two centers coincide.
fn split_plane(
    train: &Dataset,
    ids: &[usize],
    cfg: &RpForestBuild,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<f32>, f64)> {
    let dim = train.dim();
    let angular = train.metric() == Metric::Angular;
    let take = ids.len().min(cfg.split_samples);
    let sample_ids: Vec<usize> = sample(rng, ids.len(), take).into_iter().map(|i| ids[i]).collect();
    let points: Vec<Vec<f64>> = sample_ids
        .iter()
        .map(|&id| {
            let row = train.row(id);
            let scale = if angular { 1.0 / norm(row) } else { 1.0 };
            row.iter().map(|&v| v as f64 * scale).collect()
        })
        .collect();

    let a = rng.random_range(0..take);
    let mut b = rng.random_range(0..take - 1);
    if b >= a {
        b += 1;
    }
    let mut centers = [points[a].clone(), points[b].clone()];
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    for _ in 0..cfg.split_rounds {
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for p in &points {
            let side = usize::from(sq(p, &centers[1]) < sq(p, &centers[0]));
            counts[side] += 1;
            for (s, v) in sums[side].iter_mut().zip(p) {
                *s += v;
            }
        }
        for side in 0..2 {
            if counts[side] > 0 {
                centers[side] = sums[side].iter().map(|s| s / counts[side] as f64).collect();
            }
        }
    }
    if angular {
        for c in centers.iter_mut() {
            let l = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if l > 0.0 {
                c.iter_mut().for_each(|v| *v /= l);
            }
        }
    }
    let normal: Vec<f32> = centers[0].iter().zip(&centers[1]).map(|(p, q)| (p - q) as f32).collect();
    if normal.iter().all(|&v| v == 0.0) {
        return None;
    }
    // Angular splits pass through the origin; the query's scale is irrelevant.
    let offset = if angular {
        0.0
    } else {
        // the plane through the midpoint, in the rounded f32 normal's frame
        let mid: Vec<f32> = centers[0].iter().zip(&centers[1]).map(|(p, q)| ((p + q) / 2.0) as f32).collect();
        dot(&normal, &mid)
    };
    Some((normal, offset))
}
