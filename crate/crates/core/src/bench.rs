//! Experiment execution and the aggregations computed over its results.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::indexes::{BuildStats, Index, IndexSpec, ParamMap, SearchResult};
use crate::lid::LidProfile;
use crate::oracle::Neighbor;
use crate::stats::{spearman, Histogram};
use crate::workload::{Difficulty, Workload};

/// Relative slack on `r_k` within which a returned point counts as a true
/// neighbor.
pub const RECALL_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// Position in the workload.
    pub query: usize,
    /// Dataset id of the query point.
    pub query_id: usize,
    pub latency_ns: u64,
    pub recall: f64,
    pub dist_comps: u64,
    pub aux: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub avg_recall: f64,
    /// Queries per second of the single-threaded query loop.
    pub qps: f64,
    pub total_dist_comps: u64,
}

impl RunSummary {
    /// Recomputes the summary from records; the result is exact (the same
    /// arithmetic in the same order every time).
    pub fn from_records(records: &[QueryRecord]) -> Self {
        let m = records.len() as f64;
        let recall_sum: f64 = records.iter().map(|r| r.recall).sum();
        let total_ns: u64 = records.iter().map(|r| r.latency_ns).sum();
        Self {
            avg_recall: recall_sum / m,
            qps: m * 1e9 / total_ns as f64,
            total_dist_comps: records.iter().map(|r| r.dist_comps).sum(),
        }
    }
}

/// One (index, search parameters, workload) execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dataset: String,
    /// Fingerprint of the residual train set the index was built on.
    pub fingerprint: u64,
    pub difficulty: Difficulty,
    pub query_k: usize,
    pub spec: IndexSpec,
    pub search_params: ParamMap,
    pub build_stats: BuildStats,
    pub records: Vec<QueryRecord>,
    pub summary: RunSummary,
    pub tool_version: String,
    /// Keys found in a run record that this version does not interpret,
    /// kept so that rewriting a file does not drop them.
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extra {
    pub top: serde_json::Map<String, serde_json::Value>,
    pub meta: serde_json::Map<String, serde_json::Value>,
    pub queries: serde_json::Map<String, serde_json::Value>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl RunResult {
    pub fn label(&self) -> String {
        let mut parts = vec![self.spec.algorithm.to_string()];
        let b = crate::indexes::format_params(&self.spec.build_params);
        if !b.is_empty() {
            parts.push(b);
        }
        let s = crate::indexes::format_params(&self.search_params);
        if !s.is_empty() {
            parts.push(s);
        }
        parts.join(" ")
    }

    pub fn recalls(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.recall).collect()
    }

    /// `1 / latency` per query, in queries per second.
    pub fn per_query_qps(&self) -> Vec<f64> {
        self.records.iter().map(|r| 1e9 / r.latency_ns as f64).collect()
    }

    pub fn mean_dist_comps(&self) -> f64 {
        self.summary.total_dist_comps as f64 / self.records.len() as f64
    }

    /// Checks the record invariants, including that the stored summary is
    /// exactly what the records produce.
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Schema("run has no query records".into()));
        }
        for r in &self.records {
            if r.latency_ns == 0 {
                return Err(Error::Schema(format!("query {} has zero latency", r.query)));
            }
            if !(0.0..=1.0).contains(&r.recall) {
                return Err(Error::Schema(format!("query {} recall {} outside [0, 1]", r.query, r.recall)));
            }
        }
        let expect = RunSummary::from_records(&self.records);
        if expect != self.summary {
            return Err(Error::Schema(format!(
                "summary {:?} does not match records ({:?})",
                self.summary, expect
            )));
        }
        Ok(())
    }
}

/// Fraction of returned points within `r_k (1 + eps)` of the query, capped
/// at `query_k`. Tied points that are not in the listed ground truth count.
pub fn recall(result_ids: &[usize], gt: &[Neighbor], query_k: usize, q: &[f32], train: &Dataset) -> f64 {
    let r_k = gt[query_k.min(gt.len()) - 1].dist;
    let threshold = r_k * (1.0 + RECALL_TIE_EPS);
    let q = train.metric().prepare(q);
    let hits = result_ids
        .iter()
        .filter(|&&id| train.dist_to(&q, id) <= threshold)
        .count()
        .min(query_k);
    hits as f64 / query_k as f64
}

/// Times every workload query on the calling thread, in order, keeping the
/// best of `repetitions` timings per query. Recall is computed afterwards,
/// outside the timed region.
pub fn run(index: &Index<'_>, workload: &Workload, search_params: &ParamMap, repetitions: usize) -> Result<RunResult> {
    let train = index.train();
    if train.fingerprint() != workload.ground_truth.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: workload.ground_truth.fingerprint,
            found: train.fingerprint(),
        });
    }
    let cfg = index.parse_search(search_params)?;
    let reps = repetitions.max(1);
    let k = workload.query_k;

    let mut results: Vec<SearchResult> = Vec::with_capacity(workload.len());
    let mut latencies = Vec::with_capacity(workload.len());
    for qi in 0..workload.len() {
        let q = workload.queries.row(qi);
        let mut best = u64::MAX;
        let mut kept = None;
        for _ in 0..reps {
            let start = Instant::now();
            let res = index.search(q, k, &cfg)?;
            let ns = start.elapsed().as_nanos() as u64;
            best = best.min(ns.max(1));
            kept.get_or_insert(res);
        }
        results.push(kept.unwrap());
        latencies.push(best);
    }

    let records: Vec<QueryRecord> = results
        .iter()
        .zip(&latencies)
        .enumerate()
        .map(|(qi, (res, &latency_ns))| QueryRecord {
            query: qi,
            query_id: workload.ids[qi],
            latency_ns,
            recall: recall(&res.ids, workload.ground_truth.list(qi), k, workload.queries.row(qi), train),
            dist_comps: res.dist_comps,
            aux: res.aux,
        })
        .collect();
    let summary = RunSummary::from_records(&records);
    Ok(RunResult {
        dataset: train.name().to_string(),
        fingerprint: train.fingerprint(),
        difficulty: workload.difficulty,
        query_k: k,
        spec: IndexSpec {
            algorithm: index.algorithm(),
            build_params: BTreeMap::new(),
            seed: 0,
        },
        search_params: search_params.clone(),
        build_stats: BuildStats::default(),
        records,
        summary,
        tool_version: crate::VERSION.to_string(),
        extra: Extra::default(),
    })
}

/// [`run`] with the `IndexSpec` and build statistics of the index filled in.
pub fn run_built(
    index: &Index<'_>,
    spec: &IndexSpec,
    stats: BuildStats,
    workload: &Workload,
    search_params: &ParamMap,
    repetitions: usize,
) -> Result<RunResult> {
    let mut r = run(index, workload, search_params, repetitions)?;
    r.spec = spec.clone();
    r.build_stats = stats;
    Ok(r)
}

/// Indices of the points not strictly dominated in (recall, qps), sorted by
/// recall ascending (then qps ascending, then index).
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // recall descending, qps descending
    order.sort_by(|&a, &b| {
        points[b].0.total_cmp(&points[a].0).then(points[b].1.total_cmp(&points[a].1))
    });
    let mut keep = Vec::new();
    let mut best_qps_higher_recall = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let r = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == r {
            j += 1;
        }
        let group_max = points[order[i]].1;
        for &idx in &order[i..j] {
            let q = points[idx].1;
            if q >= group_max && q > best_qps_higher_recall {
                keep.push(idx);
            }
        }
        best_qps_higher_recall = best_qps_higher_recall.max(group_max);
        i = j;
    }
    keep.sort_by(|&a, &b| {
        points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)).then(a.cmp(&b))
    });
    keep
}

pub fn pareto(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    pareto_indices(points).into_iter().map(|i| points[i]).collect()
}

/// Pareto-optimal runs of a set, by (avg recall, qps).
pub fn pareto_runs(runs: &[RunResult]) -> Vec<&RunResult> {
    let pts: Vec<(f64, f64)> = runs.iter().map(|r| (r.summary.avg_recall, r.summary.qps)).collect();
    pareto_indices(&pts).into_iter().map(|i| &runs[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Qps,
    DistComps,
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qps" => Ok(Self::Qps),
            "distcomps" | "dist_comps" => Ok(Self::DistComps),
            other => Err(Error::invalid(format!("unknown measure `{other}`"))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qps => "qps",
            Self::DistComps => "distcomps",
        })
    }
}

/// One configuration's headline numbers, as ranking input.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPoint {
    pub algorithm: String,
    pub avg_recall: f64,
    pub qps: f64,
    /// Mean distance computations per query.
    pub dist_comps: f64,
}

impl From<&RunResult> for RankPoint {
    fn from(r: &RunResult) -> Self {
        Self {
            algorithm: r.spec.algorithm.to_string(),
            avg_recall: r.summary.avg_recall,
            qps: r.summary.qps,
            dist_comps: r.mean_dist_comps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingCell {
    /// Best value among runs reaching the threshold; `None` when no run does.
    pub best: Option<f64>,
    /// `best` relative to the best algorithm at this threshold (1.0 = best).
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub measure: Measure,
    pub thresholds: Vec<f64>,
    /// algorithm -> one cell per threshold
    pub rows: BTreeMap<String, Vec<RankingCell>>,
}

/// For each algorithm and recall threshold, the best configuration reaching
/// at least that average recall (max qps or min distance computations), as
/// a ratio to the best algorithm. For qps ratios are at most 1; for
/// distance computations at least 1; smaller is worse resp. better.
pub fn ranking(points: &[RankPoint], thresholds: &[f64], measure: Measure) -> RankingTable {
    let mut by_algo: BTreeMap<String, Vec<&RankPoint>> = BTreeMap::new();
    for p in points {
        by_algo.entry(p.algorithm.clone()).or_default().push(p);
    }
    let value = |p: &RankPoint| match measure {
        Measure::Qps => p.qps,
        Measure::DistComps => p.dist_comps,
    };
    let better = |a: f64, b: f64| match measure {
        Measure::Qps => a > b,
        Measure::DistComps => a < b,
    };
    let mut rows: BTreeMap<String, Vec<RankingCell>> = by_algo
        .iter()
        .map(|(algo, pts)| {
            let cells = thresholds
                .iter()
                .map(|&t| {
                    let best = pts
                        .iter()
                        .filter(|p| p.avg_recall >= t)
                        .map(|p| value(p))
                        .fold(None, |acc: Option<f64>, v| match acc {
                            Some(a) if !better(v, a) => Some(a),
                            _ => Some(v),
                        });
                    RankingCell { best, ratio: None }
                })
                .collect();
            (algo.clone(), cells)
        })
        .collect();
    for ti in 0..thresholds.len() {
        let overall = rows
            .values()
            .filter_map(|cells| cells[ti].best)
            .fold(None, |acc: Option<f64>, v| match acc {
                Some(a) if !better(v, a) => Some(a),
                _ => Some(v),
            });
        if let Some(o) = overall {
            for cells in rows.values_mut() {
                cells[ti].ratio = cells[ti].best.map(|b| b / o);
            }
        }
    }
    RankingTable { measure, thresholds: thresholds.to_vec(), rows }
}

pub const RECALL_BINS: usize = 20;

/// Recall distribution over fixed-width bins on `[0, 1]`.
pub fn recall_histogram(run: &RunResult, bins: usize) -> Histogram {
    Histogram::from_values(run.records.iter().map(|r| r.recall), 0.0, 1.0, bins)
}

/// Fraction of queries with recall exactly 0 or exactly 1.
pub fn bimodality(run: &RunResult) -> f64 {
    let extreme = run.records.iter().filter(|r| r.recall == 0.0 || r.recall == 1.0).count();
    extreme as f64 / run.records.len() as f64
}

/// Per-query `(LID, recall)` pairs; every query needs a finite LID.
pub fn lid_recall_pairs(run: &RunResult, profile: &LidProfile) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lids = Vec::with_capacity(run.records.len());
    for r in &run.records {
        let lid = profile.values.get(r.query_id).copied().unwrap_or(f64::NAN);
        if !lid.is_finite() {
            return Err(Error::invalid(format!("query id {} has no finite LID in the profile", r.query_id)));
        }
        lids.push(lid);
    }
    Ok((lids, run.recalls()))
}

/// Spearman correlation between per-query LID and recall.
pub fn lid_recall_spearman(run: &RunResult, profile: &LidProfile) -> Result<f64> {
    let (l, r) = lid_recall_pairs(run, profile)?;
    Ok(spearman(&l, &r))
}

/// Rectangular 2-D density of (LID, recall) plus both marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallLidBins {
    pub lid_lo: f64,
    pub lid_hi: f64,
    /// `counts[x][y]`: x indexes LID bins, y indexes recall bins.
    pub counts: Vec<Vec<u64>>,
    pub lid_marginal: Histogram,
    pub recall_marginal: Histogram,
}

impl RecallLidBins {
    pub fn x_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn y_bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }
}

pub fn recall_vs_lid_bins(run: &RunResult, profile: &LidProfile, x_bins: usize, y_bins: usize) -> Result<RecallLidBins> {
    let (lids, recalls) = lid_recall_pairs(run, profile)?;
    let lo = lids.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lid_marginal = Histogram::new(lo, hi, x_bins);
    let mut recall_marginal = Histogram::new(0.0, 1.0, y_bins);
    let mut counts = vec![vec![0u64; y_bins]; x_bins];
    for (&l, &r) in lids.iter().zip(&recalls) {
        let x = lid_marginal.bin_of(l).expect("lid within its own range");
        let y = recall_marginal.bin_of(r).expect("recall within [0, 1]");
        counts[x][y] += 1;
        lid_marginal.counts[x] += 1;
        recall_marginal.counts[y] += 1;
    }
    Ok(RecallLidBins { lid_lo: lo, lid_hi: hi, counts, lid_marginal, recall_marginal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Metric;
    use crate::indexes::Algorithm;
    use proptest::prelude::*;

    fn record(query: usize, recall: f64, latency_ns: u64) -> QueryRecord {
        QueryRecord { query, query_id: query, latency_ns, recall, dist_comps: 10, aux: 0 }
    }

    pub(crate) fn fake_run(recalls: &[f64]) -> RunResult {
        let records: Vec<QueryRecord> =
            recalls.iter().enumerate().map(|(i, &r)| record(i, r, 1000 + i as u64)).collect();
        RunResult {
            dataset: "t".into(),
            fingerprint: 1,
            difficulty: Difficulty::Diverse,
            query_k: 10,
            spec: IndexSpec { algorithm: Algorithm::Ivf, build_params: BTreeMap::new(), seed: 0 },
            search_params: BTreeMap::new(),
            build_stats: BuildStats::default(),
            summary: RunSummary::from_records(&records),
            records,
            tool_version: "test".into(),
            extra: Extra::default(),
        }
    }

    fn line(points: &[f32]) -> Dataset {
        Dataset::new("line", Metric::Euclidean, 1, points.to_vec()).unwrap()
    }

    fn gt_for(train: &Dataset, q: f32, k: usize) -> Vec<Neighbor> {
        let qs = line(&[q]);
        crate::oracle::exact_knn(train, &qs, k, false).unwrap().neighbors.remove(0)
    }

    #[test]
    fn recall_exact_and_half() {
        let train = line(&(0..30).map(|i| i as f32).collect::<Vec<_>>());
        let gt = gt_for(&train, 0.0, 10);
        let exact: Vec<usize> = (0..10).collect();
        assert_eq!(recall(&exact, &gt, 10, &[0.0], &train), 1.0);
        let mut shuffled = exact.clone();
        shuffled.reverse();
        assert_eq!(recall(&shuffled, &gt, 10, &[0.0], &train), 1.0);
        let half: Vec<usize> = (0..5).chain(20..25).collect();
        assert_eq!(recall(&half, &gt, 10, &[0.0], &train), 0.5);
    }

    #[test]
    fn recall_counts_tied_points() {
        // query 1.0 sits on id 1; ids 0 and 2 tie at r_k = 1 and only id 0
        // is listed
        let train = line(&[0.0, 1.0, 2.0]);
        let gt = gt_for(&train, 1.0, 2);
        assert_eq!(gt.iter().map(|n| n.id).collect::<Vec<_>>(), vec![1, 0]);
        assert_eq!(recall(&[1, 2], &gt, 2, &[1.0], &train), 1.0);
        assert_eq!(recall(&[2, 0], &gt, 2, &[1.0], &train), 1.0);
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto(&[(0.5, 100.0), (0.6, 120.0), (0.7, 90.0)]), vec![(0.6, 120.0), (0.7, 90.0)]);
        assert_eq!(pareto(&[(0.3, 1.0)]), vec![(0.3, 1.0)]);
        assert_eq!(pareto(&[(0.3, 1.0), (0.3, 1.0)]).len(), 2);
        assert_eq!(pareto(&[(0.3, 1.0), (0.3, 2.0)]), vec![(0.3, 2.0)]);
    }

    fn dominance_reference(points: &[(f64, f64)]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| {
                !(0..points.len()).any(|j| {
                    let (a, b) = (points[j], points[i]);
                    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
                })
            })
            .collect()
    }

    proptest! {
        #[test]
        fn pareto_matches_dominance_filter(
            pts in prop::collection::vec((0u8..20, 0u8..20), 1..40)
        ) {
            let points: Vec<(f64, f64)> = pts.iter().map(|&(r, q)| (r as f64 / 20.0, q as f64 * 10.0)).collect();
            let mut got = pareto_indices(&points);
            got.sort_unstable();
            prop_assert_eq!(got, dominance_reference(&points));
        }
    }

    fn rp(algo: &str, recall: f64, qps: f64, dc: f64) -> RankPoint {
        RankPoint { algorithm: algo.into(), avg_recall: recall, qps, dist_comps: dc }
    }

    #[test]
    fn ranking_examples() {
        let pts = [rp("A", 0.8, 1000.0, 1e6), rp("B", 0.8, 500.0, 5e6)];
        let t = ranking(&pts, &[0.75], Measure::Qps);
        assert_eq!(t.rows["A"][0].ratio, Some(1.0));
        assert_eq!(t.rows["B"][0].ratio, Some(0.5));
        let t = ranking(&pts, &[0.75], Measure::DistComps);
        assert_eq!(t.rows["A"][0].ratio, Some(1.0));
        assert_eq!(t.rows["B"][0].ratio, Some(5.0));
        let pts = [rp("A", 0.95, 10.0, 1.0), rp("B", 0.8, 50.0, 1.0), rp("B", 0.7, 100.0, 1.0)];
        let t = ranking(&pts, &[0.75, 0.9], Measure::Qps);
        assert_eq!(t.rows["B"][1], RankingCell { best: None, ratio: None });
        assert_eq!(t.rows["B"][0].best, Some(50.0));
        assert_eq!(t.rows["A"][0].ratio, Some(0.2));
        assert_eq!(t.rows["A"][1].ratio, Some(1.0));
    }

    #[test]
    fn histogram_and_bimodality() {
        let all_one = fake_run(&[1.0; 7]);
        let h = recall_histogram(&all_one, 20);
        assert_eq!(h.counts[19], 7);
        assert_eq!(bimodality(&all_one), 1.0);
        let all_zero = fake_run(&[0.0; 3]);
        assert_eq!(recall_histogram(&all_zero, 20).counts[0], 3);
        let mixed = fake_run(&[0.0, 0.5, 1.0, 0.9]);
        assert_eq!(bimodality(&mixed), 0.5);
        let h = recall_histogram(&mixed, 20);
        assert_eq!(h.counts[0] + h.counts[19], 2);
    }

    #[test]
    fn summary_consistency() {
        let run = fake_run(&[0.1, 0.7, 0.4]);
        run.validate().unwrap();
        let mut bad = run.clone();
        bad.summary.avg_recall += 1e-12;
        assert!(bad.validate().is_err());
        let mut empty = run;
        empty.records.clear();
        assert!(empty.validate().is_err());
    }

    #[test]
    fn lid_bins() {
        let profile = LidProfile { k: 10, fingerprint: 0, values: vec![2.0, 4.0, 6.0, f64::INFINITY], dropped_zeros: vec![0; 4] };
        let run = fake_run(&[1.0]);
        let b = recall_vs_lid_bins(&run, &profile, 30, 20).unwrap();
        let nonzero: usize = b.counts.iter().flatten().filter(|&&c| c > 0).count();
        assert_eq!(nonzero, 1);
        let run = fake_run(&[1.0, 0.5, 0.0]);
        let b = recall_vs_lid_bins(&run, &profile, 4, 5).unwrap();
        for (x, col) in b.counts.iter().enumerate() {
            assert_eq!(col.iter().sum::<u64>(), b.lid_marginal.counts[x]);
        }
        assert_eq!(b.recall_marginal.total(), 3);
        assert!(lid_recall_spearman(&run, &profile).unwrap() < -0.99);
        let run = fake_run(&[1.0, 1.0, 1.0, 1.0]);
        assert!(recall_vs_lid_bins(&run, &profile, 4, 5).is_err());
    }
}
