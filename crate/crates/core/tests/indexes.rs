mod common;

use lidbench_core::bench::{run, RunResult};
use lidbench_core::data::{Dataset, Metric};
use lidbench_core::indexes::{parse_params, Algorithm, Index, IndexSpec};
use lidbench_core::oracle::exact_knn;
use lidbench_core::workload::{build_workload, workload_with_ground_truth, Difficulty, IdList, Workload};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, d: usize, metric: Metric, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Dataset::new("rand", metric, d, points).unwrap()
}

fn workload(n: usize, d: usize, metric: Metric, seed: u64) -> Workload {
    let ds = random_dataset(n, d, metric, seed);
    let ids: Vec<usize> = (0..n).step_by(n / 20).take(20).collect();
    build_workload(&ds, &ids, Difficulty::Easy, 10, None).unwrap()
}

fn avg_recalls(w: &Workload, algo: Algorithm, build: &str, key: &str, values: &[usize]) -> Vec<RunResult> {
    let spec = IndexSpec::parse(algo, build, 3).unwrap();
    let (index, _) = Index::build(&w.train, &spec).unwrap();
    values
        .iter()
        .map(|v| run(&index, w, &parse_params(&format!("{key}={v}")).unwrap(), 1).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ivf_recall_grows_with_nprobe(seed in any::<u64>(), angular in any::<bool>()) {
        let metric = if angular { Metric::Angular } else { Metric::Euclidean };
        let w = workload(400, 6, metric, seed);
        let runs = avg_recalls(&w, Algorithm::Ivf, "nlist=16", "nprobe", &[1, 2, 4, 8, 16]);
        for pair in runs.windows(2) {
            // probed lists nest, so every query's candidate set only grows
            for (a, b) in pair[0].records.iter().zip(&pair[1].records) {
                prop_assert!(b.recall >= a.recall);
                prop_assert!(b.dist_comps >= a.dist_comps);
            }
        }
        prop_assert_eq!(runs[4].summary.avg_recall, 1.0);
    }

    #[test]
    fn rpforest_recall_grows_with_search_k(seed in any::<u64>(), angular in any::<bool>()) {
        let metric = if angular { Metric::Angular } else { Metric::Euclidean };
        let w = workload(400, 6, metric, seed);
        let runs = avg_recalls(&w, Algorithm::RpForest, "num_trees=4,leaf_size=8", "search_k", &[10, 40, 160, 400]);
        for pair in runs.windows(2) {
            for (a, b) in pair[0].records.iter().zip(&pair[1].records) {
                prop_assert!(b.recall >= a.recall);
            }
        }
        prop_assert_eq!(runs[3].summary.avg_recall, 1.0);
    }

    #[test]
    fn knngraph_recall_grows_with_ef(seed in any::<u64>(), angular in any::<bool>()) {
        let metric = if angular { Metric::Angular } else { Metric::Euclidean };
        let w = workload(400, 6, metric, seed);
        let runs = avg_recalls(&w, Algorithm::KnnGraph, "degree=6", "ef", &[10, 20, 40, 80, 380]);
        for pair in runs.windows(2) {
            prop_assert!(pair[1].summary.avg_recall + 0.01 >= pair[0].summary.avg_recall);
        }
    }

    #[test]
    fn results_are_distinct_valid_ids(seed in any::<u64>(), k in 1usize..15) {
        let w = workload(300, 5, Metric::Euclidean, seed);
        let n = w.train.len();
        for (algo, build, search) in [
            (Algorithm::BruteForce, "", ""),
            (Algorithm::Ivf, "nlist=10", "nprobe=3"),
            (Algorithm::RpForest, "num_trees=3", "search_k=30"),
            (Algorithm::KnnGraph, "degree=5", "ef=12"),
        ] {
            let spec = IndexSpec::parse(algo, build, seed).unwrap();
            let (index, _) = Index::build(&w.train, &spec).unwrap();
            let params = parse_params(search).unwrap();
            for qi in 0..w.len() {
                let res = index.search_with(w.queries.row(qi), k, &params).unwrap();
                prop_assert!(res.ids.len() <= k);
                prop_assert!(res.ids.iter().all(|&id| id < n));
                let mut ids = res.ids.clone();
                ids.sort_unstable();
                ids.dedup();
                prop_assert_eq!(ids.len(), res.ids.len());
                prop_assert!(res.dist_comps >= res.ids.len() as u64);
            }
        }
    }
}

#[test]
fn builds_are_deterministic_given_seed() {
    let w = workload(500, 8, Metric::Euclidean, 5);
    for (algo, build, search) in [
        (Algorithm::Ivf, "nlist=12,seed=9", "nprobe=2"),
        (Algorithm::RpForest, "num_trees=5,seed=9", "search_k=50"),
        (Algorithm::KnnGraph, "degree=6", "ef=15"),
    ] {
        let spec = IndexSpec::parse(algo, build, 0).unwrap();
        let (a, _) = Index::build(&w.train, &spec).unwrap();
        let (b, _) = Index::build(&w.train, &spec).unwrap();
        let params = parse_params(search).unwrap();
        let ra = run(&a, &w, &params, 1).unwrap();
        let rb = run(&b, &w, &params, 1).unwrap();
        assert_eq!(ra.recalls(), rb.recalls(), "{algo}");
        let comps = |r: &RunResult| r.records.iter().map(|q| (q.dist_comps, q.aux)).collect::<Vec<_>>();
        assert_eq!(comps(&ra), comps(&rb), "{algo}");
    }
}

#[test]
fn bruteforce_with_repetitions_is_exact() {
    let w = workload(300, 4, Metric::Euclidean, 8);
    let spec = IndexSpec::parse(Algorithm::BruteForce, "", 0).unwrap();
    let (index, _) = Index::build(&w.train, &spec).unwrap();
    let r = run(&index, &w, &Default::default(), 3).unwrap();
    assert!(r.records.iter().all(|q| q.latency_ns > 0 && q.recall == 1.0));
    r.validate().unwrap();
}

#[test]
fn run_rejects_foreign_index() {
    let w = workload(300, 4, Metric::Euclidean, 8);
    let other = random_dataset(280, 4, Metric::Euclidean, 9);
    let spec = IndexSpec::parse(Algorithm::BruteForce, "", 0).unwrap();
    let (index, _) = Index::build(&other, &spec).unwrap();
    assert!(run(&index, &w, &Default::default(), 1).is_err());
}

#[test]
fn workload_reassembles_from_stored_ground_truth() {
    let ds = random_dataset(200, 3, Metric::Euclidean, 2);
    let ids = vec![5, 17, 17, 80];
    let w = build_workload(&ds, &ids, Difficulty::Diverse, 5, Some(4)).unwrap();
    let list = IdList::parse(&w.ids_file()).unwrap();
    let back = workload_with_ground_truth(&ds, &list, w.ground_truth.clone()).unwrap();
    assert_eq!(back.ids, w.ids);
    assert_eq!(back.train_ids, w.train_ids);
    assert_eq!(back.train.fingerprint(), w.train.fingerprint());
    assert_eq!(back.seed, Some(4));

    // ground truth of a different residual set is refused
    let other = exact_knn(&ds, &ds.select(&[0]).unwrap(), 5, false).unwrap();
    assert!(workload_with_ground_truth(&ds, &list, other).is_err());
}
