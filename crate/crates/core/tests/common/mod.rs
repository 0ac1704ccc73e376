#![allow(dead_code)]

use lidbench_core::bench::{run_built, RunResult};
use lidbench_core::data::{generate_synthetic, Dataset, SyntheticSpec};
use lidbench_core::indexes::{parse_params, Algorithm, Index, IndexSpec};
use lidbench_core::lid::{lid_profile, LidProfile};
use lidbench_core::workload::{build_workload, select_hard, Difficulty, Workload};

pub struct Fixture {
    pub dataset: Dataset,
    pub profile: LidProfile,
    pub workload: Workload,
}

/// A small clustered dataset with its profile and a hard workload.
pub fn fixture() -> Fixture {
    let dataset = generate_synthetic(&SyntheticSpec::gaussian_mixture(1500, 8, 6, 0.2, 11)).unwrap();
    let profile = lid_profile(&dataset, 20).unwrap();
    let (ids, _) = select_hard(&profile, 60).unwrap();
    let workload = build_workload(&dataset, &ids, Difficulty::Hard, 10, None).unwrap();
    Fixture { dataset, profile, workload }
}

pub fn runs(w: &Workload, algo: Algorithm, build: &str, searches: &[&str]) -> Vec<RunResult> {
    let spec = IndexSpec::parse(algo, build, 0).unwrap();
    let (index, stats) = Index::build(&w.train, &spec).unwrap();
    searches
        .iter()
        .map(|s| run_built(&index, &spec, stats, w, &parse_params(s).unwrap(), 1).unwrap())
        .collect()
}

pub fn sweep(w: &Workload) -> Vec<RunResult> {
    let mut out = runs(w, Algorithm::Ivf, "nlist=20", &["nprobe=1", "nprobe=2", "nprobe=4", "nprobe=20"]);
    out.extend(runs(w, Algorithm::KnnGraph, "degree=8", &["ef=10", "ef=20", "ef=60"]));
    out.extend(runs(w, Algorithm::BruteForce, "", &[""]));
    out
}
