//! Query sets stratified by estimated LID.
//!
//! * easy: the `m` lowest finite LIDs
//! * medium: `m` consecutive points around the median LID
//! * hard: the `m` highest finite LIDs
//! * diverse: `m` draws, each picking a non-empty `floor(LID)` bucket
//!   uniformly and then a point uniformly inside it (with repetition)
//!
//! Selected queries are removed from the indexed train set.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lid::LidProfile;
use crate::oracle::{exact_knn, GroundTruth};

pub const DEFAULT_M: usize = 10_000;
pub const DEFAULT_DIVERSE_M: usize = 5_000;
pub const DEFAULT_QUERY_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Diverse,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [Self::Easy, Self::Medium, Self::Hard, Self::Diverse];
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
            Self::Diverse => "diverse",
        })
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "medium" => Ok(Self::Medium),
            "hard" => Ok(Self::Hard),
            "diverse" => Ok(Self::Diverse),
            other => Err(Error::invalid(format!("unknown difficulty `{other}`"))),
        }
    }
}

/// Finite-LID ids sorted by `(lid, id)` ascending.
fn ranked(profile: &LidProfile, m: usize) -> Result<Vec<usize>> {
    let mut ids = profile.finite_ids();
    if m > ids.len() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds the {} points with a finite LID",
            ids.len()
        )));
    }
    ids.sort_by(|&a, &b| profile.values[a].total_cmp(&profile.values[b]).then(a.cmp(&b)));
    Ok(ids)
}

pub fn select_easy(profile: &LidProfile, m: usize) -> Result<Vec<usize>> {
    let mut ids = ranked(profile, m)?;
    ids.truncate(m);
    Ok(ids)
}

pub fn select_medium(profile: &LidProfile, m: usize) -> Result<Vec<usize>> {
    let ids = ranked(profile, m)?;
    let start = (ids.len() - m) / 2;
    Ok(ids[start..start + m].to_vec())
}

/// The `m` largest finite LIDs (ties by ascending id) and the smallest LID
/// among them, which is the hard-set threshold.
pub fn select_hard(profile: &LidProfile, m: usize) -> Result<(Vec<usize>, f64)> {
    let mut ids = profile.finite_ids();
    if m > ids.len() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds the {} points with a finite LID",
            ids.len()
        )));
    }
    if m == 0 {
        return Ok((Vec::new(), f64::INFINITY));
    }
    ids.sort_by(|&a, &b| profile.values[b].total_cmp(&profile.values[a]).then(a.cmp(&b)));
    ids.truncate(m);
    let threshold = profile.values[*ids.last().unwrap()];
    Ok((ids, threshold))
}

/// Finite-LID ids grouped by `floor(LID)`.
pub fn lid_buckets(profile: &LidProfile) -> BTreeMap<u64, Vec<usize>> {
    let mut buckets: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for id in profile.finite_ids() {
        buckets.entry(profile.values[id].floor() as u64).or_default().push(id);
    }
    buckets
}

pub fn select_diverse(profile: &LidProfile, m: usize, seed: u64) -> Result<Vec<usize>> {
    let buckets: Vec<Vec<usize>> = lid_buckets(profile).into_values().collect();
    if buckets.is_empty() {
        return Err(Error::invalid("no points with a finite LID"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| {
            let b = &buckets[rng.random_range(0..buckets.len())];
            b[rng.random_range(0..b.len())]
        })
        .collect())
}

/// A query set plus the residual train set it is evaluated against.
#[derive(Debug, Clone)]
pub struct Workload {
    pub difficulty: Difficulty,
    /// Dataset ids of the queries, in query order (may repeat for diverse).
    pub ids: Vec<usize>,
    pub queries: Dataset,
    pub train: Dataset,
    /// Dataset id of each residual train row.
    pub train_ids: Vec<usize>,
    pub ground_truth: GroundTruth,
    pub query_k: usize,
    pub seed: Option<u64>,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The id-list file: a header line then one dataset id per line.
    pub fn ids_file(&self) -> String {
        let mut out = format!(
            "# difficulty={} query_k={} seed={}\n",
            self.difficulty,
            self.query_k,
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
        );
        for id in &self.ids {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

/// Header fields and ids parsed back from an id-list file.
#[derive(Debug, Clone, PartialEq)]
pub struct IdList {
    pub difficulty: Difficulty,
    pub query_k: usize,
    pub seed: Option<u64>,
    pub ids: Vec<usize>,
}

impl IdList {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format("empty id list"))?;
        let mut difficulty = None;
        let mut query_k = None;
        let mut seed = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("difficulty", v)) => difficulty = Some(v.parse()?),
                Some(("query_k", v)) => {
                    query_k = Some(v.parse().map_err(|_| Error::format("bad query_k in id list"))?)
                }
                Some(("seed", "none")) => {}
                Some(("seed", v)) => seed = Some(v.parse().map_err(|_| Error::format("bad seed in id list"))?),
                _ => {}
            }
        }
        let ids = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse().map_err(|_| Error::format(format!("bad id `{l}`"))))
            .collect::<Result<Vec<usize>>>()?;
        Ok(Self {
            difficulty: difficulty.ok_or_else(|| Error::format("id list header lacks difficulty"))?,
            query_k: query_k.ok_or_else(|| Error::format("id list header lacks query_k"))?,
            seed,
            ids,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Splits `dataset` into queries (`ids`) and the residual train set, and
/// computes exact `query_k`-NN ground truth of the queries on the residual.
pub fn build_workload(
    dataset: &Dataset,
    ids: &[usize],
    difficulty: Difficulty,
    query_k: usize,
    seed: Option<u64>,
) -> Result<Workload> {
    let (train_ids, train, queries) = split(dataset, ids, query_k)?;
    let ground_truth = exact_knn(&train, &queries, query_k, false)?;
    Ok(Workload {
        difficulty,
        ids: ids.to_vec(),
        queries,
        train,
        train_ids,
        ground_truth,
        query_k,
        seed,
    })
}

/// Reassembles a workload from its id list and previously computed ground
/// truth, checking that the ground truth belongs to the residual train set.
pub fn workload_with_ground_truth(dataset: &Dataset, list: &IdList, ground_truth: GroundTruth) -> Result<Workload> {
    let (train_ids, train, queries) = split(dataset, &list.ids, list.query_k)?;
    ground_truth.validate_against(&train)?;
    if ground_truth.len() != list.ids.len() || ground_truth.k < list.query_k {
        return Err(Error::Schema(format!(
            "ground truth covers {} queries at k = {}, id list has {} at query_k = {}",
            ground_truth.len(),
            ground_truth.k,
            list.ids.len(),
            list.query_k
        )));
    }
    Ok(Workload {
        difficulty: list.difficulty,
        ids: list.ids.clone(),
        queries,
        train,
        train_ids,
        ground_truth,
        query_k: list.query_k,
        seed: list.seed,
    })
}

fn split(dataset: &Dataset, ids: &[usize], query_k: usize) -> Result<(Vec<usize>, Dataset, Dataset)> {
    if ids.is_empty() {
        return Err(Error::invalid("workload needs at least one query"));
    }
    let n = dataset.len();
    let mut is_query = vec![false; n];
    for &id in ids {
        if id >= n {
            return Err(Error::invalid(format!("query id {id} out of range for n = {n}")));
        }
        is_query[id] = true;
    }
    let train_ids: Vec<usize> = (0..n).filter(|&i| !is_query[i]).collect();
    if query_k == 0 || train_ids.len() < query_k {
        return Err(Error::invalid(format!(
            "residual train set has {} points, query_k = {query_k}",
            train_ids.len()
        )));
    }
    let train = dataset.select(&train_ids)?;
    let queries = dataset.select(ids)?;
    Ok((train_ids, train, queries))
}
