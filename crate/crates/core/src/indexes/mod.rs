//! A common build/search surface over four reference index families:
//! linear scan, inverted file over k-means cells, a random-projection
//! forest, and beam search on an exact k-NN graph.
//!
//! Every search reports how many exact metric evaluations it performed
//! (`dist_comps`) and a secondary traversal counter (`aux`).

mod bruteforce;
mod ivf;
mod knngraph;
mod rpforest;

pub use bruteforce::BruteForce;
pub use ivf::{Ivf, IvfBuild};
pub use knngraph::{KnnGraph, KnnGraphBuild};
pub use rpforest::{RpForest, RpForestBuild};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::Neighbor;

pub type ParamMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    BruteForce,
    Ivf,
    RpForest,
    KnnGraph,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::BruteForce, Self::Ivf, Self::RpForest, Self::KnnGraph];

    pub fn build_keys(self) -> &'static [&'static str] {
        match self {
            Self::BruteForce => &[],
            Self::Ivf => &["nlist"],
            Self::RpForest => &["num_trees", "leaf_size", "split_samples", "split_rounds"],
            Self::KnnGraph => &["degree"],
        }
    }

    pub fn search_keys(self) -> &'static [&'static str] {
        match self {
            Self::BruteForce => &[],
            Self::Ivf => &["nprobe"],
            Self::RpForest => &["search_k"],
            Self::KnnGraph => &["ef"],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BruteForce => "bruteforce",
            Self::Ivf => "ivf",
            Self::RpForest => "rpforest",
            Self::KnnGraph => "knngraph",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" => Ok(Self::BruteForce),
            "ivf" => Ok(Self::Ivf),
            "rpforest" => Ok(Self::RpForest),
            "knngraph" => Ok(Self::KnnGraph),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Parses `k=v,k=v` into a map. Empty input gives an empty map.
pub fn parse_params(s: &str) -> Result<ParamMap> {
    let mut map = ParamMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::param(part, "expected key=value"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::param(part, "expected key=value"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::param(k, "given twice"));
        }
    }
    Ok(map)
}

/// Formats a map back as `k=v,k=v` (keys in order).
pub fn format_params(map: &ParamMap) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

fn check_keys(map: &ParamMap, allowed: &[&str]) -> Result<()> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::param(key, format!("unknown parameter (allowed: {})", allowed.join(", "))));
        }
    }
    Ok(())
}

fn get_usize(map: &ParamMap, key: &str) -> Result<Option<usize>> {
    map.get(key)
        .map(|v| v.parse::<usize>().map_err(|_| Error::param(key, format!("`{v}` is not a nonnegative integer"))))
        .transpose()
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::param(key, "must be at least 1"))
    } else {
        Ok(v)
    }
}

/// Algorithm plus build parameters. A `seed` key in the parameter map is
/// lifted into `seed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub algorithm: Algorithm,
    pub build_params: ParamMap,
    pub seed: u64,
}

impl IndexSpec {
    pub fn new(algorithm: Algorithm, mut build_params: ParamMap, default_seed: u64) -> Result<Self> {
        let seed = match build_params.remove("seed") {
            Some(s) => s.parse().map_err(|_| Error::param("seed", format!("`{s}` is not a u64")))?,
            None => default_seed,
        };
        check_keys(&build_params, algorithm.build_keys())?;
        Ok(Self { algorithm, build_params, seed })
    }

    pub fn parse(algorithm: Algorithm, params: &str, default_seed: u64) -> Result<Self> {
        Self::new(algorithm, parse_params(params)?, default_seed)
    }

    /// Build parameters including `seed`, as persisted in run records.
    pub fn params_with_seed(&self) -> ParamMap {
        let mut m = self.build_params.clone();
        m.insert("seed".into(), self.seed.to_string());
        m
    }
}

/// Typed search parameters, validated once before the timed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchConfig {
    BruteForce,
    Ivf { nprobe: usize },
    /// `None` means `num_trees * query_k`.
    RpForest { search_k: Option<usize> },
    /// `None` means `ef = query_k`.
    KnnGraph { ef: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchResult {
    /// Distinct train ids, closest first.
    pub ids: Vec<usize>,
    pub dist_comps: u64,
    pub aux: u64,
}

impl SearchResult {
    pub(crate) fn from_neighbors(neighbors: Vec<Neighbor>, dist_comps: u64, aux: u64) -> Self {
        Self { ids: neighbors.into_iter().map(|n| n.id).collect(), dist_comps, aux }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildStats {
    pub build_time_ns: u64,
    /// Scalars stored beyond the train matrix itself (centroids, list
    /// entries, hyperplanes, adjacency).
    pub stored_scalars: u64,
}

/// A built, immutable index over a borrowed train set.
#[derive(Debug)]
pub enum Index<'a> {
    BruteForce(BruteForce<'a>),
    Ivf(Ivf<'a>),
    RpForest(RpForest<'a>),
    KnnGraph(KnnGraph<'a>),
}

impl<'a> Index<'a> {
    pub fn build(train: &'a Dataset, spec: &IndexSpec) -> Result<(Self, BuildStats)> {
        check_keys(&spec.build_params, spec.algorithm.build_keys())?;
        let p = &spec.build_params;
        let n = train.len();
        let start = Instant::now();
        let index = match spec.algorithm {
            Algorithm::BruteForce => Index::BruteForce(BruteForce::new(train)),
            Algorithm::Ivf => {
                let default = ((n as f64).sqrt().round() as usize).max(1);
                let nlist = positive("nlist", get_usize(p, "nlist")?.unwrap_or(default))?;
                if nlist > n {
                    return Err(Error::param("nlist", format!("{nlist} exceeds n = {n}")));
                }
                Index::Ivf(Ivf::build(train, &IvfBuild { nlist, seed: spec.seed })?)
            }
            Algorithm::RpForest => {
                let d = RpForestBuild::default();
                let cfg = RpForestBuild {
                    num_trees: positive("num_trees", get_usize(p, "num_trees")?.unwrap_or(d.num_trees))?,
                    leaf_size: positive("leaf_size", get_usize(p, "leaf_size")?.unwrap_or(d.leaf_size))?,
                    split_samples: get_usize(p, "split_samples")?.unwrap_or(d.split_samples).max(2),
                    split_rounds: get_usize(p, "split_rounds")?.unwrap_or(d.split_rounds),
                    seed: spec.seed,
                };
                Index::RpForest(RpForest::build(train, &cfg))
            }
            Algorithm::KnnGraph => {
                let degree = positive("degree", get_usize(p, "degree")?.unwrap_or(16))?;
                Index::KnnGraph(KnnGraph::build(train, &KnnGraphBuild { degree }))
            }
        };
        let build_time_ns = (start.elapsed().as_nanos() as u64).max(1);
        let stats = BuildStats { build_time_ns, stored_scalars: index.stored_scalars() };
        Ok((index, stats))
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Index::BruteForce(_) => Algorithm::BruteForce,
            Index::Ivf(_) => Algorithm::Ivf,
            Index::RpForest(_) => Algorithm::RpForest,
            Index::KnnGraph(_) => Algorithm::KnnGraph,
        }
    }

    pub fn train(&self) -> &'a Dataset {
        match self {
            Index::BruteForce(i) => i.train(),
            Index::Ivf(i) => i.train(),
            Index::RpForest(i) => i.train(),
            Index::KnnGraph(i) => i.train(),
        }
    }

    fn stored_scalars(&self) -> u64 {
        match self {
            Index::BruteForce(_) => 0,
            Index::Ivf(i) => i.stored_scalars(),
            Index::RpForest(i) => i.stored_scalars(),
            Index::KnnGraph(i) => i.stored_scalars(),
        }
    }

    pub fn parse_search(&self, params: &ParamMap) -> Result<SearchConfig> {
        let algo = self.algorithm();
        check_keys(params, algo.search_keys())?;
        Ok(match algo {
            Algorithm::BruteForce => SearchConfig::BruteForce,
            Algorithm::Ivf => SearchConfig::Ivf {
                nprobe: positive("nprobe", get_usize(params, "nprobe")?.unwrap_or(1))?,
            },
            Algorithm::RpForest => SearchConfig::RpForest {
                search_k: get_usize(params, "search_k")?.map(|v| positive("search_k", v)).transpose()?,
            },
            Algorithm::KnnGraph => SearchConfig::KnnGraph {
                ef: get_usize(params, "ef")?.map(|v| positive("ef", v)).transpose()?,
            },
        })
    }

    /// Top-`query_k` search. `cfg` must come from [`Index::parse_search`]
    /// on the same index.
    pub fn search(&self, q: &[f32], query_k: usize, cfg: &SearchConfig) -> Result<SearchResult> {
        let train = self.train();
        train.check_query(q)?;
        if query_k == 0 || query_k > train.len() {
            return Err(Error::KOutOfRange { k: query_k, available: train.len() });
        }
        match (self, cfg) {
            (Index::BruteForce(i), SearchConfig::BruteForce) => Ok(i.search(q, query_k)),
            (Index::Ivf(i), SearchConfig::Ivf { nprobe }) => Ok(i.search(q, query_k, *nprobe)),
            (Index::RpForest(i), SearchConfig::RpForest { search_k }) => {
                Ok(i.search(q, query_k, search_k.unwrap_or(i.num_trees() * query_k)))
            }
            (Index::KnnGraph(i), SearchConfig::KnnGraph { ef }) => Ok(i.search(q, query_k, ef.unwrap_or(query_k))),
            _ => Err(Error::invalid(format!("search config {cfg:?} does not fit a {} index", self.algorithm()))),
        }
    }

    /// Convenience wrapper parsing `params` on every call.
    pub fn search_with(&self, q: &[f32], query_k: usize, params: &ParamMap) -> Result<SearchResult> {
        let cfg = self.parse_search(params)?;
        self.search(q, query_k, &cfg)
    }
}
