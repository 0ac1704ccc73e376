//! Run-record persistence and SVG figures.
//!
//! A run record is one JSON document:
//!
//! ```text
//! { "meta":    { dataset, fingerprint (16 hex digits), workload, query_k,
//!                algorithm, build_params, search_params, build_stats,
//!                tool_version },
//!   "queries": { query_id: [..], latency_ns: [..], recall: [..],
//!                dist_comps: [..], aux: [..] },
//!   "summary": { avg_recall, qps, total_dist_comps } }
//! ```
//!
//! Keys this version does not know are carried through a read/write cycle.

mod plots;
mod svg;

pub use plots::{plot_lid_ridgeline, plot_recall_distribution, plot_recall_vs_lid, plot_tradeoff, RidgeRow};

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::bench::{Extra, QueryRecord, RunResult, RunSummary};
use crate::error::{Error, Result};
use crate::indexes::{BuildStats, IndexSpec, ParamMap};
use crate::oracle::GroundTruth;

/// Parses a fingerprint written as up to 16 hex digits.
pub fn parse_hex_u64(s: &str) -> Result<u64> {
    if s.is_empty() || s.len() > 16 {
        return Err(Error::format(format!("`{s}` is not a 64-bit hex fingerprint")));
    }
    u64::from_str_radix(s, 16).map_err(|_| Error::format(format!("`{s}` is not a 64-bit hex fingerprint")))
}

/// Serde adapter storing a `u64` as a 16-digit lowercase hex string.
pub(crate) mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_hex_u64(&s).map_err(serde::de::Error::custom)
    }
}

fn params_value(map: &ParamMap) -> Value {
    Value::Object(map.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
}

pub fn run_to_json(run: &RunResult) -> Value {
    let mut meta = Map::new();
    meta.insert("dataset".into(), json!(run.dataset));
    meta.insert("fingerprint".into(), json!(format!("{:016x}", run.fingerprint)));
    meta.insert("workload".into(), json!(run.difficulty));
    meta.insert("query_k".into(), json!(run.query_k));
    meta.insert("algorithm".into(), json!(run.spec.algorithm));
    meta.insert("build_params".into(), params_value(&run.spec.params_with_seed()));
    meta.insert("search_params".into(), params_value(&run.search_params));
    meta.insert(
        "build_stats".into(),
        json!({
            "build_time_ns": run.build_stats.build_time_ns,
            "stored_scalars": run.build_stats.stored_scalars,
        }),
    );
    meta.insert("tool_version".into(), json!(run.tool_version));
    meta.extend(run.extra.meta.clone());

    let col = |f: &dyn Fn(&QueryRecord) -> Value| Value::Array(run.records.iter().map(f).collect());
    let mut queries = Map::new();
    queries.insert("query_id".into(), col(&|r| json!(r.query_id)));
    queries.insert("latency_ns".into(), col(&|r| json!(r.latency_ns)));
    queries.insert("recall".into(), col(&|r| json!(r.recall)));
    queries.insert("dist_comps".into(), col(&|r| json!(r.dist_comps)));
    queries.insert("aux".into(), col(&|r| json!(r.aux)));
    queries.extend(run.extra.queries.clone());

    let mut summary = Map::new();
    summary.insert("avg_recall".into(), json!(run.summary.avg_recall));
    summary.insert("qps".into(), json!(run.summary.qps));
    summary.insert("total_dist_comps".into(), json!(run.summary.total_dist_comps));
    summary.extend(run.extra.summary.clone());

    let mut top = Map::new();
    top.insert("meta".into(), Value::Object(meta));
    top.insert("queries".into(), Value::Object(queries));
    top.insert("summary".into(), Value::Object(summary));
    top.extend(run.extra.top.clone());
    Value::Object(top)
}

fn take_obj(map: &mut Map<String, Value>, key: &str) -> Result<Map<String, Value>> {
    match map.remove(key) {
        Some(Value::Object(o)) => Ok(o),
        Some(_) => Err(Error::Schema(format!("`{key}` must be an object"))),
        None => Err(Error::Schema(format!("missing `{key}`"))),
    }
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<T> {
    let v = map.remove(key).ok_or_else(|| Error::Schema(format!("missing `{key}`")))?;
    serde_json::from_value(v).map_err(|e| Error::Schema(format!("`{key}`: {e}")))
}

pub fn run_from_json(value: Value) -> Result<RunResult> {
    let Value::Object(mut top) = value else {
        return Err(Error::Schema("run record must be a JSON object".into()));
    };
    let mut meta = take_obj(&mut top, "meta")?;
    let mut queries = take_obj(&mut top, "queries")?;
    let mut summary_obj = take_obj(&mut top, "summary")?;

    let dataset: String = take(&mut meta, "dataset")?;
    let fp: String = take(&mut meta, "fingerprint")?;
    if fp.len() != 16 {
        return Err(Error::Schema("fingerprint must have 16 hex digits".into()));
    }
    let fingerprint = parse_hex_u64(&fp).map_err(|e| Error::Schema(e.to_string()))?;
    let difficulty = take(&mut meta, "workload")?;
    let query_k: usize = take(&mut meta, "query_k")?;
    let algorithm = take(&mut meta, "algorithm")?;
    let build_params: ParamMap = take(&mut meta, "build_params")?;
    let spec = IndexSpec::new(algorithm, build_params, 0)?;
    let search_params: ParamMap = take(&mut meta, "search_params")?;
    let build_stats: BuildStats = take(&mut meta, "build_stats")?;
    let tool_version: String = take(&mut meta, "tool_version")?;

    let query_id: Vec<usize> = take(&mut queries, "query_id")?;
    let latency_ns: Vec<u64> = take(&mut queries, "latency_ns")?;
    let recall: Vec<f64> = take(&mut queries, "recall")?;
    let dist_comps: Vec<u64> = take(&mut queries, "dist_comps")?;
    let aux: Vec<u64> = take(&mut queries, "aux")?;
    let m = latency_ns.len();
    if [query_id.len(), recall.len(), dist_comps.len(), aux.len()].iter().any(|&l| l != m) {
        return Err(Error::Schema("query arrays differ in length".into()));
    }
    if m == 0 {
        return Err(Error::Schema("query arrays are empty".into()));
    }
    let records = (0..m)
        .map(|i| QueryRecord {
            query: i,
            query_id: query_id[i],
            latency_ns: latency_ns[i],
            recall: recall[i],
            dist_comps: dist_comps[i],
            aux: aux[i],
        })
        .collect();

    let summary = RunSummary {
        avg_recall: take(&mut summary_obj, "avg_recall")?,
        qps: take(&mut summary_obj, "qps")?,
        total_dist_comps: take(&mut summary_obj, "total_dist_comps")?,
    };

    let run = RunResult {
        dataset,
        fingerprint,
        difficulty,
        query_k,
        spec,
        search_params,
        build_stats,
        records,
        summary,
        tool_version,
        extra: Extra { top, meta, queries, summary: summary_obj },
    };
    run.validate()?;
    Ok(run)
}

pub fn write_run(run: &RunResult, path: impl AsRef<Path>) -> Result<()> {
    run.validate()?;
    let text = serde_json::to_string_pretty(&run_to_json(run))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RunResult> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    run_from_json(value)
}

pub fn write_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_string(gt)?)?;
    Ok(())
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexes::Algorithm;
    use crate::workload::Difficulty;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn arb_run() -> impl Strategy<Value = RunResult> {
        (
            prop::collection::vec((1u64..10_000_000, 0u8..=10, 0u64..1_000_000, 0u64..1000, 0usize..100_000), 1..50),
            any::<u64>(),
            0usize..4,
            0usize..4,
            any::<u64>(),
        )
            .prop_map(|(rows, fingerprint, a, d, seed)| {
                let records: Vec<QueryRecord> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, &(lat, hits, dc, aux, qid))| QueryRecord {
                        query: i,
                        query_id: qid,
                        latency_ns: lat,
                        recall: hits as f64 / 10.0,
                        dist_comps: dc,
                        aux,
                    })
                    .collect();
                let mut build_params = BTreeMap::new();
                let algorithm = Algorithm::ALL[a];
                if let Some(k) = algorithm.build_keys().first() {
                    build_params.insert(k.to_string(), (seed % 97 + 1).to_string());
                }
                let mut search_params = BTreeMap::new();
                if let Some(k) = algorithm.search_keys().first() {
                    search_params.insert(k.to_string(), (seed % 13 + 1).to_string());
                }
                RunResult {
                    dataset: format!("ds-{}", seed % 5),
                    fingerprint,
                    difficulty: Difficulty::ALL[d],
                    query_k: 10,
                    spec: IndexSpec { algorithm, build_params, seed },
                    search_params,
                    build_stats: BuildStats { build_time_ns: seed % 1_000_000 + 1, stored_scalars: seed % 4096 },
                    summary: RunSummary::from_records(&records),
                    records,
                    tool_version: crate::VERSION.into(),
                    extra: Extra::default(),
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn json_round_trip(run in arb_run()) {
            let text = serde_json::to_string(&run_to_json(&run)).unwrap();
            let back = run_from_json(serde_json::from_str(&text).unwrap()).unwrap();
            prop_assert_eq!(back, run);
        }
    }

    fn sample() -> RunResult {
        let records: Vec<QueryRecord> = (0..4)
            .map(|i| QueryRecord { query: i, query_id: 10 + i, latency_ns: 500 + i as u64, recall: 0.1 * i as f64, dist_comps: 7, aux: 1 })
            .collect();
        RunResult {
            dataset: "d".into(),
            fingerprint: 0xabc,
            difficulty: Difficulty::Hard,
            query_k: 10,
            spec: IndexSpec { algorithm: Algorithm::KnnGraph, build_params: BTreeMap::from([("degree".into(), "8".into())]), seed: 3 },
            search_params: BTreeMap::from([("ef".into(), "20".into())]),
            build_stats: BuildStats { build_time_ns: 9, stored_scalars: 32 },
            summary: RunSummary::from_records(&records),
            records,
            tool_version: "x".into(),
            extra: Extra::default(),
        }
    }

    #[test]
    fn file_layout_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_run(&sample(), &p).unwrap();
        let mut v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["meta"]["fingerprint"], "0000000000000abc");
        assert_eq!(v["meta"]["build_params"]["seed"], "3");
        assert_eq!(v["queries"]["latency_ns"].as_array().unwrap().len(), 4);
        v["meta"]["host"] = json!("lab-7");
        v["notes"] = json!({"a": 1});
        v["queries"]["extra_col"] = json!([1, 2, 3, 4]);
        let back = run_from_json(v.clone()).unwrap();
        assert_eq!(back.extra.meta["host"], "lab-7");
        let again = run_to_json(&back);
        assert_eq!(again, v);
    }

    #[test]
    fn rejects_corruption() {
        let good = run_to_json(&sample());
        let mut v = good.clone();
        v["summary"]["avg_recall"] = json!(0.99);
        assert!(matches!(run_from_json(v), Err(Error::Schema(_))));
        let mut v = good.clone();
        v["summary"]["qps"] = json!(1.0);
        assert!(run_from_json(v).is_err());
        let mut v = good.clone();
        for key in ["query_id", "latency_ns", "recall", "dist_comps", "aux"] {
            v["queries"][key] = json!([]);
        }
        assert!(run_from_json(v).is_err());
        let mut v = good.clone();
        v["queries"]["aux"] = json!([1]);
        assert!(run_from_json(v).is_err());
        let mut v = good.clone();
        v["meta"]["fingerprint"] = json!("abc");
        assert!(run_from_json(v).is_err());
        let mut v = good;
        v["meta"].as_object_mut().unwrap().remove("algorithm");
        assert!(run_from_json(v).is_err());
    }

    #[test]
    fn ground_truth_round_trip() {
        use crate::data::{generate_synthetic, SyntheticSpec};
        let ds = generate_synthetic(&SyntheticSpec::uniform_cube(50, 3, 1)).unwrap();
        let gt = crate::oracle::exact_knn(&ds, &ds, 5, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.json");
        write_ground_truth(&gt, &p).unwrap();
        let back = read_ground_truth(&p).unwrap();
        assert_eq!(back, gt);
        back.validate_against(&ds).unwrap();
        let other = generate_synthetic(&SyntheticSpec::uniform_cube(50, 3, 2)).unwrap();
        assert!(matches!(back.validate_against(&other), Err(Error::FingerprintMismatch { .. })));
    }
}
