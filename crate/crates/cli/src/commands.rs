use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lidbench_core::bench::{self, Measure, RankPoint, RunResult};
use lidbench_core::data::{self, Dataset, Metric, SyntheticSpec};
use lidbench_core::indexes::{parse_params, Algorithm, Index, IndexSpec, ParamMap};
use lidbench_core::lid::{self, LidProfile};
use lidbench_core::report::{self, RidgeRow};
use lidbench_core::workload::{self, Difficulty, IdList};
use serde_json::{json, Value};

use crate::{Command, DatasetCmd, EvalArgs, EvalKind, InputFormat, LidArgs, PlotArgs, PlotKind, RunArgs, WorkloadArgs};

const IDS_FILE: &str = "ids.txt";
const GT_FILE: &str = "groundtruth.json";
const META_FILE: &str = "workload.json";

/// A named input that does not exist, reported as an I/O failure.
#[derive(Debug)]
pub struct MissingInput(pub String);

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for MissingInput {}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Dataset(c) => dataset(c),
        Command::Lid(a) => lid(a),
        Command::Workload(a) => make_workload(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    data::load_lidb(path).with_context(|| format!("loading {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dataset(cmd: DatasetCmd) -> Result<()> {
    let (ds, out) = match cmd {
        DatasetCmd::Convert { input, format, metric, out } => {
            let metric: Metric = metric.parse()?;
            let ds = match format {
                InputFormat::Fvecs => data::load_fvecs(&input, metric),
                InputFormat::Csv => data::load_csv(&input, metric),
            }
            .with_context(|| format!("reading {}", input.display()))?;
            (ds, out)
        }
        DatasetCmd::Synth { kind, n, d, clusters, sigma, seed, out } => {
            let spec = SyntheticSpec { kind: kind.parse()?, n, d, clusters, sigma, seed };
            (data::generate_synthetic(&spec)?, out)
        }
    };
    ensure_parent(&out)?;
    data::write_lidb(&ds, &out).with_context(|| format!("writing {}", out.display()))?;
    println!("{}: n={} d={} metric={} fingerprint={:016x}", out.display(), ds.len(), ds.dim(), ds.metric(), ds.fingerprint());
    Ok(())
}

fn lid(args: LidArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let profile = lid::lid_profile(&ds, args.k)?;
    ensure_parent(&args.out)?;
    profile.write_csv(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let s = lid::lid_summary(&profile)?;
    println!("{:<10} {:>10}", "statistic", "lid");
    for (name, v) in [("avg", s.avg), ("median", s.median), ("p25", s.p25), ("p75", s.p75), ("min", s.min), ("max", s.max)] {
        println!("{name:<10} {v:>10.3}");
    }
    println!("{:<10} {:>10}", "finite", s.finite);
    println!("{:<10} {:>10}", "infinite", s.infinite);
    println!("{:<10} {:>10}", "degenerate", s.degenerate);
    Ok(())
}

fn make_workload(args: WorkloadArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let profile = LidProfile::read_csv(&args.profile).with_context(|| format!("reading {}", args.profile.display()))?;
    if profile.fingerprint != ds.fingerprint() || profile.len() != ds.len() {
        bail!(
            "profile {} (fingerprint {:016x}, {} points) does not belong to dataset {} ({:016x}, {} points)",
            args.profile.display(),
            profile.fingerprint,
            profile.len(),
            args.data.display(),
            ds.fingerprint(),
            ds.len()
        );
    }
    let difficulty: Difficulty = args.difficulty.parse()?;
    let m = args.m.unwrap_or(match difficulty {
        Difficulty::Diverse => workload::DEFAULT_DIVERSE_M,
        _ => workload::DEFAULT_M,
    });
    let mut hard_threshold = None;
    let (ids, seed) = match difficulty {
        Difficulty::Easy => (workload::select_easy(&profile, m)?, None),
        Difficulty::Medium => (workload::select_medium(&profile, m)?, None),
        Difficulty::Hard => {
            let (ids, t) = workload::select_hard(&profile, m)?;
            hard_threshold = Some(t);
            (ids, None)
        }
        Difficulty::Diverse => {
            let seed = args.seed.unwrap_or(0);
            (workload::select_diverse(&profile, m, seed)?, Some(seed))
        }
    };
    let w = workload::build_workload(&ds, &ids, difficulty, args.query_k, seed)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_text(&args.out.join(IDS_FILE), &w.ids_file())?;
    report::write_ground_truth(&w.ground_truth, args.out.join(GT_FILE))?;
    let dataset_path = fs::canonicalize(&args.data)?;
    let meta = json!({
        "dataset": dataset_path.to_string_lossy(),
        "dataset_fingerprint": format!("{:016x}", ds.fingerprint()),
        "train_fingerprint": format!("{:016x}", w.train.fingerprint()),
        "difficulty": difficulty.to_string(),
        "m": w.len(),
        "query_k": w.query_k,
        "seed": seed,
        "lid_k": profile.k,
        "hard_threshold": hard_threshold,
    });
    write_text(&args.out.join(META_FILE), &format!("{}\n", serde_json::to_string_pretty(&meta)?))?;

    let lids: Vec<f64> = w.ids.iter().map(|&i| profile.values[i]).filter(|v| v.is_finite()).collect();
    let avg = lids.iter().sum::<f64>() / lids.len().max(1) as f64;
    println!(
        "{} workload: {} queries, {} train points, mean query LID {:.3}",
        difficulty,
        w.len(),
        w.train.len(),
        avg
    );
    Ok(())
}

/// A workload directory reloaded from disk.
struct LoadedWorkload {
    dataset: Dataset,
    ids: IdList,
    gt: lidbench_core::oracle::GroundTruth,
}

fn load_workload(dir: &Path) -> Result<LoadedWorkload> {
    let meta_path = dir.join(META_FILE);
    let meta: Value = serde_json::from_str(
        &fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?,
    )
    .with_context(|| format!("parsing {}", meta_path.display()))?;
    let ds_path = meta["dataset"]
        .as_str()
        .with_context(|| format!("{} lacks a dataset path", meta_path.display()))?;
    let dataset = load_dataset(Path::new(ds_path))?;
    if let Some(fp) = meta["dataset_fingerprint"].as_str() {
        let expected = report::parse_hex_u64(fp)?;
        if expected != dataset.fingerprint() {
            bail!("dataset {ds_path} changed since the workload was made (fingerprint {:016x}, expected {fp})", dataset.fingerprint());
        }
    }
    let ids_path = dir.join(IDS_FILE);
    let ids = IdList::read(&ids_path).with_context(|| format!("reading {}", ids_path.display()))?;
    let gt = report::read_ground_truth(dir.join(GT_FILE)).with_context(|| format!("reading {}", dir.join(GT_FILE).display()))?;
    Ok(LoadedWorkload { dataset, ids, gt })
}

fn grid(s: &str) -> Result<Vec<ParamMap>> {
    Ok(s.split(';').map(parse_params).collect::<lidbench_core::Result<_>>()?)
}

fn run(args: RunArgs) -> Result<()> {
    let algo: Algorithm = args.algo.parse()?;
    let builds = grid(&args.build)?
        .into_iter()
        .map(|p| IndexSpec::new(algo, p, args.seed))
        .collect::<lidbench_core::Result<Vec<_>>>()?;
    let searches = grid(&args.search)?;
    let loaded = load_workload(&args.workload)?;
    let w = workload::workload_with_ground_truth(&loaded.dataset, &loaded.ids, loaded.gt)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (bi, spec) in builds.iter().enumerate() {
        let (index, stats) = Index::build(&w.train, spec)?;
        // reject bad search grids before any timing happens
        for params in &searches {
            index.parse_search(params)?;
        }
        for (si, params) in searches.iter().enumerate() {
            let result = bench::run_built(&index, spec, stats, &w, params, args.reps)?;
            let path = args.out.join(format!("{}-{}-b{bi:02}-s{si:03}.json", algo, w.difficulty));
            report::write_run(&result, &path).with_context(|| format!("writing {}", path.display()))?;
            println!(
                "{:<48} recall {:.4}  qps {:>10.1}  dist_comps/q {:>10.1}",
                result.label(),
                result.summary.avg_recall,
                result.summary.qps,
                result.mean_dist_comps()
            );
        }
    }
    Ok(())
}

fn load_runs(pattern: &str) -> Result<Vec<RunResult>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob `{pattern}`"))?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        return Err(MissingInput(format!("no run records match `{pattern}`")).into());
    }
    paths
        .iter()
        .map(|p| report::read_run(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn eval(args: EvalArgs) -> Result<()> {
    let runs = load_runs(&args.runs)?;
    match args.what {
        EvalKind::Pareto => {
            let mut by_algo: BTreeMap<String, Vec<RunResult>> = BTreeMap::new();
            for r in runs {
                by_algo.entry(r.spec.algorithm.to_string()).or_default().push(r);
            }
            println!("{:<10} {:>8} {:>12} {:>14}  parameters", "algorithm", "recall", "qps", "dist_comps/q");
            for (algo, rs) in &by_algo {
                for r in bench::pareto_runs(rs) {
                    println!(
                        "{:<10} {:>8.4} {:>12.1} {:>14.1}  {}",
                        algo,
                        r.summary.avg_recall,
                        r.summary.qps,
                        r.mean_dist_comps(),
                        r.label()
                    );
                }
            }
        }
        EvalKind::Ranking => {
            let measure: Measure = args.measure.parse()?;
            if args.thresholds.is_empty() {
                bail!("no recall thresholds given");
            }
            let points: Vec<RankPoint> = runs.iter().map(RankPoint::from).collect();
            let table = bench::ranking(&points, &args.thresholds, measure);
            print!("{:<10}", "algorithm");
            for t in &table.thresholds {
                print!(" {:>18}", format!("recall>={t}"));
            }
            println!();
            for (algo, cells) in &table.rows {
                print!("{algo:<10}");
                for c in cells {
                    match (c.best, c.ratio) {
                        (Some(b), Some(r)) => print!(" {:>18}", format!("{r:.3} ({b:.1})")),
                        _ => print!(" {:>18}", "-"),
                    }
                }
                println!();
            }
        }
    }
    Ok(())
}

fn read_profile(path: &Path) -> Result<LidProfile> {
    LidProfile::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn plot(args: PlotArgs) -> Result<()> {
    let runs = || -> Result<Vec<RunResult>> {
        let pattern = args.runs.as_deref().context("--runs is required for this plot")?;
        load_runs(pattern)
    };
    let svg = match args.kind {
        PlotKind::Tradeoff => report::plot_tradeoff(&runs()?)?,
        PlotKind::RecallDist => report::plot_recall_distribution(&runs()?)?,
        PlotKind::RecallLid => {
            let runs = runs()?;
            if runs.len() != 1 {
                bail!("recall-lid plots one run; `--runs` matched {}", runs.len());
            }
            let path = args.profile.first().context("--profile is required for recall-lid")?;
            report::plot_recall_vs_lid(&runs[0], &read_profile(path)?)?
        }
        PlotKind::Lid => {
            if args.profile.is_empty() {
                bail!("--profile is required for the lid plot");
            }
            let profiles = args.profile.iter().map(|p| read_profile(p)).collect::<Result<Vec<_>>>()?;
            let rows = args
                .profile
                .iter()
                .zip(&profiles)
                .map(|(path, profile)| {
                    let m = args.m.min(profile.finite_count());
                    let threshold = if m == 0 { None } else { Some(workload::select_hard(profile, m)?.1) };
                    let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
                    Ok(RidgeRow { name, profile, hard_threshold: threshold })
                })
                .collect::<Result<Vec<_>>>()?;
            report::plot_lid_ridgeline(&rows)?
        }
    };
    write_text(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
