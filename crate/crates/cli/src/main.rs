mod commands;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lidbench", version, about = "Nearest-neighbor benchmarking with LID-controlled query workloads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create or convert datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Estimate the LID of every point and write a profile.
    Lid(LidArgs),
    /// Select queries by difficulty and compute their ground truth.
    Workload(WorkloadArgs),
    /// Build an index and time it on a workload, one record per grid point.
    Run(RunArgs),
    /// Aggregate run records.
    Eval(EvalArgs),
    /// Render run records or profiles as SVG.
    Plot(PlotArgs),
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Convert fvecs or csv vectors to the binary dataset format.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: InputFormat,
        #[arg(long, default_value = "euclidean")]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InputFormat {
    Fvecs,
    Csv,
}

#[derive(Args, Debug)]
struct LidArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = lidbench_core::lid::DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct WorkloadArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    difficulty: String,
    /// Number of queries; defaults to 10000 (5000 for diverse).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = lidbench_core::workload::DEFAULT_QUERY_K)]
    query_k: usize,
    /// Sampling seed, used by the diverse workload.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    algo: String,
    /// Build parameters `k=v,...`; `;` separates grid points.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    build: String,
    /// Search parameters `k=v,...`; `;` separates grid points.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    search: String,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Index build seed when the build parameters carry no `seed`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(value_enum)]
    what: EvalKind,
    #[arg(long)]
    runs: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.75, 0.9])]
    thresholds: Vec<f64>,
    #[arg(long, default_value = "qps")]
    measure: String,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EvalKind {
    Pareto,
    Ranking,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(value_enum)]
    kind: PlotKind,
    #[arg(long)]
    runs: Option<String>,
    /// LID profile; repeat for several ridgeline rows.
    #[arg(long)]
    profile: Vec<PathBuf>,
    /// Size of the hard set whose threshold the ridgeline marks.
    #[arg(long, default_value_t = lidbench_core::workload::DEFAULT_M)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PlotKind {
    Tradeoff,
    Lid,
    RecallDist,
    RecallLid,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    format!("{e:#}").replace('\n', " ")
}

/// 2 when the failure originates in the filesystem, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let io = e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some()
            || c.downcast_ref::<lidbench_core::Error>().is_some_and(lidbench_core::Error::is_io)
            || c.downcast_ref::<commands::MissingInput>().is_some()
    });
    if io {
        2
    } else {
        1
    }
}
