//! Local-intrinsic-dimensionality tooling for nearest-neighbor benchmarks.
//!
//! The pipeline: load or synthesize a [`data::Dataset`], compute exact
//! ground truth ([`oracle`]), estimate a per-point LID profile ([`lid`]),
//! carve difficulty-stratified query sets out of it ([`workload`]), run
//! instrumented reference indexes over them ([`indexes`], [`bench`]) and
//! persist or plot the results ([`report`]).

pub mod bench;
pub mod data;
pub mod error;
pub mod indexes;
pub mod lid;
pub mod oracle;
pub mod report;
pub mod stats;
pub mod workload;

pub use error::{Error, Result};

/// Version string stamped into run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
