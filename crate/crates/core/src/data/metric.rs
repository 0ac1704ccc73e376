use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dissimilarity used for ground truth, LID and every index.
///
/// `Angular` is `1 - cos(x, y)`, which lies in `[0, 2]` and is monotone in
/// the angle between the two vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Angular,
}

impl Metric {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Metric::Euclidean => 0,
            Metric::Angular => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Metric::Euclidean),
            1 => Some(Metric::Angular),
            _ => None,
        }
    }

    /// Precomputes whatever the metric needs about a vector (its norm for
    /// angular) so repeated evaluations against it stay cheap.
    pub fn prepare<'a>(self, v: &'a [f32]) -> Prepared<'a> {
        let norm = match self {
            Metric::Euclidean => 0.0,
            Metric::Angular => norm(v),
        };
        Prepared { v, norm }
    }

    /// Distance between two prepared vectors. Infallible: a zero-norm
    /// operand under angular yields 1.0 (orthogonal), which only matters for
    /// internal quantities such as centroids; datasets reject such rows.
    #[inline]
    pub fn eval(self, a: &Prepared<'_>, b: &Prepared<'_>) -> f64 {
        match self {
            Metric::Euclidean => sq_euclidean(a.v, b.v).sqrt(),
            Metric::Angular => {
                let denom = a.norm * b.norm;
                if denom <= 0.0 {
                    return 1.0;
                }
                (1.0 - dot(a.v, b.v) / denom).clamp(0.0, 2.0)
            }
        }
    }

    #[inline]
    pub fn eval_raw(self, a: &[f32], b: &[f32]) -> f64 {
        self.eval(&self.prepare(a), &self.prepare(b))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Angular => "angular",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "angular" | "cosine" => Ok(Metric::Angular),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// A vector paired with its cached norm.
#[derive(Debug, Clone, Copy)]
pub struct Prepared<'a> {
    pub v: &'a [f32],
    pub norm: f64,
}

/// Checked distance between two raw vectors.
pub fn distance(metric: Metric, x: &[f32], y: &[f32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let (px, py) = (metric.prepare(x), metric.prepare(y));
    if metric == Metric::Angular && (px.norm == 0.0 || py.norm == 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(metric.eval(&px, &py))
}

// Accumulation is in f64 with four independent lanes; every caller goes
// through these so the summation order (and therefore every bit of the
// result) is the same everywhere.
#[inline]
pub(crate) fn sq_euclidean(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] as f64 - y[l] as f64;
            acc[l] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        let d = *x as f64 - *y as f64;
        s += d * d;
    }
    s
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] as f64 * y[l] as f64;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x as f64 * *y as f64;
    }
    s
}

#[inline]
pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}
