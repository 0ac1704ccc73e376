//! Datasets, metrics, file formats and synthetic generators.

mod io;
mod metric;
mod synth;

pub use io::{load_csv, load_fvecs, load_lidb, read_lidb, write_csv, write_fvecs, write_lidb};
pub use metric::{distance, Metric, Prepared};
pub use synth::{generate_synthetic, SyntheticKind, SyntheticSpec};

pub(crate) use metric::{dot, norm, sq_euclidean};

use crate::error::{Error, Result};

/// An immutable `n x d` matrix of `f32` points, addressed by row index.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    metric: Metric,
    dim: usize,
    points: Vec<f32>,
    // cached norms, only populated for the angular metric
    norms: Vec<f64>,
    fingerprint: u64,
}

impl Dataset {
    pub fn new(name: impl Into<String>, metric: Metric, dim: usize, points: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimensionality must be at least 1"));
        }
        if points.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of length {dim}",
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        let norms = match metric {
            Metric::Euclidean => Vec::new(),
            Metric::Angular => {
                let norms: Vec<f64> = points.chunks_exact(dim).map(norm).collect();
                if let Some(row) = norms.iter().position(|&nv| nv <= 0.0) {
                    return Err(Error::invalid(format!(
                        "row {row} has zero norm under the angular metric"
                    )));
                }
                norms
            }
        };
        let fingerprint = fingerprint(dim, &points);
        Ok(Self {
            name: name.into(),
            metric,
            dim,
            points,
            norms,
            fingerprint,
        })
    }

    /// Builds a dataset from a list of rows.
    pub fn from_rows(name: impl Into<String>, metric: Metric, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "row {bad} has {} entries, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(name, metric, dim, rows.concat())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f32] {
        &self.points
    }

    /// 64-bit FNV-1a hash of the shape and the raw bits of the matrix.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    #[inline]
    pub fn prepared(&self, i: usize) -> Prepared<'_> {
        Prepared {
            v: self.row(i),
            norm: self.norms.get(i).copied().unwrap_or(0.0),
        }
    }

    /// Distance from a prepared query to row `i`.
    #[inline]
    pub fn dist_to(&self, q: &Prepared<'_>, i: usize) -> f64 {
        self.metric.eval(q, &self.prepared(i))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select(&self, ids: &[usize]) -> Result<Self> {
        let mut points = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            if id >= self.len() {
                return Err(Error::invalid(format!("id {id} out of range for n = {}", self.len())));
            }
            points.extend_from_slice(self.row(id));
        }
        Self::new(self.name.clone(), self.metric, self.dim, points)
    }

    /// Validates that `v` could be a query against this dataset.
    pub fn check_query(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if self.metric == Metric::Angular && norm(v) == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(())
    }
}

pub(crate) fn fingerprint(dim: usize, points: &[f32]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&((points.len() / dim) as u64).to_le_bytes());
    feed(&(dim as u64).to_le_bytes());
    for v in points {
        feed(&v.to_le_bytes());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_matrices() {
        assert!(Dataset::new("x", Metric::Euclidean, 0, vec![1.0]).is_err());
        assert!(Dataset::new("x", Metric::Euclidean, 2, vec![]).is_err());
        assert!(Dataset::new("x", Metric::Euclidean, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Dataset::new("x", Metric::Euclidean, 1, vec![f32::INFINITY]).is_err());
        assert!(Dataset::new("x", Metric::Angular, 2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(Dataset::new("x", Metric::Euclidean, 2, vec![1.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn fingerprint_tracks_content_and_shape() {
        let a = Dataset::new("a", Metric::Euclidean, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Dataset::new("b", Metric::Euclidean, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = Dataset::new("c", Metric::Euclidean, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = Dataset::new("d", Metric::Euclidean, 2, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_ne!(a.fingerprint(), d.fingerprint());
    }

    #[test]
    fn select_preserves_order() {
        let a = Dataset::new("a", Metric::Euclidean, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let s = a.select(&[3, 1]).unwrap();
        assert_eq!(s.points(), &[3.0, 1.0]);
        assert!(a.select(&[4]).is_err());
    }
}
