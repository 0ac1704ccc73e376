//! Local intrinsic dimensionality via the maximum-likelihood estimator over
//! k-NN distances:
//!
//! ```text
//! LID(x) = -( (1/k) * sum_i ln(r_i / r_k) )^-1
//! ```
//!
//! Zero distances (exact duplicates) are dropped first and counted. When
//! every retained distance equals `r_k` the log-sum is zero and the estimate
//! is `+inf`; this is a sentinel, not an error.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::exact_knn;
use crate::report::parse_hex_u64;
use crate::stats::{mean, quantile_sorted, Histogram};

pub const DEFAULT_K: usize = 100;

/// Estimate for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidEstimate {
    pub value: f64,
    pub dropped_zeros: usize,
}

/// MLE estimate from ascending neighbor distances.
pub fn estimate_lid(distances: &[f64]) -> Result<f64> {
    estimate_lid_detailed(distances).map(|e| e.value)
}

pub fn estimate_lid_detailed(distances: &[f64]) -> Result<LidEstimate> {
    if distances.is_empty() {
        return Err(Error::TooFewPositive(0));
    }
    if distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    if distances.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("distances must be sorted ascending"));
    }
    let r_k = *distances.last().unwrap();
    if r_k == 0.0 {
        return Err(Error::AllZeroDistances);
    }
    let positive = &distances[distances.partition_point(|&d| d == 0.0)..];
    let dropped_zeros = distances.len() - positive.len();
    if positive.len() < 2 {
        return Err(Error::TooFewPositive(positive.len()));
    }
    let log_sum: f64 = positive.iter().map(|r| (r / r_k).ln()).sum();
    let value = if log_sum == 0.0 {
        f64::INFINITY
    } else {
        -(positive.len() as f64) / log_sum
    };
    Ok(LidEstimate { value, dropped_zeros })
}

/// Per-point LID estimates for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LidProfile {
    pub k: usize,
    pub fingerprint: u64,
    /// Positive estimate, or `+inf` for flat neighborhoods and for points
    /// whose estimate could not be formed (see [`LidProfile::is_degenerate`]).
    pub values: Vec<f64>,
    pub dropped_zeros: Vec<usize>,
}

impl LidProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The estimator failed for this point (fewer than two positive
    /// neighbor distances).
    pub fn is_degenerate(&self, id: usize) -> bool {
        self.values[id].is_infinite() && self.k - self.dropped_zeros[id] < 2
    }

    /// Ids with a finite estimate, ascending.
    pub fn finite_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i].is_finite()).collect()
    }

    pub fn finite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        let _ = writeln!(out, "# k={} fingerprint={:016x}", self.k, self.fingerprint);
        out.push_str("id,lid,dropped_zeros\n");
        for (i, (v, z)) in self.values.iter().zip(&self.dropped_zeros).enumerate() {
            let _ = writeln!(out, "{i},{v},{z}");
        }
        out
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format("empty profile file"))?;
        let mut k = None;
        let mut fingerprint = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("k=") {
                k = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("fingerprint=") {
                fingerprint = Some(parse_hex_u64(v)?);
            }
        }
        let k = k.ok_or_else(|| Error::format("profile header lacks k="))?;
        let fingerprint = fingerprint.ok_or_else(|| Error::format("profile header lacks fingerprint="))?;
        match lines.next().map(str::trim) {
            Some("id,lid,dropped_zeros") => {}
            _ => return Err(Error::format("profile column header must be `id,lid,dropped_zeros`")),
        }
        let mut values = Vec::new();
        let mut dropped_zeros = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(format!("profile row {row}: `{line}`"));
            let mut f = line.split(',').map(str::trim);
            let id: usize = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v: f64 = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let z: usize = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if id != values.len() || f.next().is_some() || v.is_nan() || v <= 0.0 || z > k {
                return Err(bad());
            }
            values.push(v);
            dropped_zeros.push(z);
        }
        if values.is_empty() {
            return Err(Error::format("profile has no rows"));
        }
        Ok(Self { k, fingerprint, values, dropped_zeros })
    }
}

/// Applies [`estimate_lid`] to the exact `k`-NN (self excluded) of every
/// point. Points where estimation fails are stored as `+inf` and can be told
/// apart through [`LidProfile::is_degenerate`].
pub fn lid_profile(dataset: &Dataset, k: usize) -> Result<LidProfile> {
    if k < 2 || dataset.len() < k + 1 {
        return Err(Error::KOutOfRange { k, available: dataset.len().saturating_sub(1) });
    }
    let gt = exact_knn(dataset, dataset, k, true)?;
    Ok(profile_from_lists(k, dataset.fingerprint(), gt.neighbors.iter().map(|l| {
        l.iter().map(|n| n.dist).collect::<Vec<_>>()
    })))
}

pub(crate) fn profile_from_lists(
    k: usize,
    fingerprint: u64,
    lists: impl Iterator<Item = Vec<f64>>,
) -> LidProfile {
    let mut values = Vec::new();
    let mut dropped_zeros = Vec::new();
    for dists in lists {
        match estimate_lid_detailed(&dists) {
            Ok(e) => {
                values.push(e.value);
                dropped_zeros.push(e.dropped_zeros);
            }
            Err(_) => {
                values.push(f64::INFINITY);
                dropped_zeros.push(dists.iter().filter(|&&d| d == 0.0).count());
            }
        }
    }
    LidProfile { k, fingerprint, values, dropped_zeros }
}

pub const SUMMARY_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LidSummary {
    pub avg: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
    pub finite: usize,
    /// All `+inf` entries, degenerate ones included.
    pub infinite: usize,
    pub degenerate: usize,
    pub histogram: Histogram,
}

/// Average, median and quartiles over the finite estimates.
pub fn lid_summary(profile: &LidProfile) -> Result<LidSummary> {
    let mut finite: Vec<f64> = profile.values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::invalid("profile has no finite LID estimates"));
    }
    finite.sort_by(f64::total_cmp);
    let (min, max) = (finite[0], finite[finite.len() - 1]);
    let degenerate = (0..profile.len()).filter(|&i| profile.is_degenerate(i)).count();
    Ok(LidSummary {
        avg: mean(&finite),
        median: quantile_sorted(&finite, 0.5),
        p25: quantile_sorted(&finite, 0.25),
        p75: quantile_sorted(&finite, 0.75),
        min,
        max,
        finite: finite.len(),
        infinite: profile.len() - finite.len(),
        degenerate,
        histogram: Histogram::from_values(finite.iter().copied(), min, max, SUMMARY_BINS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Metric;
    use proptest::prelude::*;

    fn profile(values: &[f64]) -> LidProfile {
        LidProfile {
            k: 10,
            fingerprint: 0,
            values: values.to_vec(),
            dropped_zeros: vec![0; values.len()],
        }
    }

    #[test]
    fn zeros_are_dropped_and_counted() {
        let e = estimate_lid_detailed(&[0.0, 0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(e.dropped_zeros, 2);
        assert!((e.value - 1.6898145817650536).abs() < 1e-12);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(estimate_lid(&[0.0, 0.0]), Err(Error::AllZeroDistances)));
        assert!(matches!(estimate_lid(&[0.0, 1.0]), Err(Error::TooFewPositive(1))));
        assert!(matches!(estimate_lid(&[]), Err(Error::TooFewPositive(0))));
        assert!(estimate_lid(&[1.0, 0.5]).is_err());
        assert!(estimate_lid(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn identical_points_are_degenerate() {
        let ds = Dataset::new("dup", Metric::Euclidean, 2, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let p = lid_profile(&ds, 2).unwrap();
        assert!(p.values.iter().all(|v| v.is_infinite()));
        assert!((0..3).all(|i| p.is_degenerate(i)));
        assert_eq!(p.dropped_zeros, vec![2, 2, 2]);
        assert!(lid_summary(&p).is_err());
    }

    #[test]
    fn profile_needs_enough_points() {
        let ds = Dataset::new("t", Metric::Euclidean, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(lid_profile(&ds, 3).is_err());
        assert!(lid_profile(&ds, 2).is_ok());
    }

    #[test]
    fn summary_examples() {
        let s = lid_summary(&profile(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!((s.avg, s.median), (2.0, 2.0));
        let s = lid_summary(&profile(&[1.0, 2.0, 3.0, f64::INFINITY])).unwrap();
        assert_eq!((s.avg, s.infinite, s.finite), (2.0, 1, 3));
        // a flat neighborhood is +inf but not degenerate
        assert_eq!(s.degenerate, 0);
        assert_eq!(s.histogram.total(), 3);
    }

    #[test]
    fn csv_round_trip_with_infinity() {
        let mut p = profile(&[1.5, f64::INFINITY, 0.1 + 0.2]);
        p.fingerprint = 0xdead_beef_0000_0001;
        p.dropped_zeros[1] = 9;
        let text = p.to_csv();
        assert!(text.starts_with("# k=10 fingerprint=deadbeef00000001\nid,lid,dropped_zeros\n"));
        assert_eq!(LidProfile::from_csv(&text).unwrap(), p);
        assert!(LidProfile::from_csv("# k=10\nid,lid,dropped_zeros\n0,1,0\n").is_err());
        assert!(LidProfile::from_csv("# k=10 fingerprint=00\nid,lid,dropped_zeros\n1,1,0\n").is_err());
        assert!(LidProfile::from_csv("# k=10 fingerprint=00\nid,lid,dropped_zeros\n0,-1,0\n").is_err());
    }

    fn sorted_dists() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..1e3, 2..120).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
    }

    proptest! {
        #[test]
        fn scale_invariant(d in sorted_dists(), c in 1e-3f64..1e3) {
            let a = estimate_lid(&d).unwrap();
            let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
            let b = estimate_lid(&scaled).unwrap();
            if a.is_infinite() {
                prop_assert!(b.is_infinite());
            } else {
                prop_assert!(((a - b) / a).abs() < 1e-6);
            }
        }

        #[test]
        fn duplicating_rk_keeps_sign_and_finiteness(d in sorted_dists()) {
            let a = estimate_lid(&d).unwrap();
            let mut more = d.clone();
            more.push(*d.last().unwrap());
            let b = estimate_lid(&more).unwrap();
            prop_assert_eq!(a.is_finite(), b.is_finite());
            prop_assert!(a > 0.0 && b > 0.0);
        }

        #[test]
        fn summary_matches_sort_reference(v in prop::collection::vec(0.1f64..100.0, 1..200)) {
            let s = lid_summary(&profile(&v)).unwrap();
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
            prop_assert!((s.median - median).abs() < 1e-9);
            prop_assert!(s.p25 <= s.median && s.median <= s.p75);
            prop_assert!((s.avg - v.iter().sum::<f64>() / n as f64).abs() < 1e-9);
        }
    }
}
