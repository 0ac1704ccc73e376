use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Metric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    UniformBall,
    UniformCube,
    GaussianMixture,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-ball" => Ok(Self::UniformBall),
            "uniform-cube" => Ok(Self::UniformCube),
            "gaussian-mixture" => Ok(Self::GaussianMixture),
            other => Err(Error::invalid(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UniformBall => "uniform-ball",
            Self::UniformCube => "uniform-cube",
            Self::GaussianMixture => "gaussian-mixture",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    /// Only read for `GaussianMixture`.
    pub clusters: usize,
    /// Per-coordinate noise stddev; only read for `GaussianMixture`.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn uniform_ball(n: usize, d: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::UniformBall, n, d, clusters: 1, sigma: 0.0, seed }
    }

    pub fn uniform_cube(n: usize, d: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::UniformCube, n, d, clusters: 1, sigma: 0.0, seed }
    }

    pub fn gaussian_mixture(n: usize, d: usize, clusters: usize, sigma: f64, seed: u64) -> Self {
        Self { kind: SyntheticKind::GaussianMixture, n, d, clusters, sigma, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid("synthetic n and d must be at least 1"));
        }
        if self.kind == SyntheticKind::GaussianMixture {
            if self.clusters == 0 {
                return Err(Error::invalid("gaussian-mixture needs at least one cluster"));
            }
            if !(self.sigma.is_finite() && self.sigma >= 0.0) {
                return Err(Error::invalid("sigma must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    fn name(&self) -> String {
        match self.kind {
            SyntheticKind::GaussianMixture => format!(
                "{}-n{}-d{}-c{}-s{}-seed{}",
                self.kind, self.n, self.d, self.clusters, self.sigma, self.seed
            ),
            _ => format!("{}-n{}-d{}-seed{}", self.kind, self.n, self.d, self.seed),
        }
    }
}

/// Deterministic synthetic dataset (Euclidean metric).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = (spec.n, spec.d);
    let mut points = Vec::with_capacity(n * d);
    let mut buf = vec![0.0f64; d];
    match spec.kind {
        SyntheticKind::UniformCube => {
            points.extend((0..n * d).map(|_| rng.random::<f32>()));
        }
        SyntheticKind::UniformBall => {
            // f32 rounding of the coordinates may push the norm up by a few
            // ulps; shrink the radius slightly so every row stays in the ball.
            const SHRINK: f64 = 1.0 - 1e-6;
            for _ in 0..n {
                let sq = loop {
                    for x in buf.iter_mut() {
                        *x = StandardNormal.sample(&mut rng);
                    }
                    let sq = buf.iter().map(|x| x * x).sum::<f64>();
                    if sq > 0.0 {
                        break sq;
                    }
                };
                let radius = rng.random::<f64>().powf(1.0 / d as f64) * SHRINK;
                let scale = radius / sq.sqrt();
                points.extend(buf.iter().map(|x| (x * scale) as f32));
            }
        }
        SyntheticKind::GaussianMixture => {
            let centers: Vec<f64> = (0..spec.clusters * d).map(|_| rng.random::<f64>()).collect();
            let noise = Normal::new(0.0, spec.sigma)
                .map_err(|e| Error::invalid(format!("sigma: {e}")))?;
            for _ in 0..n {
                let c = rng.random_range(0..spec.clusters);
                let center = &centers[c * d..(c + 1) * d];
                points.extend(center.iter().map(|m| (m + noise.sample(&mut rng)) as f32));
            }
        }
    }
    Dataset::new(spec.name(), Metric::Euclidean, d, points)
}
