//! Bounded zero-mean noise laws for the disturbance and observation noise.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{invalid, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDistribution {
    /// Each coordinate uniform on `[-bound/√dim, bound/√dim]`.
    UniformBox,
    /// `N(0, σ² I)` conditioned on `‖v‖ ≤ bound`, sampled by rejection.
    TruncatedGaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLaw {
    pub bound: f64,
    pub distribution: NoiseDistribution,
}

impl NoiseLaw {
    pub fn zero() -> Self {
        Self {
            bound: 0.0,
            distribution: NoiseDistribution::UniformBox,
        }
    }

    pub fn uniform(bound: f64) -> Self {
        Self {
            bound,
            distribution: NoiseDistribution::UniformBox,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound.is_finite() && self.bound >= 0.0) {
            return Err(invalid("noise bound must be finite and nonnegative"));
        }
        if let NoiseDistribution::TruncatedGaussian { sigma } = self.distribution {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(invalid("truncated gaussian sigma must be positive"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut StreamRng, dim: usize) -> Vec<f64> {
        if self.bound == 0.0 {
            return vec![0.0; dim];
        }
        match self.distribution {
            NoiseDistribution::UniformBox => {
                let half = self.bound / (dim as f64).sqrt();
                (0..dim).map(|_| rng.uniform_range(-half, half)).collect()
            }
            NoiseDistribution::TruncatedGaussian { sigma } => loop {
                let v: Vec<f64> = (0..dim).map(|_| sigma * rng.standard_normal()).collect();
                if crate::vecops::norm(&v) <= self.bound {
                    break v;
                }
            },
        }
    }

    /// Scalar draw; identical to `sample(rng, 1)[0]`.
    pub fn sample_scalar(&self, rng: &mut StreamRng) -> f64 {
        if self.bound == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::UniformBox => rng.uniform_range(-self.bound, self.bound),
            NoiseDistribution::TruncatedGaussian { sigma } => loop {
                let v = sigma * rng.standard_normal();
                if v.abs() <= self.bound {
                    break v;
                }
            },
        }
    }

    /// Per-coordinate variance of a one-dimensional draw.
    pub fn scalar_variance(&self) -> f64 {
        let b = self.bound;
        if b == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::UniformBox => b * b / 3.0,
            NoiseDistribution::TruncatedGaussian { sigma } => {
                let z = b / sigma;
                let pdf = (-0.5 * z * z).exp() / (std::f64::consts::TAU).sqrt();
                let mass = erf(z / std::f64::consts::SQRT_2);
                sigma * sigma * (1.0 - 2.0 * z * pdf / mass)
            }
        }
    }

    /// The constant `c` with `Var(w) = c · bound²` for scalar draws.
    pub fn cov_floor(&self) -> f64 {
        if self.bound == 0.0 {
            0.0
        } else {
            self.scalar_variance() / (self.bound * self.bound)
        }
    }
}
