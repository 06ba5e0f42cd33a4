//! Scalar feature maps `φ: R -> R^p` for the residual `f(x, a) = φ(x)·a`.
//!
//! Every map has closed-form first and second derivatives so the first-order
//! mismatch and the curvature constants of the gradient-error bound can be
//! evaluated without numerical differentiation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureMap {
    /// `φ(x) = [x]`
    Linear,
    /// `φ(x) = [x, x², …, x^degree]`
    Polynomial { degree: u32 },
    /// `φ_i(x) = sin(ω_i x)`
    Sinusoid { frequencies: Vec<f64> },
    /// `φ_i(x) = tanh(s_i x)`
    Tanh { scales: Vec<f64> },
}

impl FeatureMap {
    pub fn out_dim(&self) -> usize {
        match self {
            FeatureMap::Linear => 1,
            FeatureMap::Polynomial { degree } => *degree as usize,
            FeatureMap::Sinusoid { frequencies } => frequencies.len(),
            FeatureMap::Tanh { scales } => scales.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            FeatureMap::Linear => true,
            FeatureMap::Polynomial { degree } => *degree >= 1,
            FeatureMap::Sinusoid { frequencies } => {
                !frequencies.is_empty() && frequencies.iter().all(|w| w.is_finite())
            }
            FeatureMap::Tanh { scales } => {
                !scales.is_empty() && scales.iter().all(|s| s.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("feature map {self:?} has no features")))
        }
    }

    /// `φ_i(x)`, `φ_i'(x)` and `φ_i''(x)` for feature `i`.
    #[inline]
    fn component(&self, i: usize, x: f64) -> (f64, f64, f64) {
        match self {
            FeatureMap::Linear => (x, 1.0, 0.0),
            FeatureMap::Polynomial { .. } => {
                let k = (i + 1) as i32;
                let kf = k as f64;
                let d1 = kf * x.powi(k - 1);
                let d2 = if k >= 2 {
                    kf * (kf - 1.0) * x.powi(k - 2)
                } else {
                    0.0
                };
                (x.powi(k), d1, d2)
            }
            FeatureMap::Sinusoid { frequencies } => {
                let w = frequencies[i];
                let (s, c) = (w * x).sin_cos();
                (s, w * c, -w * w * s)
            }
            FeatureMap::Tanh { scales } => {
                let s = scales[i];
                let th = (s * x).tanh();
                let sech2 = 1.0 - th * th;
                (th, s * sech2, -2.0 * s * s * th * sech2)
            }
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        (0..self.out_dim()).map(|i| self.component(i, x).0).collect()
    }

    pub fn eval_dx(&self, x: f64) -> Vec<f64> {
        (0..self.out_dim()).map(|i| self.component(i, x).1).collect()
    }

    pub fn eval_dxx(&self, x: f64) -> Vec<f64> {
        (0..self.out_dim()).map(|i| self.component(i, x).2).collect()
    }

    /// `φ(x)·a` without allocating.
    #[inline]
    pub fn dot(&self, x: f64, a: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, ai)| self.component(i, x).0 * ai)
            .sum()
    }

    /// `φ'(x)·a`, the x-derivative of the residual.
    #[inline]
    pub fn dot_dx(&self, x: f64, a: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, ai)| self.component(i, x).1 * ai)
            .sum()
    }

    /// `φ''(x)·a`
    #[inline]
    pub fn dot_dxx(&self, x: f64, a: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, ai)| self.component(i, x).2 * ai)
            .sum()
    }

    /// `(sup |φ'(x)|, sup |φ''(x)|)` in Euclidean norm over a uniform grid of
    /// `[-radius, radius]`.
    pub fn derivative_bounds(&self, radius: f64, points: usize) -> (f64, f64) {
        let points = points.max(2);
        let mut d1: f64 = 0.0;
        let mut d2: f64 = 0.0;
        for j in 0..points {
            let x = -radius + 2.0 * radius * j as f64 / (points - 1) as f64;
            d1 = d1.max(crate::vecops::norm(&self.eval_dx(x)));
            d2 = d2.max(crate::vecops::norm(&self.eval_dxx(x)));
        }
        (d1, d2)
    }
}
