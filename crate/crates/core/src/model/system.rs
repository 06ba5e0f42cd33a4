//! The scalar matched-disturbance system
//!
//! ```text
//! x_{t+1} = x_t + Δ (u_t + φ(x_t)·a*_t) + w_t
//! u_t     = −φ(x_t)·â_t + ψ(x_t, θ_t),      ψ(x, θ) = −θ x
//! h(x, u, θ) = q x² + r u² + λ (θ − θ̄)²
//! ```
//!
//! State, input, residual and policy gain are scalars. The model parameter
//! `a ∈ R^p` has the dimension of the feature map.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ConvexSet, FeatureMap, NoiseLaw, ParamSchedule};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub q: f64,
    pub r: f64,
    pub lambda: f64,
    pub theta_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Discretization step Δ.
    pub delta: f64,
    pub feature_map: FeatureMap,
    pub cost: CostWeights,
    pub theta_set: ConvexSet,
    pub a_set: ConvexSet,
    pub x0: f64,
    /// Initial policy parameter; `theta_bar` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    pub w_law: NoiseLaw,
    pub obs_law: NoiseLaw,
    pub schedule: ParamSchedule,
    /// Run configurations set this from their top-level horizon.
    #[serde(default)]
    pub horizon: usize,
    /// Radius of the state box used for grid suprema.
    #[serde(default = "default_state_bound")]
    pub state_bound: f64,
    /// Bound on `‖φ(x)‖` used to tune the estimator step size.
    #[serde(default = "default_feature_bound")]
    pub feature_bound: f64,
}

fn default_state_bound() -> f64 {
    2.0
}

fn default_feature_bound() -> f64 {
    1.0
}

impl SystemSpec {
    pub fn initial_theta(&self) -> f64 {
        self.theta_set
            .project_scalar(self.theta0.unwrap_or(self.cost.theta_bar))
    }

    /// Dimension of the model parameter.
    pub fn param_dim(&self) -> usize {
        self.feature_map.out_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid("delta must be positive and finite"));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0 must be finite"));
        }
        let c = &self.cost;
        if ![c.q, c.r, c.lambda, c.theta_bar].iter().all(|v| v.is_finite())
            || c.q < 0.0
            || c.r < 0.0
            || c.lambda < 0.0
        {
            return Err(invalid("cost weights must be finite and nonnegative"));
        }
        self.feature_map.validate()?;
        self.theta_set.validate()?;
        self.a_set.validate()?;
        if self.theta_set.dim() != 1 {
            return Err(invalid("the policy gain is scalar; theta_set must be one-dimensional"));
        }
        if !self.theta_set.contains(&[c.theta_bar], 1e-12) {
            return Err(invalid("theta_bar must lie in theta_set"));
        }
        if self.a_set.dim() != self.param_dim() {
            return Err(invalid(format!(
                "a_set has dimension {} but the feature map has {} features",
                self.a_set.dim(),
                self.param_dim()
            )));
        }
        self.schedule.validate(&self.a_set)?;
        self.w_law.validate()?;
        self.obs_law.validate()?;
        if let Some(th) = self.theta0 {
            if !self.theta_set.contains(&[th], 1e-12) {
                return Err(invalid("theta0 must lie in theta_set"));
            }
        }
        if !(self.state_bound.is_finite() && self.state_bound > 0.0) {
            return Err(invalid("state_bound must be positive"));
        }
        if !(self.feature_bound.is_finite() && self.feature_bound > 0.0) {
            return Err(invalid("feature_bound must be positive"));
        }
        Ok(())
    }

    fn check_param(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.param_dim() {
            return Err(invalid(format!(
                "parameter has dimension {}, expected {}",
                a.len(),
                self.param_dim()
            )));
        }
        Ok(())
    }

    /// `f(x, a) = φ(x)·a`
    pub fn residual(&self, x: f64, a: &[f64]) -> Result<f64> {
        self.check_param(a)?;
        Ok(self.feature_map.dot(x, a))
    }

    /// `∇_x f(x, a) = φ'(x)·a`
    pub fn residual_dx(&self, x: f64, a: &[f64]) -> Result<f64> {
        self.check_param(a)?;
        Ok(self.feature_map.dot_dx(x, a))
    }

    /// `ψ(x, θ) = −θ x`
    #[inline]
    pub fn psi(&self, x: f64, theta: f64) -> f64 {
        -theta * x
    }

    /// `(∂ψ/∂x, ∂ψ/∂θ)`
    #[inline]
    pub fn psi_partials(&self, x: f64, theta: f64) -> (f64, f64) {
        (-theta, -x)
    }

    /// `u = −f̂ + ψ(x, θ)`
    #[inline]
    pub fn policy_input(&self, x: f64, theta: f64, f_hat: f64) -> f64 {
        -f_hat + self.psi(x, theta)
    }

    /// Nominal dynamics `φ(x, v) = x + Δ v` where `v` is the total input
    /// including the residual.
    #[inline]
    pub fn nominal(&self, x: f64, v: f64) -> f64 {
        x + self.delta * v
    }

    /// `(∂φ/∂x, ∂φ/∂v)` of the nominal dynamics.
    #[inline]
    pub fn nominal_partials(&self) -> (f64, f64) {
        (1.0, self.delta)
    }

    /// One step of the true system with a given disturbance value.
    #[inline]
    pub fn step_with(&self, x: f64, u: f64, a_star: &[f64], w: f64) -> f64 {
        self.nominal(x, u + self.feature_map.dot(x, a_star)) + w
    }

    /// One step of the true system at time `t`, drawing `w_t` from `w_law`.
    pub fn step_true(&self, x: f64, u: f64, t: usize, rng: &mut StreamRng) -> f64 {
        let a_star = self.schedule.value_at(t);
        let w = self.w_law.sample_scalar(rng);
        self.step_with(x, u, &a_star, w)
    }

    /// `h(x, u, θ) = q x² + r u² + λ (θ − θ̄)²`
    #[inline]
    pub fn stage_cost(&self, x: f64, u: f64, theta: f64) -> f64 {
        let c = &self.cost;
        let dt = theta - c.theta_bar;
        c.q * x * x + c.r * u * u + c.lambda * dt * dt
    }

    /// `(∂h/∂x, ∂h/∂u, ∂h/∂θ)`
    #[inline]
    pub fn cost_partials(&self, x: f64, u: f64, theta: f64) -> (f64, f64, f64) {
        let c = &self.cost;
        (
            2.0 * c.q * x,
            2.0 * c.r * u,
            2.0 * c.lambda * (theta - c.theta_bar),
        )
    }

    /// Noisy observation `f̃ = f(x, a*_t) + v`, `‖v‖ ≤ e_f`.
    pub fn observe_residual(&self, x: f64, t: usize, rng: &mut StreamRng) -> f64 {
        let a_star = self.schedule.value_at(t);
        self.observe_with(x, &a_star, rng)
    }

    #[inline]
    pub fn observe_with(&self, x: f64, a_star: &[f64], rng: &mut StreamRng) -> f64 {
        self.feature_map.dot(x, a_star) + self.obs_law.sample_scalar(rng)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn linear_spec() -> SystemSpec {
        SystemSpec {
            delta: 0.1,
            feature_map: FeatureMap::Linear,
            cost: CostWeights {
                q: 1.0,
                r: 2.0,
                lambda: 1.0,
                theta_bar: 1.0,
            },
            theta_set: ConvexSet::interval(0.0, 2.0),
            a_set: ConvexSet::interval(-10.0, 10.0),
            x0: 1.0,
            theta0: None,
            w_law: NoiseLaw::zero(),
            obs_law: NoiseLaw::zero(),
            schedule: ParamSchedule::Constant { value: vec![1.0] },
            horizon: 10,
            state_bound: 2.0,
            feature_bound: 1.0,
        }
    }

    #[test]
    fn residual_examples() {
        let s = linear_spec();
        assert_eq!(s.residual(2.0, &[3.0]).unwrap(), 6.0);
        assert_eq!(s.residual(-4.2, &[0.0]).unwrap(), 0.0);
        assert!(s.residual(1.0, &[1.0, 2.0]).is_err());
        let mut sin = linear_spec();
        sin.feature_map = FeatureMap::Sinusoid {
            frequencies: vec![1.0],
        };
        assert_eq!(sin.residual(0.0, &[5.0]).unwrap(), 0.0);
    }

    #[test]
    fn step_examples() {
        let s = linear_spec();
        assert!((s.step_with(1.0, -1.0, &[0.0], 0.0) - 0.9).abs() < 1e-15);
        // Δ=0.1, x=2, u=0, a*=1 → 2 + 0.1·2
        assert!((s.step_with(2.0, 0.0, &[1.0], 0.0) - 2.2).abs() < 1e-15);
        // u = −f(x, a*) cancels the residual exactly when ψ ≡ 0
        let x = 1.7;
        let u = -s.residual(x, &[1.0]).unwrap();
        assert_eq!(s.step_with(x, u, &[1.0], 0.0), x);
    }

    #[test]
    fn step_true_with_zero_noise_is_deterministic() {
        let s = linear_spec();
        let mut rng = StreamRng::from_seed_u64(0);
        assert!((s.step_true(2.0, 0.0, 0, &mut rng) - 2.2).abs() < 1e-15);
    }

    #[test]
    fn policy_examples() {
        let s = linear_spec();
        assert_eq!(s.policy_input(1.0, 0.5, 0.0), -0.5);
        assert_eq!(s.policy_input(0.0, 1.3, 0.0), 0.0);
        assert!((s.policy_input(2.0, 0.3, 1.4) - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn cost_examples() {
        let mut s = linear_spec();
        assert_eq!(s.stage_cost(0.0, 0.0, s.cost.theta_bar), 0.0);
        assert_eq!(s.stage_cost(1.0, 1.0, 2.0), 1.0 + 2.0 + 1.0);
        s.cost = CostWeights {
            q: 1.0,
            r: 0.0,
            lambda: 0.0,
            theta_bar: 1.0,
        };
        assert_eq!(s.stage_cost(3.0, 5.0, 0.0), 9.0);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let s = linear_spec();
        let mut rng = StreamRng::from_seed_u64(9);
        assert_eq!(s.observe_residual(1.5, 3, &mut rng), 1.5);
    }

    #[test]
    fn noisy_observation_is_unbiased_and_bounded() {
        let mut s = linear_spec();
        s.obs_law = NoiseLaw::uniform(0.4);
        let mut rng = StreamRng::from_seed_u64(21);
        let n = 100_000;
        let truth = s.residual(0.8, &[1.0]).unwrap();
        let mut sum = 0.0;
        for _ in 0..n {
            let f = s.observe_residual(0.8, 0, &mut rng);
            assert!((f - truth).abs() <= 0.4);
            sum += f - truth;
        }
        assert!((sum / n as f64).abs() <= 5.0 * 0.4 / (n as f64).sqrt());
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = linear_spec();
        assert!(s.validate().is_ok());
        s.cost.theta_bar = 5.0;
        assert!(s.validate().is_err());
        let mut s = linear_spec();
        s.a_set = ConvexSet::interval(0.0, 0.5);
        assert!(s.validate().is_err(), "schedule value 1.0 outside a_set");
        let mut s = linear_spec();
        s.feature_map = FeatureMap::Polynomial { degree: 2 };
        assert!(s.validate().is_err(), "a_set dimension mismatch");
    }
}
