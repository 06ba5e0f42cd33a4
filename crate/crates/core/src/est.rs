//! Online estimators of the residual parameter and the model mismatches they
//! incur along the realized trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::SystemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct EstState {
    pub a_hat: Vec<f64>,
    pub iota: f64,
}

/// Gradient estimator step: `â' = Π_A(â − ι ∂ℓ̃/∂a)` with
/// `ℓ̃ = ‖φ(x)·â − f̃‖²`, so `∂ℓ̃/∂a = 2 φ(x) (φ(x)·â − f̃)`.
pub fn grad_est_update(spec: &SystemSpec, x: f64, f_tilde: f64, st: &EstState) -> EstState {
    let features = spec.feature_map.eval(x);
    let err = crate::vecops::dot(&features, &st.a_hat) - f_tilde;
    let step: Vec<f64> = st
        .a_hat
        .iter()
        .zip(&features)
        .map(|(a, phi)| a - st.iota * 2.0 * phi * err)
        .collect();
    EstState {
        a_hat: spec.a_set.project_unchecked(&step),
        iota: st.iota,
    }
}

/// The exact parameter `a*_t`.
pub fn oracle_est(spec: &SystemSpec, t: usize) -> Vec<f64> {
    spec.schedule.value_at(t)
}

/// `(ε, ε′) = (‖f(x, â) − f(x, a*)‖, ‖∇_x f(x, â) − ∇_x f(x, a*)‖_F)`
pub fn mismatches(spec: &SystemSpec, x: f64, a_hat: &[f64], a_star: &[f64]) -> (f64, f64) {
    let fm = &spec.feature_map;
    let eps0 = (fm.dot(x, a_hat) - fm.dot(x, a_star)).abs();
    let eps1 = (fm.dot_dx(x, a_hat) - fm.dot_dx(x, a_star)).abs();
    (eps0, eps1)
}

/// Default estimator step size `min(0.1, √(3 C_p / T) / (2 D̂²))` with
/// `C_p = 1 + path length`.
pub fn default_iota(spec: &SystemSpec) -> f64 {
    let horizon = spec.horizon.max(1) as f64;
    let cp = 1.0 + spec.schedule.path_length(spec.horizon);
    let d2 = spec.feature_bound * spec.feature_bound;
    ((3.0 * cp / horizon).sqrt() / (2.0 * d2)).min(0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstKind {
    Gradient {
        /// `None` selects [`default_iota`].
        #[serde(default)]
        iota: Option<f64>,
        /// Initial estimate; zero (projected onto `A`) when absent.
        #[serde(default)]
        a_hat0: Option<Vec<f64>>,
    },
    Oracle,
    /// Holds `Π_A(a*_0 + offset)` forever.
    Frozen { offset: f64 },
}

impl EstKind {
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        match self {
            EstKind::Gradient { iota, a_hat0 } => {
                if let Some(i) = iota {
                    if !(i.is_finite() && *i >= 0.0) {
                        return Err(invalid("iota must be finite and nonnegative"));
                    }
                }
                if let Some(a) = a_hat0 {
                    if a.len() != spec.param_dim() || !crate::vecops::all_finite(a) {
                        return Err(invalid("a_hat0 has the wrong dimension or is not finite"));
                    }
                }
                Ok(())
            }
            EstKind::Oracle => Ok(()),
            EstKind::Frozen { offset } => {
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("frozen offset must be finite"))
                }
            }
        }
    }
}

/// Runtime estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Gradient(EstState),
    Oracle,
    Frozen(Vec<f64>),
}

impl Estimator {
    pub fn new(kind: &EstKind, spec: &SystemSpec) -> Self {
        match kind {
            EstKind::Gradient { iota, a_hat0 } => {
                let start = a_hat0
                    .clone()
                    .unwrap_or_else(|| vec![0.0; spec.param_dim()]);
                Estimator::Gradient(EstState {
                    a_hat: spec.a_set.project_unchecked(&start),
                    iota: iota.unwrap_or_else(|| default_iota(spec)),
                })
            }
            EstKind::Oracle => Estimator::Oracle,
            EstKind::Frozen { offset } => {
                let a0 = spec.schedule.value_at(0);
                let shifted: Vec<f64> = a0.iter().map(|a| a + offset).collect();
                Estimator::Frozen(spec.a_set.project_unchecked(&shifted))
            }
        }
    }

    /// Estimate used at step `t`, given the true value for the oracle.
    pub fn current(&self, a_star: &[f64]) -> Vec<f64> {
        match self {
            Estimator::Gradient(st) => st.a_hat.clone(),
            Estimator::Oracle => a_star.to_vec(),
            Estimator::Frozen(a) => a.clone(),
        }
    }

    /// Feeds `(x_t, f̃_t)`; only the gradient estimator learns.
    pub fn update(&mut self, spec: &SystemSpec, x: f64, f_tilde: f64) {
        if let Estimator::Gradient(st) = self {
            *st = grad_est_update(spec, x, f_tilde, st);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_spec, ConvexSet, ParamSchedule};

    #[test]
    fn zero_residual_error_leaves_estimate() {
        let s = linear_spec();
        let st = EstState {
            a_hat: vec![1.5],
            iota: 0.1,
        };
        assert_eq!(grad_est_update(&s, 2.0, 3.0, &st), st);
    }

    #[test]
    fn gradient_step_example() {
        let s = linear_spec();
        let st = EstState {
            a_hat: vec![1.0],
            iota: 0.05,
        };
        // ∂ℓ̃/∂a = 2·2·(2 − 4) = −8, â' = 1 + 0.4
        let next = grad_est_update(&s, 2.0, 4.0, &st);
        assert!((next.a_hat[0] - 1.4).abs() < 1e-15);

        let loss = |a: f64| (2.0 * a - 4.0f64).powi(2);
        let h = 1e-5;
        let fd = (loss(1.0 + h) - loss(1.0 - h)) / (2.0 * h);
        assert!((fd + 8.0).abs() < 1e-8);
    }

    #[test]
    fn zero_rate_freezes_and_projection_applies() {
        let mut s = linear_spec();
        let st = EstState {
            a_hat: vec![0.3],
            iota: 0.0,
        };
        assert_eq!(grad_est_update(&s, 1.0, 9.0, &st).a_hat, vec![0.3]);
        s.a_set = ConvexSet::interval(-1.0, 1.0);
        let st = EstState {
            a_hat: vec![0.9],
            iota: 1.0,
        };
        assert_eq!(grad_est_update(&s, 1.0, 9.0, &st).a_hat, vec![1.0]);
    }

    #[test]
    fn mismatch_examples() {
        let s = linear_spec();
        assert_eq!(mismatches(&s, 0.7, &[1.2], &[1.2]), (0.0, 0.0));
        let (e0, e1) = mismatches(&s, 3.0, &[1.5], &[1.0]);
        assert!((e0 - 1.5).abs() < 1e-15 && (e1 - 0.5).abs() < 1e-15);
        let (e0, e1) = mismatches(&s, 0.0, &[1.5], &[1.0]);
        assert_eq!(e0, 0.0);
        assert_eq!(e1, 0.5);
    }

    #[test]
    fn oracle_follows_schedule() {
        let mut s = linear_spec();
        s.schedule = ParamSchedule::PiecewiseConstant {
            switch_times: vec![5],
            values: vec![vec![1.0], vec![-1.0]],
        };
        assert_eq!(oracle_est(&s, 4), vec![1.0]);
        assert_eq!(oracle_est(&s, 5), vec![-1.0]);
        let e = Estimator::new(&EstKind::Oracle, &s);
        assert_eq!(e.current(&[-1.0]), vec![-1.0]);
    }

    #[test]
    fn converges_without_noise() {
        let s = linear_spec();
        let mut st = EstState {
            a_hat: vec![-2.0],
            iota: 0.2,
        };
        let a_star = [1.0];
        let mut last = f64::INFINITY;
        for t in 0..400 {
            let x = 1.0 + 0.5 * (t as f64 * 0.3).sin();
            let f = s.residual(x, &a_star).unwrap();
            last = (s.residual(x, &st.a_hat).unwrap() - f).powi(2);
            st = grad_est_update(&s, x, f, &st);
        }
        assert!(last < 1e-6, "loss {last}");
    }

    #[test]
    fn default_iota_shrinks_with_horizon() {
        let mut s = linear_spec();
        s.horizon = 2000;
        let short = default_iota(&s);
        s.horizon = 8000;
        let long = default_iota(&s);
        assert!((short / long - 2.0).abs() < 1e-12);
    }
}
