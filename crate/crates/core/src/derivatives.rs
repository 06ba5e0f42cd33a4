//! Analytic Jacobians of the estimated one-step dynamics `ĝ_{t+1|t}` and the
//! estimated stage cost `ĥ_{t|t}`, plus a central-difference oracle.
//!
//! With the cancelling policy the residual estimate drops out of `ĝ`:
//! `ĝ(x, θ) = φ(x, ψ(x, θ))`, so `∂ĝ/∂x` carries no `∇_x f(x, â)` term. The
//! cost still sees `â` through the input `u = −f(x, â) + ψ(x, θ)`.

use crate::error::{Error, Result};
use crate::model::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhatJac {
    pub d_x: f64,
    pub d_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhatGrad {
    pub d_x: f64,
    pub d_theta: f64,
}

/// `ĝ(x, θ) = g(x, π(x, θ, f(x, â)), f(x, â))`, evaluated without using the
/// cancellation.
pub fn ghat(spec: &SystemSpec, x: f64, theta: f64, a_hat: &[f64]) -> f64 {
    let f_hat = spec.feature_map.dot(x, a_hat);
    let u = spec.policy_input(x, theta, f_hat);
    spec.nominal(x, u + f_hat)
}

/// `ĥ(x, θ) = h(x, π(x, θ, f(x, â)), θ)`
pub fn hhat(spec: &SystemSpec, x: f64, theta: f64, a_hat: &[f64]) -> f64 {
    let f_hat = spec.feature_map.dot(x, a_hat);
    let u = spec.policy_input(x, theta, f_hat);
    spec.stage_cost(x, u, theta)
}

#[inline]
pub fn ghat_jacobians(spec: &SystemSpec, x: f64, theta: f64) -> GhatJac {
    let (phi_x, phi_v) = spec.nominal_partials();
    let (psi_x, psi_theta) = spec.psi_partials(x, theta);
    GhatJac {
        d_x: phi_x + phi_v * psi_x,
        d_theta: phi_v * psi_theta,
    }
}

/// Gradients of `ĥ` given the residual estimate `f(x, â)` and its
/// x-derivative.
#[inline]
pub fn hhat_gradients_from(
    spec: &SystemSpec,
    x: f64,
    theta: f64,
    f_hat: f64,
    f_hat_dx: f64,
) -> HhatGrad {
    let u = spec.policy_input(x, theta, f_hat);
    let (h_x, h_u, h_theta) = spec.cost_partials(x, u, theta);
    let (psi_x, psi_theta) = spec.psi_partials(x, theta);
    HhatGrad {
        d_x: h_x + h_u * (psi_x - f_hat_dx),
        d_theta: h_u * psi_theta + h_theta,
    }
}

#[inline]
pub fn hhat_gradients(spec: &SystemSpec, x: f64, theta: f64, a_hat: &[f64]) -> HhatGrad {
    let f_hat = spec.feature_map.dot(x, a_hat);
    let f_hat_dx = spec.feature_map.dot_dx(x, a_hat);
    hhat_gradients_from(spec, x, theta, f_hat, f_hat_dx)
}

/// Central-difference Jacobian, one row per output, one column per input.
pub fn fd_jacobian<F>(func: F, point: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::OracleFailure(format!("step size {h} must be positive")));
    }
    let base = func(point);
    if !crate::vecops::all_finite(&base) {
        return Err(Error::OracleFailure("function not finite at the point".into()));
    }
    let mut jac = vec![vec![0.0; point.len()]; base.len()];
    let mut probe = point.to_vec();
    for col in 0..point.len() {
        probe[col] = point[col] + h;
        let plus = func(&probe);
        probe[col] = point[col] - h;
        let minus = func(&probe);
        probe[col] = point[col];
        if plus.len() != base.len() || minus.len() != base.len() {
            return Err(Error::OracleFailure("output dimension changed".into()));
        }
        for (row, (p, m)) in plus.iter().zip(&minus).enumerate() {
            let d = (p - m) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::OracleFailure(format!(
                    "non-finite difference in column {col}"
                )));
            }
            jac[row][col] = d;
        }
    }
    Ok(jac)
}

/// `|a − b| / max(1, |a|)`
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_spec, CostWeights, FeatureMap};

    #[test]
    fn ghat_example_values() {
        let s = linear_spec();
        let j = ghat_jacobians(&s, 1.0, 0.5);
        assert!((j.d_x - 0.95).abs() < 1e-15);
        assert!((j.d_theta + 0.1).abs() < 1e-15);
        let j0 = ghat_jacobians(&s, 1.7, 0.0);
        assert_eq!(j0.d_x, 1.0);
        assert!((j0.d_theta + 0.17).abs() < 1e-15);
        assert_eq!(ghat_jacobians(&s, 0.0, 0.8).d_theta, 0.0);
    }

    #[test]
    fn ghat_example_matches_fd() {
        let s = linear_spec();
        let a = [0.7];
        let jx = fd_jacobian(|p| vec![ghat(&s, p[0], 0.5, &a)], &[1.0], 1e-5).unwrap();
        let jt = fd_jacobian(|p| vec![ghat(&s, 1.0, p[0], &a)], &[0.5], 1e-5).unwrap();
        assert!((jx[0][0] - 0.95).abs() < 1e-9);
        assert!((jt[0][0] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn hhat_example_values() {
        let mut s = linear_spec();
        s.cost = CostWeights {
            q: 1.0,
            r: 1.0,
            lambda: 0.0,
            theta_bar: 0.0,
        };
        // â = 0 so φ(x)·â = 0, u = −0.5, ∂ĥ/∂θ = 2u·(−x) = 1
        let g = hhat_gradients(&s, 1.0, 0.5, &[0.0]);
        assert!((g.d_theta - 1.0).abs() < 1e-15);
        let fd = fd_jacobian(|p| vec![hhat(&s, 1.0, p[0], &[0.0])], &[0.5], 1e-5).unwrap();
        assert!((fd[0][0] - 1.0).abs() < 1e-9);

        s.cost = CostWeights {
            q: 3.0,
            r: 0.0,
            lambda: 0.0,
            theta_bar: 0.0,
        };
        assert_eq!(hhat_gradients(&s, 1.3, 0.4, &[2.0]).d_theta, 0.0);

        s.cost = CostWeights {
            q: 1.0,
            r: 1.0,
            lambda: 1.0,
            theta_bar: 0.0,
        };
        assert!((hhat_gradients(&s, 0.0, 1.0, &[0.3]).d_theta - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hhat_dx_includes_residual_gradient() {
        let mut s = linear_spec();
        s.feature_map = FeatureMap::Tanh { scales: vec![2.0] };
        let a = [0.6];
        let (x, th) = (0.4, 0.9);
        let g = hhat_gradients(&s, x, th, &a);
        let fd = fd_jacobian(|p| vec![hhat(&s, p[0], th, &a)], &[x], 1e-5).unwrap();
        assert!(rel_err(g.d_x, fd[0][0]) < 1e-8);
    }

    #[test]
    fn fd_identity_and_square() {
        let j = fd_jacobian(|p| p.to_vec(), &[1.0, -2.0, 0.5], 1e-5).unwrap();
        for (i, row) in j.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-10);
            }
        }
        let sq = fd_jacobian(|p| vec![p[0] * p[0]], &[3.0], 1e-5).unwrap();
        assert!((sq[0][0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn fd_rejects_non_finite() {
        let r = fd_jacobian(|p| vec![1.0 / (p[0] - 1e-6)], &[0.0], 1e-6);
        assert!(r.is_err());
        assert!(fd_jacobian(|p| p.to_vec(), &[0.0], 0.0).is_err());
    }

    #[test]
    fn ghat_with_true_parameter_is_noiseless_step() {
        let s = linear_spec();
        let a_star = [1.0];
        for &(x, th) in &[(1.0, 0.5), (-0.3, 1.9), (2.0, 0.0)] {
            let u = s.policy_input(x, th, s.residual(x, &a_star).unwrap());
            assert_eq!(ghat(&s, x, th, &a_star), s.step_with(x, u, &a_star, 0.0));
        }
    }
}
