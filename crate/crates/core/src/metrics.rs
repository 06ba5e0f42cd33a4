//! Evaluation quantities: surrogate costs and gradients, projected gradients,
//! local and static regret, gradient bias, trajectory distances, variation
//! intensities and the gradient-error bound.
//!
//! The surrogate `F_t(θ)` is pathwise: the fixed-θ rollout uses the exact
//! `a*_τ` and the realized disturbances `w_τ` of the run it is compared with.
//! Under the cancelling policy the rollout is `x̃' = x̃ + Δψ(x̃, θ) + w`.

use serde::{Deserialize, Serialize};

use crate::derivatives::{ghat_jacobians, hhat_gradients};
use crate::error::{Error, Result};
use crate::meta::{Environment, Replay, TrajectoryRecord, DIVERGENCE_LIMIT};
use crate::model::{ConvexSet, SystemSpec};

fn rollout_abort(t: usize, x: f64) -> Error {
    Error::RunAbort {
        step: t,
        reason: format!("surrogate rollout diverged ({x})"),
    }
}

/// Zero-disturbance rollouts decay into subnormals, which are slow; values
/// below the smallest normal are flushed to zero.
#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        v
    }
}

#[inline]
fn diverged(x: f64) -> bool {
    !x.is_finite() || x.abs() > DIVERGENCE_LIMIT
}

fn check_step(t: usize, env: &Environment) -> Result<()> {
    if t >= env.horizon() {
        return Err(Error::RecordMismatch(format!(
            "step {t} is outside the environment horizon {}",
            env.horizon()
        )));
    }
    Ok(())
}

/// Fixed-θ rollout state `x̃_t(θ)` and its sensitivity `ỹ_t(θ)`.
fn rollout_to(spec: &SystemSpec, theta: f64, t: usize, env: &Environment) -> Result<(f64, f64)> {
    // ∂ĝ/∂x = 1 − Δθ does not depend on x.
    let gj_dx = ghat_jacobians(spec, 0.0, theta).d_x;
    let (mut x, mut y) = (spec.x0, 0.0);
    for &w in &env.w[..t] {
        let d_theta = -spec.delta * x;
        x = flush(x + spec.delta * spec.psi(x, theta) + w);
        y = flush(gj_dx * y + d_theta);
    }
    if diverged(x) || !y.is_finite() {
        return Err(rollout_abort(t, x));
    }
    Ok((x, y))
}

/// `F_t(θ) = h(x̃_t, ũ_t, θ)`
pub fn surrogate_cost(spec: &SystemSpec, theta: f64, t: usize, env: &Environment) -> Result<f64> {
    check_step(t, env)?;
    let (x, _) = rollout_to(spec, theta, t, env)?;
    let u = spec.policy_input(x, theta, spec.feature_map.dot(x, &env.a_star[t]));
    Ok(spec.stage_cost(x, u, theta))
}

/// `F_0(θ), …, F_{T−1}(θ)` from a single rollout.
pub fn surrogate_costs(spec: &SystemSpec, theta: f64, env: &Environment) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(env.horizon());
    let mut x = spec.x0;
    for (t, &w) in env.w.iter().enumerate() {
        if diverged(x) {
            return Err(rollout_abort(t, x));
        }
        let u = spec.policy_input(x, theta, spec.feature_map.dot(x, &env.a_star[t]));
        out.push(spec.stage_cost(x, u, theta));
        x = flush(x + spec.delta * spec.psi(x, theta) + w);
    }
    Ok(out)
}

/// `∇F_t(θ)` by the M-GAPS accumulator recursion along the fixed-θ rollout.
pub fn surrogate_grad(spec: &SystemSpec, theta: f64, t: usize, env: &Environment) -> Result<f64> {
    check_step(t, env)?;
    let (x, y) = rollout_to(spec, theta, t, env)?;
    let hh = hhat_gradients(spec, x, theta, &env.a_star[t]);
    Ok(hh.d_x * y + hh.d_theta)
}

/// `∇F_t(θ_t)` for every `t`, one rollout per step.
pub fn surrogate_grads_along(spec: &SystemSpec, thetas: &[f64], env: &Environment) -> Result<Vec<f64>> {
    thetas
        .iter()
        .enumerate()
        .map(|(t, &theta)| surrogate_grad(spec, theta, t, env))
        .collect()
}

/// `(θ − Π_Θ(θ − η g)) / η`
pub fn projected_gradient(theta: &[f64], grad: &[f64], eta: f64, set: &ConvexSet) -> Result<Vec<f64>> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidSpec("projected gradient needs eta > 0".into()));
    }
    if grad.len() != theta.len() {
        return Err(Error::InvalidSpec("gradient/parameter dimension mismatch".into()));
    }
    let step: Vec<f64> = theta.iter().zip(grad).map(|(th, g)| th - eta * g).collect();
    let proj = set.project(&step)?;
    Ok(theta.iter().zip(&proj).map(|(th, p)| (th - p) / eta).collect())
}

#[inline]
pub fn projected_gradient_scalar(theta: f64, grad: f64, eta: f64, set: &ConvexSet) -> f64 {
    (theta - set.project_scalar(theta - eta * grad)) / eta
}

/// Per-step `‖∇_{Θ,η}F_t(θ_t)‖²` given the surrogate gradients.
pub fn projected_gradient_sq(spec: &SystemSpec, thetas: &[f64], grads: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidSpec("local regret needs eta > 0".into()));
    }
    Ok(thetas
        .iter()
        .zip(grads)
        .map(|(&th, &g)| projected_gradient_scalar(th, g, eta, &spec.theta_set).powi(2))
        .collect())
}

/// `R_η^L(T) = Σ_t ‖∇_{Θ,η}F_t(θ_t)‖²`
pub fn local_regret(spec: &SystemSpec, thetas: &[f64], eta: f64, env: &Environment) -> Result<f64> {
    let grads = surrogate_grads_along(spec, thetas, env)?;
    Ok(projected_gradient_sq(spec, thetas, &grads, eta)?.iter().sum())
}

/// Exogenous sequences as recorded by a run.
pub fn environment_of(record: &TrajectoryRecord) -> Environment {
    Environment {
        a_star: record.steps.iter().map(|s| s.a_star.clone()).collect(),
        w: record.steps.iter().map(|s| s.w).collect(),
    }
}

/// `‖G_t − ∇F_t(θ_t)‖`
pub fn gradient_bias(spec: &SystemSpec, record: &TrajectoryRecord, t: usize) -> Result<f64> {
    let step = record
        .steps
        .get(t)
        .ok_or_else(|| Error::RecordMismatch(format!("step {t} not in record")))?;
    let env = environment_of(record);
    Ok((step.g_approx - surrogate_grad(spec, step.theta, t, &env)?).abs())
}

/// Bias series for all steps, given `∇F_t(θ_t)`.
pub fn gradient_bias_series(record: &TrajectoryRecord, grads: &[f64]) -> Vec<f64> {
    record
        .steps
        .iter()
        .zip(grads)
        .map(|(s, g)| (s.g_approx - g).abs())
        .collect()
}

/// `Σ_t (|x_t − x̃_t| + |y_t − ỹ_t|)`
pub fn trajectory_distance(record: &TrajectoryRecord, replay: &Replay) -> Result<f64> {
    if replay.x.len() != record.len() || replay.y.len() != record.len() {
        return Err(Error::RecordMismatch(format!(
            "record has {} steps but replay has {}",
            record.len(),
            replay.x.len()
        )));
    }
    Ok(record
        .steps
        .iter()
        .map(|s| (s.x - replay.x[s.t]).abs() + (s.y - replay.y[s.t]).abs())
        .sum())
}

/// `Σ_t ‖a*_{t+1} − a*_t‖` over the configured horizon.
pub fn path_length(spec: &SystemSpec) -> f64 {
    spec.schedule.path_length(spec.horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationIntensities {
    /// Grid approximation of the supremum differences.
    pub v_sys: f64,
    pub v_w: f64,
}

/// `V_w = Σ |w_t − w_{t−1}|`; `V_sys` sums the sup over a state grid of the
/// change in the folded dynamics `Δ |f(x, a*_t) − f(x, a*_{t−1})|`. `ψ` and
/// `h` do not depend on `t`.
pub fn variation_intensities(spec: &SystemSpec, env: &Environment, grid_points: usize) -> VariationIntensities {
    let v_w = env.w.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    let grid: Vec<f64> = uniform_grid(-spec.state_bound, spec.state_bound, grid_points.max(2));
    let mut v_sys = 0.0;
    for pair in env.a_star.windows(2) {
        if pair[0] == pair[1] {
            continue;
        }
        let diff: Vec<f64> = pair[1].iter().zip(&pair[0]).map(|(a, b)| a - b).collect();
        let sup = grid
            .iter()
            .map(|&x| spec.feature_map.dot(x, &diff).abs())
            .fold(0.0, f64::max);
        v_sys += spec.delta * sup;
    }
    VariationIntensities { v_sys, v_w }
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
}

fn theta_bounds(set: &ConvexSet) -> Option<(f64, f64)> {
    let (lo, hi) = set.bounding_box()?;
    (lo.len() == 1 && lo[0].is_finite() && hi[0].is_finite()).then(|| (lo[0], hi[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticRegret {
    pub value: f64,
    pub argmin: f64,
    pub total_cost: f64,
    pub min_surrogate_total: f64,
    /// Spacing of the θ grid; the minimum is exact only up to this resolution.
    pub grid_spacing: f64,
}

/// `R^S(T) = Σ c_t − min_θ Σ F_t(θ)` with the minimum over a uniform grid on `Θ`.
pub fn static_regret(spec: &SystemSpec, record: &TrajectoryRecord, grid_resolution: usize) -> Result<StaticRegret> {
    let env = environment_of(record);
    static_regret_over(spec, record, &env, grid_resolution)
}

fn static_regret_over(
    spec: &SystemSpec,
    record: &TrajectoryRecord,
    env: &Environment,
    grid_resolution: usize,
) -> Result<StaticRegret> {
    let total_cost: f64 = record.steps.iter().map(|s| s.cost).sum();
    let (lo, hi) = theta_bounds(&spec.theta_set).ok_or_else(|| {
        Error::InvalidSpec("static regret needs a bounded one-dimensional theta_set".into())
    })?;
    let n = grid_resolution.max(1);
    let grid = uniform_grid(lo, hi, n);
    let spacing = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let mut best = (f64::INFINITY, lo);
    for &theta in &grid {
        let total: f64 = surrogate_costs(spec, theta, env)?.iter().sum();
        if total < best.0 {
            best = (total, theta);
        }
    }
    if record.is_empty() {
        best.0 = 0.0;
    }
    Ok(StaticRegret {
        value: total_cost - best.0,
        argmin: best.1,
        total_cost,
        min_surrogate_total: best.0,
        grid_spacing: spacing,
    })
}

/// `(2k/σ̲)(1 + γ_e + β_e γ_e) ε̄³ T + 2k γ_e² ε̄² T`
pub fn theorem_grad_error_rhs(
    k: f64,
    sigma_lb: f64,
    eps_bar: f64,
    beta_e: f64,
    gamma_e: f64,
    horizon: usize,
) -> Result<f64> {
    if !(sigma_lb.is_finite() && sigma_lb > 0.0) {
        return Err(Error::InvalidSpec("sigma lower bound must be positive".into()));
    }
    let t = horizon as f64;
    Ok(2.0 * k / sigma_lb * (1.0 + gamma_e + beta_e * gamma_e) * eps_bar.powi(3) * t
        + 2.0 * k * gamma_e * gamma_e * eps_bar * eps_bar * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub k: f64,
    pub sigma_lb: f64,
    pub eps_bar: f64,
    pub beta_e: f64,
    pub gamma_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    /// Step size for projected gradients and `ζ_t`.
    pub eta: f64,
    /// θ grid for static regret; `None` skips it.
    pub static_grid: Option<usize>,
    pub vsys_grid: usize,
    pub theorem: Option<TheoremParams>,
}

impl ReportOptions {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            static_grid: Some(201),
            vsys_grid: 101,
            theorem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon: usize,
    pub local_regret: f64,
    pub proj_grad_sq: Vec<f64>,
    pub sum_eps0: f64,
    pub sum_eps1: f64,
    pub sum_eps0_sq: f64,
    pub sum_eps1_sq: f64,
    pub sum_zeta_norm: f64,
    pub traj_distance: f64,
    pub path_length: f64,
    pub v_w: f64,
    /// Grid approximation.
    pub v_sys: f64,
    pub static_regret: Option<StaticRegret>,
    pub gradient_bias: Vec<f64>,
    pub est_loss_sum: f64,
    pub theorem_bound_rhs: Option<f64>,
    pub total_cost: f64,
}

/// All metrics of one run. `zeta` is the perturbation sequence from
/// [`crate::meta::extract_zeta`]; `replay` the exact-parameter replay.
pub fn compute_report(
    spec: &SystemSpec,
    record: &TrajectoryRecord,
    replay: &Replay,
    zeta: &[f64],
    opts: &ReportOptions,
) -> Result<MetricsReport> {
    if zeta.len() != record.len() {
        return Err(Error::RecordMismatch(format!(
            "record has {} steps but zeta has {}",
            record.len(),
            zeta.len()
        )));
    }
    let env = environment_of(record);
    let thetas = record.thetas();
    let grads = surrogate_grads_along(spec, &thetas, &env)?;
    let proj_grad_sq = projected_gradient_sq(spec, &thetas, &grads, opts.eta)?;
    let vi = variation_intensities(spec, &env, opts.vsys_grid);
    let static_regret = match opts.static_grid {
        Some(n) if theta_bounds(&spec.theta_set).is_some() => Some(static_regret_over(spec, record, &env, n)?),
        _ => None,
    };
    let theorem_bound_rhs = match opts.theorem {
        Some(p) => Some(theorem_grad_error_rhs(
            p.k,
            p.sigma_lb,
            p.eps_bar,
            p.beta_e,
            p.gamma_e,
            record.len(),
        )?),
        None => None,
    };
    let sum = |f: fn(&crate::meta::StepRecord) -> f64| record.steps.iter().map(f).sum::<f64>();
    let mut plen = 0.0;
    for pair in env.a_star.windows(2) {
        plen += crate::vecops::dist(&pair[1], &pair[0]);
    }
    Ok(MetricsReport {
        horizon: record.len(),
        local_regret: proj_grad_sq.iter().sum(),
        proj_grad_sq,
        sum_eps0: sum(|s| s.eps0),
        sum_eps1: sum(|s| s.eps1),
        sum_eps0_sq: sum(|s| s.eps0 * s.eps0),
        sum_eps1_sq: sum(|s| s.eps1 * s.eps1),
        sum_zeta_norm: zeta.iter().map(|z| z.abs()).sum(),
        traj_distance: trajectory_distance(record, replay)?,
        path_length: plen,
        v_w: vi.v_w,
        v_sys: vi.v_sys,
        static_regret,
        gradient_bias: gradient_bias_series(record, &grads),
        est_loss_sum: sum(|s| s.est_loss),
        theorem_bound_rhs,
        total_cost: sum(|s| s.cost),
    })
}
