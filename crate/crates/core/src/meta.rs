//! The meta-framework loop, its exact-parameter replay and the perturbation
//! sequence `ζ_t` that maps one onto the other.
//!
//! Per step the loop runs: input `u_t = π(x_t, θ_t, f(x_t, â_t))`, cost,
//! policy update, true dynamics, residual observation, estimator update.
//! The disturbance sequence is drawn from its own substream before the run
//! starts, so the replay sees the identical `w_0, …, w_{T−1}`.

use crate::alg::{
    biased_ogd_update, gaps_buffered_update, mgaps_update, AlgKind, GapsBufferState, MgapsState,
};
use crate::derivatives::ghat_jacobians;
use crate::error::{Error, Result};
use crate::est::{mismatches, EstKind, Estimator};
use crate::metrics::surrogate_grad;
use crate::model::SystemSpec;
use crate::rng::{StreamRng, OBS_STREAM, W_STREAM};

/// Any state entry above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Exogenous sequences of one run: the true parameters and the disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub a_star: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

impl Environment {
    pub fn sample(spec: &SystemSpec, seed: u64) -> Self {
        let mut rng = StreamRng::substream(seed, W_STREAM);
        let w = (0..spec.horizon)
            .map(|_| spec.w_law.sample_scalar(&mut rng))
            .collect();
        Self {
            a_star: spec.schedule.sequence(spec.horizon),
            w,
        }
    }

    pub fn horizon(&self) -> usize {
        self.w.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: f64,
    /// Accumulator before this step's update.
    pub y: f64,
    pub theta: f64,
    pub a_hat: Vec<f64>,
    pub a_star: Vec<f64>,
    pub u: f64,
    pub f_tilde: f64,
    pub w: f64,
    pub cost: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// True estimator loss `ℓ_t = ε_t²`.
    pub est_loss: f64,
    pub g_approx: f64,
    pub zeta_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Joint state after the last step, `(x_T, y_T, θ_T)`.
    pub terminal: JointState,
    /// Steps where `|θ_{t+1} − θ_t|` exceeded the configured bound.
    pub slow_variation_violations: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.theta).collect()
    }

    /// `θ_1, …, θ_T`
    pub fn next_thetas(&self) -> Vec<f64> {
        self.steps
            .iter()
            .skip(1)
            .map(|s| s.theta)
            .chain(std::iter::once(self.terminal.theta))
            .take(self.steps.len())
            .collect()
    }
}

fn check_state(step: usize, values: &[f64]) -> Result<()> {
    for v in values {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::RunAbort {
                step,
                reason: format!("state diverged ({v})"),
            });
        }
    }
    Ok(())
}

enum AlgRuntime {
    Mgaps(MgapsState),
    Gaps(GapsBufferState),
    Ogd { eta: f64, bias: f64 },
}

/// Options that do not change the dynamics.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Bound `ε_θ` on `|θ_{t+1} − θ_t|`; violations are counted and logged.
    pub eps_theta: Option<f64>,
}

pub fn run_meta(spec: &SystemSpec, alg: &AlgKind, est: &EstKind, seed: u64) -> Result<TrajectoryRecord> {
    run_meta_with(spec, alg, est, seed, RunOptions::default())
}

pub fn run_meta_with(
    spec: &SystemSpec,
    alg: &AlgKind,
    est: &EstKind,
    seed: u64,
    opts: RunOptions,
) -> Result<TrajectoryRecord> {
    spec.validate()?;
    alg.validate()?;
    est.validate(spec)?;
    let env = Environment::sample(spec, seed);
    run_meta_env(spec, alg, est, seed, &env, opts)
}

/// Runs the loop against a given environment.
pub fn run_meta_env(
    spec: &SystemSpec,
    alg: &AlgKind,
    est: &EstKind,
    seed: u64,
    env: &Environment,
    opts: RunOptions,
) -> Result<TrajectoryRecord> {
    let horizon = env.horizon();
    let mut obs_rng = StreamRng::substream(seed, OBS_STREAM);
    let mut estimator = Estimator::new(est, spec);
    let mut runtime = match alg {
        AlgKind::Mgaps { eta } => AlgRuntime::Mgaps(MgapsState::new(*eta)),
        AlgKind::GapsBuffered { eta, buffer } => {
            AlgRuntime::Gaps(GapsBufferState::new(*buffer, *eta)?)
        }
        AlgKind::BiasedOgd { eta, bias } => AlgRuntime::Ogd {
            eta: *eta,
            bias: *bias,
        },
    };

    let mut x = spec.x0;
    let mut y = 0.0;
    let mut theta = spec.initial_theta();
    let mut steps = Vec::with_capacity(horizon);
    let mut violations = 0usize;

    for t in 0..horizon {
        let a_star = &env.a_star[t];
        let a_hat = estimator.current(a_star);
        let f_hat = spec.feature_map.dot(x, &a_hat);
        let u = spec.policy_input(x, theta, f_hat);
        let cost = spec.stage_cost(x, u, theta);
        let (eps0, eps1) = mismatches(spec, x, &a_hat, a_star);

        let gj = ghat_jacobians(spec, x, theta);
        let y_next = gj.d_x * y + gj.d_theta;
        let (theta_next, g_approx) = match &mut runtime {
            AlgRuntime::Mgaps(st) => {
                let out = mgaps_update(spec, x, theta, &a_hat, t, *st)?;
                *st = out.state_next;
                (out.theta_next, out.g_approx)
            }
            AlgRuntime::Gaps(st) => {
                let taken = std::mem::replace(st, GapsBufferState::new(1, 0.0)?);
                let out = gaps_buffered_update(spec, x, theta, &a_hat, t, taken)?;
                *st = out.state_next;
                (out.theta_next, out.g_approx)
            }
            AlgRuntime::Ogd { eta, bias } => {
                let grad = surrogate_grad(spec, theta, t, env)?;
                let b = if grad == 0.0 { 0.0 } else { -*bias * grad.signum() };
                let next = biased_ogd_update(&[theta], &[grad], &[b], *eta, &spec.theta_set)?;
                (next[0], grad + b)
            }
        };

        let x_next = spec.step_with(x, u, a_star, env.w[t]);
        let f_tilde = spec.observe_with(x, a_star, &mut obs_rng);
        estimator.update(spec, x, f_tilde);

        if let Some(bound) = opts.eps_theta {
            if (theta_next - theta).abs() > bound {
                violations += 1;
                log::warn!(
                    "step {t}: |θ_(t+1) − θ_t| = {:.3e} exceeds ε_θ = {bound:.3e}",
                    (theta_next - theta).abs()
                );
            }
        }

        steps.push(StepRecord {
            t,
            x,
            y,
            theta,
            a_hat,
            a_star: a_star.clone(),
            u,
            f_tilde,
            w: env.w[t],
            cost,
            eps0,
            eps1,
            est_loss: eps0 * eps0,
            g_approx,
            zeta_norm: None,
        });

        check_state(t, &[x_next, y_next, theta_next, g_approx])?;
        x = x_next;
        y = y_next;
        theta = theta_next;
    }

    Ok(TrajectoryRecord {
        seed,
        steps,
        terminal: JointState { x, y, theta },
        slow_variation_violations: violations,
    })
}

/// Exact-parameter replay `(x̃, ỹ)` of a policy-parameter sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Replay {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn replay_exact(spec: &SystemSpec, theta_seq: &[f64], seed: u64) -> Result<Replay> {
    let mut spec = spec.clone();
    spec.horizon = theta_seq.len();
    let env = Environment::sample(&spec, seed);
    replay_exact_env(&spec, theta_seq, &env)
}

/// Drives the true system with the cancelling policy under exact `a*_t`,
/// using the recorded `θ_t` and the environment's disturbances.
pub fn replay_exact_env(spec: &SystemSpec, theta_seq: &[f64], env: &Environment) -> Result<Replay> {
    if theta_seq.len() > env.horizon() {
        return Err(Error::RecordMismatch(format!(
            "theta sequence of length {} exceeds the environment horizon {}",
            theta_seq.len(),
            env.horizon()
        )));
    }
    let mut out = Replay {
        x: Vec::with_capacity(theta_seq.len()),
        y: Vec::with_capacity(theta_seq.len()),
    };
    let (mut x, mut y) = (spec.x0, 0.0);
    for (t, &theta) in theta_seq.iter().enumerate() {
        out.x.push(x);
        out.y.push(y);
        let a_star = &env.a_star[t];
        let u = spec.policy_input(x, theta, spec.feature_map.dot(x, a_star));
        let gj = ghat_jacobians(spec, x, theta);
        let x_next = spec.step_with(x, u, a_star, env.w[t]);
        let y_next = gj.d_x * y + gj.d_theta;
        check_state(t, &[x_next, y_next])?;
        x = x_next;
        y = y_next;
    }
    Ok(out)
}

/// `ζ_t = θ_{t+1} − q^θ_t(x̃_t, ỹ_t, θ_t, a*_t)` where `q^θ_t` is one M-GAPS
/// parameter step with step size `eta` at the replayed state.
pub fn extract_zeta(
    spec: &SystemSpec,
    eta: f64,
    record: &TrajectoryRecord,
    replay: &Replay,
) -> Result<Vec<f64>> {
    if replay.x.len() != record.len() || replay.y.len() != record.len() {
        return Err(Error::RecordMismatch(format!(
            "record has {} steps but replay has {}",
            record.len(),
            replay.x.len()
        )));
    }
    let next = record.next_thetas();
    record
        .steps
        .iter()
        .zip(&next)
        .map(|(s, &theta_next)| {
            let st = MgapsState {
                y: replay.y[s.t],
                eta,
            };
            let exact = mgaps_update(spec, replay.x[s.t], s.theta, &s.a_star, s.t, st)?;
            Ok(theta_next - exact.theta_next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_spec, NoiseLaw, ParamSchedule};

    fn noisy_spec() -> SystemSpec {
        let mut s = linear_spec();
        s.theta_set = crate::model::ConvexSet::interval(0.5, 3.0);
        s.w_law = NoiseLaw::uniform(0.1);
        s.obs_law = NoiseLaw::uniform(0.05);
        s.horizon = 300;
        s
    }

    #[test]
    fn oracle_run_has_zero_mismatch_and_zeta() {
        let s = noisy_spec();
        let alg = AlgKind::Mgaps { eta: 0.05 };
        let rec = run_meta(&s, &alg, &EstKind::Oracle, 4).unwrap();
        assert!(rec.steps.iter().all(|r| r.eps0 == 0.0 && r.eps1 == 0.0));
        let rep = replay_exact(&s, &rec.thetas(), 4).unwrap();
        for r in &rec.steps {
            assert_eq!(rep.x[r.t], r.x);
            assert_eq!(rep.y[r.t], r.y);
        }
        let zeta = extract_zeta(&s, 0.05, &rec, &rep).unwrap();
        assert!(zeta.iter().all(|z| *z == 0.0));
    }

    #[test]
    fn learning_disabled_rollout_is_closed_loop() {
        let mut s = linear_spec();
        s.horizon = 50;
        let rec = run_meta(&s, &AlgKind::Mgaps { eta: 0.0 }, &EstKind::Oracle, 1).unwrap();
        let theta0 = rec.steps[0].theta;
        let mut x = s.x0;
        for r in &rec.steps {
            assert_eq!(r.theta, theta0);
            assert!((r.x - x).abs() < 1e-12);
            x += s.delta * s.psi(x, theta0);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let s = noisy_spec();
        let est = EstKind::Gradient {
            iota: Some(0.05),
            a_hat0: None,
        };
        let alg = AlgKind::Mgaps { eta: 0.02 };
        assert_eq!(run_meta(&s, &alg, &est, 9).unwrap(), run_meta(&s, &alg, &est, 9).unwrap());
    }

    #[test]
    fn observation_noise_does_not_touch_disturbance() {
        let s = noisy_spec();
        let mut s2 = s.clone();
        s2.obs_law = NoiseLaw::uniform(0.3);
        let alg = AlgKind::Mgaps { eta: 0.02 };
        let est = EstKind::Gradient {
            iota: Some(0.05),
            a_hat0: None,
        };
        let a = run_meta(&s, &alg, &est, 2).unwrap();
        let b = run_meta(&s2, &alg, &est, 2).unwrap();
        let wa: Vec<f64> = a.steps.iter().map(|r| r.w).collect();
        let wb: Vec<f64> = b.steps.iter().map(|r| r.w).collect();
        assert_eq!(wa, wb);
        assert_ne!(a.steps.iter().map(|r| r.f_tilde).collect::<Vec<_>>(),
                   b.steps.iter().map(|r| r.f_tilde).collect::<Vec<_>>());
    }

    #[test]
    fn frozen_zero_step_size_gives_zero_zeta() {
        let s = noisy_spec();
        let rec = run_meta(&s, &AlgKind::Mgaps { eta: 0.0 }, &EstKind::Frozen { offset: 0.3 }, 3).unwrap();
        let rep = replay_exact(&s, &rec.thetas(), 3).unwrap();
        let zeta = extract_zeta(&s, 0.0, &rec, &rep).unwrap();
        assert!(zeta.iter().all(|z| *z == 0.0));
    }

    #[test]
    fn empty_horizon() {
        let mut s = linear_spec();
        s.horizon = 0;
        let rec = run_meta(&s, &AlgKind::Mgaps { eta: 0.1 }, &EstKind::Oracle, 0).unwrap();
        assert!(rec.is_empty());
        let rep = replay_exact(&s, &[], 0).unwrap();
        assert!(rep.x.is_empty() && rep.y.is_empty());
    }

    #[test]
    fn divergence_aborts_with_step() {
        let mut s = linear_spec();
        s.theta_set = crate::model::ConvexSet::interval(-50.0, -40.0);
        s.cost.theta_bar = -45.0;
        s.horizon = 10_000;
        match run_meta(&s, &AlgKind::Mgaps { eta: 0.0 }, &EstKind::Oracle, 0) {
            Err(Error::RunAbort { step, .. }) => assert!(step < 10_000),
            other => panic!("expected divergence abort, got {:?}", other.map(|r| r.len())),
        }
    }

    #[test]
    fn piecewise_oracle_tracks_switches() {
        let mut s = noisy_spec();
        s.schedule = ParamSchedule::PiecewiseConstant {
            switch_times: vec![100],
            values: vec![vec![1.0], vec![-1.0]],
        };
        let rec = run_meta(&s, &AlgKind::Mgaps { eta: 0.01 }, &EstKind::Oracle, 0).unwrap();
        assert_eq!(rec.steps[99].a_hat, vec![1.0]);
        assert_eq!(rec.steps[100].a_hat, vec![-1.0]);
    }
}
