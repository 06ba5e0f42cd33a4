//! Online policy optimizers.
//!
//! * M-GAPS keeps one accumulator `y_t = ∂x_t/∂θ` along the realized
//!   trajectory and forms `G_t = ∂ĥ/∂x · y_t + ∂ĥ/∂θ`.
//! * Buffered GAPS forms the same chain-rule sum from the last `B` stored
//!   Jacobians instead of an accumulator.
//! * Biased OGD steps along a supplied gradient plus an injected bias.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::derivatives::{ghat_jacobians, hhat_gradients, GhatJac};
use crate::error::{Error, Result};
use crate::model::{ConvexSet, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgapsState {
    /// `∂x_t/∂θ` accumulated along the realized trajectory.
    pub y: f64,
    pub eta: f64,
}

impl MgapsState {
    pub fn new(eta: f64) -> Self {
        Self { y: 0.0, eta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferEntry {
    pub jac: GhatJac,
    pub x: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapsBufferState {
    /// Oldest entry first.
    pub buffer: VecDeque<BufferEntry>,
    pub capacity: usize,
    pub eta: f64,
}

impl GapsBufferState {
    pub fn new(capacity: usize, eta: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidSpec("GAPS buffer length must be at least 1".into()));
        }
        Ok(Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            eta,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgStepOut<S> {
    pub theta_next: f64,
    /// The gradient estimate the step used.
    pub g_approx: f64,
    pub state_next: S,
}

fn check_gradient(g: f64, t: usize) -> Result<()> {
    if g.is_finite() {
        Ok(())
    } else {
        Err(Error::RunAbort {
            step: t,
            reason: format!("non-finite policy gradient {g}"),
        })
    }
}

/// One M-GAPS step. `G_t` uses the accumulator before it is advanced.
pub fn mgaps_update(
    spec: &SystemSpec,
    x: f64,
    theta: f64,
    a_hat: &[f64],
    t: usize,
    st: MgapsState,
) -> Result<AlgStepOut<MgapsState>> {
    let hh = hhat_gradients(spec, x, theta, a_hat);
    let g = hh.d_x * st.y + hh.d_theta;
    check_gradient(g, t)?;
    let gj = ghat_jacobians(spec, x, theta);
    let y_next = gj.d_x * st.y + gj.d_theta;
    Ok(AlgStepOut {
        theta_next: spec.theta_set.project_scalar(theta - st.eta * g),
        g_approx: g,
        state_next: MgapsState {
            y: y_next,
            eta: st.eta,
        },
    })
}

/// Truncated chain-rule gradient
/// `G'_t = ∂ĥ_t/∂θ + Σ_{τ=t−B}^{t−1} ∂ĥ_t/∂x · (Π_{s=τ+1}^{t−1} ∂ĝ_s/∂x) · ∂ĝ_τ/∂θ`.
pub fn gaps_gradient(spec: &SystemSpec, x: f64, theta: f64, a_hat: &[f64], buffer: &VecDeque<BufferEntry>) -> f64 {
    let hh = hhat_gradients(spec, x, theta, a_hat);
    let mut g = hh.d_theta;
    let mut carry = hh.d_x;
    for entry in buffer.iter().rev() {
        g += carry * entry.jac.d_theta;
        carry *= entry.jac.d_x;
    }
    g
}

pub fn gaps_buffered_update(
    spec: &SystemSpec,
    x: f64,
    theta: f64,
    a_hat: &[f64],
    t: usize,
    mut st: GapsBufferState,
) -> Result<AlgStepOut<GapsBufferState>> {
    let g = gaps_gradient(spec, x, theta, a_hat, &st.buffer);
    check_gradient(g, t)?;
    st.buffer.push_back(BufferEntry {
        jac: ghat_jacobians(spec, x, theta),
        x,
        theta,
    });
    while st.buffer.len() > st.capacity {
        st.buffer.pop_front();
    }
    Ok(AlgStepOut {
        theta_next: spec.theta_set.project_scalar(theta - st.eta * g),
        g_approx: g,
        state_next: st,
    })
}

/// `Π(θ − η (grad + bias))`
pub fn biased_ogd_update(
    theta: &[f64],
    grad: &[f64],
    bias: &[f64],
    eta: f64,
    set: &ConvexSet,
) -> Result<Vec<f64>> {
    if grad.len() != theta.len() || bias.len() != theta.len() {
        return Err(Error::InvalidSpec("gradient/bias dimension mismatch".into()));
    }
    let step: Vec<f64> = theta
        .iter()
        .zip(grad.iter().zip(bias))
        .map(|(th, (g, b))| th - eta * (g + b))
        .collect();
    set.project(&step)
}

/// Optimizer selection and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgKind {
    Mgaps {
        eta: f64,
    },
    GapsBuffered {
        eta: f64,
        buffer: usize,
    },
    /// OGD on exact surrogate gradients with an injected bias of norm `bias`
    /// that opposes the descent direction.
    BiasedOgd {
        eta: f64,
        bias: f64,
    },
}

impl AlgKind {
    pub fn eta(&self) -> f64 {
        match self {
            AlgKind::Mgaps { eta } | AlgKind::GapsBuffered { eta, .. } | AlgKind::BiasedOgd { eta, .. } => *eta,
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            AlgKind::Mgaps { eta: e }
            | AlgKind::GapsBuffered { eta: e, .. }
            | AlgKind::BiasedOgd { eta: e, .. } => *e = eta,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta();
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidSpec("eta must be finite and nonnegative".into()));
        }
        match self {
            AlgKind::GapsBuffered { buffer, .. } if *buffer == 0 => {
                Err(Error::InvalidSpec("GAPS buffer length must be at least 1".into()))
            }
            AlgKind::BiasedOgd { bias, .. } if !(bias.is_finite() && *bias >= 0.0) => {
                Err(Error::InvalidSpec("bias must be finite and nonnegative".into()))
            }
            _ => Ok(()),
        }
    }
}
