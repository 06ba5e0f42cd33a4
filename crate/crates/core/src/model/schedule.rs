//! True-parameter schedules `a*_t`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::sets::ConvexSet;
use crate::vecops;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSchedule {
    Constant {
        value: Vec<f64>,
    },
    /// `values[i]` holds from `switch_times[i-1]` (inclusive) until the next
    /// switch; `values[0]` holds from step 0.
    PiecewiseConstant {
        switch_times: Vec<usize>,
        values: Vec<Vec<f64>>,
    },
    /// `base + amplitude * sin(2π t / period)`, elementwise.
    Sinusoid {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        period: f64,
    },
}

impl ParamSchedule {
    pub fn dim(&self) -> usize {
        match self {
            ParamSchedule::Constant { value } => value.len(),
            ParamSchedule::PiecewiseConstant { values, .. } => {
                values.first().map_or(0, |v| v.len())
            }
            ParamSchedule::Sinusoid { base, .. } => base.len(),
        }
    }

    /// Checks shapes and that every value the schedule can take lies in `set`.
    pub fn validate(&self, set: &ConvexSet) -> Result<()> {
        let p = self.dim();
        if p == 0 {
            return Err(invalid("schedule has zero dimension"));
        }
        if p != set.dim() {
            return Err(invalid(format!(
                "schedule dimension {p} does not match parameter set dimension {}",
                set.dim()
            )));
        }
        match self {
            ParamSchedule::Constant { value } => {
                if !set.contains(value, 1e-12) {
                    return Err(invalid("constant schedule value outside the parameter set"));
                }
            }
            ParamSchedule::PiecewiseConstant {
                switch_times,
                values,
            } => {
                if values.len() != switch_times.len() + 1 {
                    return Err(invalid(
                        "piecewise schedule needs exactly one more value than switch times",
                    ));
                }
                if switch_times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("switch times must be strictly increasing"));
                }
                for v in values {
                    if v.len() != p || !set.contains(v, 1e-12) {
                        return Err(invalid("piecewise schedule value outside the parameter set"));
                    }
                }
            }
            ParamSchedule::Sinusoid {
                base,
                amplitude,
                period,
            } => {
                if amplitude.len() != p {
                    return Err(invalid("sinusoid amplitude dimension mismatch"));
                }
                if !(period.is_finite() && *period > 0.0) {
                    return Err(invalid("sinusoid period must be positive"));
                }
                // The extreme values lie on the corners of base ± amplitude.
                let corners = 1usize << p.min(16);
                for mask in 0..corners {
                    let c: Vec<f64> = (0..p)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                base[i] + amplitude[i]
                            } else {
                                base[i] - amplitude[i]
                            }
                        })
                        .collect();
                    if !set.contains(&c, 1e-12) {
                        return Err(invalid("sinusoid schedule leaves the parameter set"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn value_at(&self, t: usize) -> Vec<f64> {
        match self {
            ParamSchedule::Constant { value } => value.clone(),
            ParamSchedule::PiecewiseConstant {
                switch_times,
                values,
            } => {
                let idx = switch_times.partition_point(|&s| s <= t);
                values[idx].clone()
            }
            ParamSchedule::Sinusoid {
                base,
                amplitude,
                period,
            } => {
                let s = (std::f64::consts::TAU * t as f64 / period).sin();
                base.iter().zip(amplitude).map(|(b, a)| b + a * s).collect()
            }
        }
    }

    /// `a*_0, …, a*_{horizon-1}`
    pub fn sequence(&self, horizon: usize) -> Vec<Vec<f64>> {
        (0..horizon).map(|t| self.value_at(t)).collect()
    }

    /// `Σ_{t=1}^{T-1} ‖a*_t − a*_{t−1}‖`
    pub fn path_length(&self, horizon: usize) -> f64 {
        match self {
            ParamSchedule::Constant { .. } => 0.0,
            ParamSchedule::PiecewiseConstant {
                switch_times,
                values,
            } => switch_times
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= 1 && s < horizon)
                .map(|(i, _)| vecops::dist(&values[i + 1], &values[i]))
                .sum(),
            ParamSchedule::Sinusoid { .. } => {
                let seq = self.sequence(horizon);
                seq.windows(2).map(|w| vecops::dist(&w[1], &w[0])).sum()
            }
        }
    }
}
