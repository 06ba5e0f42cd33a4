//! Run configuration: one JSON file describes one experiment matrix.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alg::AlgKind;
use crate::error::{Error, Result};
use crate::est::EstKind;
use crate::metrics::{ReportOptions, TheoremParams};
use crate::model::{ParamSchedule, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemSpec,
    /// Places the switches of a piecewise-constant schedule at
    /// `round(fraction · T)`, so sweeps over `T` keep the switch count fixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_fractions: Option<Vec<f64>>,
    pub alg: AlgKind,
    #[serde(default)]
    pub eta_rule: EtaRule,
    pub est: EstKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Bound on `|θ_{t+1} − θ_t|`; violations are counted, not fatal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaRule {
    /// Use `alg.eta` as given.
    #[default]
    Fixed,
    /// `η = scale / √T`.
    InvSqrtT { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub trace_csv: bool,
    #[serde(default = "yes")]
    pub summary_json: bool,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trace_csv: true,
            summary_json: true,
            plot_data: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(alias = "T")]
    Horizon,
    Eta,
    Iota,
    /// Sets the disturbance bound and the theorem's `ε̄`.
    EpsBar,
    /// Frozen-estimator offset.
    Offset,
    /// Biased-OGD bias norm.
    Bias,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "T",
            SweepAxis::Eta => "eta",
            SweepAxis::Iota => "iota",
            SweepAxis::EpsBar => "eps_bar",
            SweepAxis::Offset => "offset",
            SweepAxis::Bias => "bias",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    #[default]
    Single,
    Sweep { sweep_axis: SweepAxis, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConfig {
    pub k: f64,
    pub eps_bar: f64,
    #[serde(default)]
    pub beta_e: f64,
    #[serde(default)]
    pub gamma_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Points on the θ grid for static regret; `null` skips it.
    #[serde(default = "default_static_grid")]
    pub static_grid: Option<usize>,
    #[serde(default = "default_vsys_grid")]
    pub vsys_grid: usize,
    /// `σ̲` is taken as the disturbance law's covariance floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremConfig>,
}

fn default_static_grid() -> Option<usize> {
    Some(201)
}

fn default_vsys_grid() -> usize {
    101
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            static_grid: default_static_grid(),
            vsys_grid: default_vsys_grid(),
            theorem: None,
        }
    }
}

/// One (sweep value, seed) pair, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub value_index: usize,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub spec: SystemSpec,
    pub alg: AlgKind,
    pub est: EstKind,
    pub report: ReportOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Canonical serialization; the run directory is named by its hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(digest)
    }

    pub fn run_dir_name(&self) -> String {
        format!("run-{}", &self.hash_hex()[..16])
    }

    pub fn sweep_values(&self) -> Vec<Option<f64>> {
        match &self.experiment {
            Experiment::Single => vec![None],
            Experiment::Sweep { values, .. } => values.iter().map(|v| Some(*v)).collect(),
        }
    }

    pub fn sweep_axis(&self) -> Option<SweepAxis> {
        match &self.experiment {
            Experiment::Single => None,
            Experiment::Sweep { sweep_axis, .. } => Some(*sweep_axis),
        }
    }

    /// Collects every violation with its field path.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            ));
        }
        if self.seeds.is_empty() {
            errs.push("seeds: at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            errs.push("seeds: duplicate seeds".into());
        }
        if let EtaRule::InvSqrtT { scale } = self.eta_rule {
            if !(scale.is_finite() && scale > 0.0) {
                errs.push("eta_rule.scale: must be positive and finite".into());
            }
        }
        if let Some(f) = &self.switch_fractions {
            match &self.system.schedule {
                ParamSchedule::PiecewiseConstant { values, .. } => {
                    if f.len() + 1 != values.len() {
                        errs.push(format!(
                            "switch_fractions: {} fractions for {} schedule values",
                            f.len(),
                            values.len()
                        ));
                    }
                    if f.iter().any(|v| !(v.is_finite() && *v > 0.0 && *v < 1.0))
                        || f.windows(2).any(|p| p[0] >= p[1])
                    {
                        errs.push("switch_fractions: must be strictly increasing in (0, 1)".into());
                    }
                }
                _ => errs.push(
                    "switch_fractions: requires a piecewise_constant schedule".into(),
                ),
            }
        }
        if let Some(th) = &self.metrics.theorem {
            if !(th.k > 0.0 && th.eps_bar > 0.0 && th.beta_e >= 0.0 && th.gamma_e >= 0.0) {
                errs.push("metrics.theorem: k and eps_bar must be positive, beta_e and gamma_e nonnegative".into());
            }
        }
        if let Experiment::Sweep { sweep_axis, values } = &self.experiment {
            if values.is_empty() {
                errs.push("experiment.values: empty sweep".into());
            }
            for v in values {
                let ok = match sweep_axis {
                    SweepAxis::Horizon => v.is_finite() && *v >= 0.0 && v.fract() == 0.0,
                    SweepAxis::Offset => v.is_finite(),
                    _ => v.is_finite() && *v >= 0.0,
                };
                if !ok {
                    errs.push(format!(
                        "experiment.values: {v} is not valid for axis {}",
                        sweep_axis.label()
                    ));
                }
            }
            let applicable = match sweep_axis {
                SweepAxis::Iota => matches!(self.est, EstKind::Gradient { .. }),
                SweepAxis::Offset => matches!(self.est, EstKind::Frozen { .. }),
                SweepAxis::Bias => matches!(self.alg, AlgKind::BiasedOgd { .. }),
                SweepAxis::Eta => self.eta_rule == EtaRule::Fixed,
                _ => true,
            };
            if !applicable {
                errs.push(format!(
                    "experiment.sweep_axis: {} does not apply to the configured alg/est/eta_rule",
                    sweep_axis.label()
                ));
            }
        }
        if errs.is_empty() {
            for value in self.sweep_values() {
                let (spec, alg, est) = self.resolve(value);
                if let Err(e) = spec.validate() {
                    errs.push(format!("system: {}", strip(&e)));
                }
                if let Err(e) = alg.validate() {
                    errs.push(format!("alg: {}", strip(&e)));
                }
                if let Err(e) = est.validate(&spec) {
                    errs.push(format!("est: {}", strip(&e)));
                }
                if !errs.is_empty() {
                    break;
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Spec, optimizer and estimator for one sweep value.
    pub fn resolve(&self, value: Option<f64>) -> (SystemSpec, AlgKind, EstKind) {
        let mut spec = self.system.clone();
        let mut alg = self.alg.clone();
        let mut est = self.est.clone();
        spec.horizon = self.horizon;
        if let (Some(v), Some(axis)) = (value, self.sweep_axis()) {
            match axis {
                SweepAxis::Horizon => spec.horizon = v as usize,
                SweepAxis::Eta => alg = alg.with_eta(v),
                SweepAxis::Iota => {
                    if let EstKind::Gradient { iota, .. } = &mut est {
                        *iota = Some(v);
                    }
                }
                SweepAxis::EpsBar => spec.w_law.bound = v,
                SweepAxis::Offset => {
                    if let EstKind::Frozen { offset } = &mut est {
                        *offset = v;
                    }
                }
                SweepAxis::Bias => {
                    if let AlgKind::BiasedOgd { bias, .. } = &mut alg {
                        *bias = v;
                    }
                }
            }
        }
        if let (Some(fr), ParamSchedule::PiecewiseConstant { switch_times, .. }) =
            (&self.switch_fractions, &mut spec.schedule)
        {
            *switch_times = fr
                .iter()
                .map(|f| (f * spec.horizon as f64).round() as usize)
                .collect();
        }
        if let EtaRule::InvSqrtT { scale } = self.eta_rule {
            alg = alg.with_eta(scale / (spec.horizon.max(1) as f64).sqrt());
        }
        (spec, alg, est)
    }

    fn theorem_for(&self, spec: &SystemSpec, value: Option<f64>) -> Option<TheoremParams> {
        let th = self.metrics.theorem?;
        let eps_bar = match (self.sweep_axis(), value) {
            (Some(SweepAxis::EpsBar), Some(v)) => v,
            _ => th.eps_bar,
        };
        let c = spec.w_law.cov_floor();
        Some(TheoremParams {
            k: th.k,
            sigma_lb: c * eps_bar * eps_bar,
            eps_bar,
            beta_e: th.beta_e,
            gamma_e: th.gamma_e,
        })
    }

    /// All cells in a fixed order: sweep values outer, seeds inner.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (vi, value) in self.sweep_values().into_iter().enumerate() {
            let (spec, alg, est) = self.resolve(value);
            let theorem = self.theorem_for(&spec, value);
            for &seed in &self.seeds {
                out.push(Cell {
                    id: format!("cell-{vi:03}-seed-{seed}"),
                    value_index: vi,
                    sweep_value: value,
                    seed,
                    report: ReportOptions {
                        eta: alg.eta(),
                        static_grid: self.metrics.static_grid,
                        vsys_grid: self.metrics.vsys_grid,
                        theorem,
                    },
                    spec: spec.clone(),
                    alg: alg.clone(),
                    est: est.clone(),
                });
            }
        }
        out
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidSpec(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "schema_version": 1,
        "system": {
            "delta": 0.1,
            "feature_map": {"kind": "linear"},
            "cost": {"q": 1.0, "r": 0.5, "lambda": 0.1, "theta_bar": 1.0},
            "theta_set": {"kind": "box", "lo": [0.5], "hi": [5.0]},
            "a_set": {"kind": "box", "lo": [-3.0], "hi": [3.0]},
            "x0": 1.0,
            "w_law": {"bound": 0.1, "distribution": {"kind": "uniform_box"}},
            "obs_law": {"bound": 0.0, "distribution": {"kind": "uniform_box"}},
            "schedule": {"kind": "constant", "value": [1.0]}
        },
        "alg": {"kind": "mgaps", "eta": 0.02},
        "est": {"kind": "oracle"},
        "horizon": 100,
        "seeds": [1]
    }"#;

    fn with(patch: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        patch(&mut v);
        v.to_string()
    }

    fn messages(text: &str) -> Vec<String> {
        match RunConfig::from_json(text) {
            Err(Error::InvalidConfig(m)) => m,
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].spec.horizon, 100);
        assert_eq!(cells[0].id, "cell-000-seed-1");
    }

    #[test]
    fn unknown_keys_rejected() {
        let m = messages(&with(|v| v["extra"] = 1.into()));
        assert!(m[0].contains("unknown field `extra`"), "{m:?}");
        let m = messages(&with(|v| v["system"]["cost"]["qq"] = 1.into()));
        assert!(m[0].contains("qq"));
    }

    #[test]
    fn semantic_errors_name_fields() {
        let m = messages(&with(|v| {
            v["schema_version"] = 7.into();
            v["seeds"] = serde_json::json!([]);
        }));
        assert!(m.iter().any(|s| s.starts_with("schema_version")));
        assert!(m.iter().any(|s| s.starts_with("seeds")));
        let m = messages(&with(|v| v["system"]["delta"] = (-1.0).into()));
        assert!(m[0].starts_with("system: delta"), "{m:?}");
        let m = messages(&with(|v| {
            v["experiment"] = serde_json::json!({"kind": "sweep", "sweep_axis": "offset", "values": [0.1]})
        }));
        assert!(m[0].starts_with("experiment.sweep_axis"));
    }

    #[test]
    fn sweep_resolution() {
        let text = with(|v| {
            v["experiment"] = serde_json::json!({"kind": "sweep", "sweep_axis": "T", "values": [2000, 8000]});
            v["eta_rule"] = serde_json::json!({"kind": "inv_sqrt_t", "scale": 1.0});
            v["seeds"] = serde_json::json!([1, 2]);
            v["system"]["schedule"] = serde_json::json!({
                "kind": "piecewise_constant", "switch_times": [0, 0], "values": [[1.0], [1.5], [1.0]]
            });
            v["switch_fractions"] = serde_json::json!([0.25, 0.5]);
        });
        let cfg = RunConfig::from_json(&text).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[2].spec.horizon, 8000);
        assert!((cells[2].alg.eta() - 1.0 / 8000f64.sqrt()).abs() < 1e-15);
        match &cells[2].spec.schedule {
            ParamSchedule::PiecewiseConstant { switch_times, .. } => assert_eq!(switch_times, &vec![2000, 4000]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn hash_distinguishes_fields() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let b = RunConfig::from_json(&with(|v| v["system"]["x0"] = 1.0000001.into())).unwrap();
        let c = RunConfig::from_json(&with(|v| v["seeds"] = serde_json::json!([2]))).unwrap();
        assert_ne!(a.run_dir_name(), b.run_dir_name());
        assert_ne!(a.run_dir_name(), c.run_dir_name());
        assert_eq!(a.run_dir_name(), RunConfig::from_json(MINIMAL).unwrap().run_dir_name());
    }
}
