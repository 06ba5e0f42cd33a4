//! Acceptance criteria 1–11. Each experiment is loaded from a shipped config
//! under `examples/configs/` and reports pass, fail or inconclusive with the
//! measured quantities.

use std::fmt;
use std::time::{Duration, Instant};

use crate::alg::{gaps_gradient, BufferEntry};
use crate::derivatives::{fd_jacobian, ghat, ghat_jacobians, hhat, hhat_gradients, rel_err};
use crate::error::{Error, Result};
use crate::harness::config::{Cell, RunConfig};
use crate::meta::{extract_zeta, replay_exact_env, run_meta_env, Environment, RunOptions, TrajectoryRecord};
use crate::metrics::{
    environment_of, local_regret, surrogate_cost, surrogate_grad, surrogate_grads_along, theorem_grad_error_rhs,
    trajectory_distance,
};
use crate::model::ConvexSet;
use crate::rng::StreamRng;
use crate::vecops;

pub const CONFIGS: &[(&str, &str)] = &[
    ("c01_oracle_collapse.json", include_str!("../examples/configs/c01_oracle_collapse.json")),
    ("c02_derivatives.json", include_str!("../examples/configs/c02_derivatives.json")),
    ("c04_mgaps_vs_gaps.json", include_str!("../examples/configs/c04_mgaps_vs_gaps.json")),
    ("c05_bias_eta_scaling.json", include_str!("../examples/configs/c05_bias_eta_scaling.json")),
    ("c06_local_regret_sublinear.json", include_str!("../examples/configs/c06_local_regret_sublinear.json")),
    ("c07_estimator_regret.json", include_str!("../examples/configs/c07_estimator_regret.json")),
    ("c08_gradient_error_bound.json", include_str!("../examples/configs/c08_gradient_error_bound.json")),
    ("c09_mismatch_distance.json", include_str!("../examples/configs/c09_mismatch_distance.json")),
    ("c10_biased_ogd.json", include_str!("../examples/configs/c10_biased_ogd.json")),
    ("c11_minimal.json", include_str!("../examples/configs/c11_minimal.json")),
];

pub fn config(name: &str) -> Result<RunConfig> {
    let text = CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::InvalidConfig(vec![format!("no shipped config {name}")]))?;
    RunConfig::from_json(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {} ({:.2}s, limit {}s): {}",
            self.id,
            self.status,
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

struct Check {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Check {
    Check {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn timed(id: u8, name: &'static str, limit_s: u64, f: impl FnOnce() -> Result<Check>) -> Outcome {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_s);
    let (mut status, mut detail) = match res {
        Ok(c) => (c.status, c.detail),
        Err(e) => (Status::Fail, format!("error: {e}")),
    };
    if status == Status::Pass && elapsed > limit {
        status = Status::Fail;
        detail.push_str("; runtime limit exceeded");
    }
    Outcome {
        id,
        name,
        status,
        detail,
        elapsed,
        limit,
    }
}

fn simulate(cell: &Cell) -> Result<(TrajectoryRecord, Environment)> {
    let env = Environment::sample(&cell.spec, cell.seed);
    let rec = run_meta_env(&cell.spec, &cell.alg, &cell.est, cell.seed, &env, RunOptions::default())?;
    Ok((rec, env))
}

fn group_by_value(cells: Vec<Cell>) -> Vec<Vec<Cell>> {
    let mut out: Vec<Vec<Cell>> = Vec::new();
    for c in cells {
        match out.last_mut() {
            Some(g) if g[0].value_index == c.value_index => g.push(c),
            _ => out.push(vec![c]),
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn oracle_collapse() -> Outcome {
    timed(1, "oracle collapse", 1, || {
        let cfg = config("c01_oracle_collapse.json")?;
        let cell = &cfg.cells()[0];
        let (rec, env) = simulate(cell)?;
        let replay = replay_exact_env(&cell.spec, &rec.thetas(), &env)?;
        let zeta = extract_zeta(&cell.spec, cell.alg.eta(), &rec, &replay)?;
        let dist = trajectory_distance(&rec, &replay)?;
        let eps_zero = rec.steps.iter().all(|s| s.eps0 == 0.0 && s.eps1 == 0.0);
        let zeta_zero = zeta.iter().all(|z| *z == 0.0);
        let replay_equal = rec
            .steps
            .iter()
            .all(|s| s.x.to_bits() == replay.x[s.t].to_bits() && s.y.to_bits() == replay.y[s.t].to_bits());
        Ok(verdict(
            eps_zero && zeta_zero && dist == 0.0 && replay_equal && rec.len() == 1000,
            format!(
                "T={}, eps all zero: {eps_zero}, zeta all zero: {zeta_zero}, distance={dist:e}, bit-exact replay: {replay_equal}",
                rec.len()
            ),
        ))
    })
}

pub fn derivative_correctness() -> Outcome {
    timed(2, "derivative correctness", 5, || {
        let cfg = config("c02_derivatives.json")?;
        let cell = &cfg.cells()[0];
        let spec = &cell.spec;
        let p = spec.param_dim();
        let mut rng = StreamRng::from_seed_u64(0x2d);
        let h = 1e-6;
        let mut worst_g: f64 = 0.0;
        let mut worst_h: f64 = 0.0;
        for _ in 0..100 {
            let x = rng.uniform_range(-spec.state_bound, spec.state_bound);
            let th = rng.uniform_range(0.5, 5.0);
            let a: Vec<f64> = (0..p).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let gj = ghat_jacobians(spec, x, th);
            let hg = hhat_gradients(spec, x, th, &a);
            let g_fd = fd_jacobian(|v| vec![ghat(spec, v[0], v[1], &a)], &[x, th], h)?;
            let h_fd = fd_jacobian(|v| vec![hhat(spec, v[0], v[1], &a)], &[x, th], h)?;
            worst_g = worst_g.max(rel_err(gj.d_x, g_fd[0][0])).max(rel_err(gj.d_theta, g_fd[0][1]));
            worst_h = worst_h.max(rel_err(hg.d_x, h_fd[0][0])).max(rel_err(hg.d_theta, h_fd[0][1]));
        }
        let env = Environment::sample(spec, cell.seed);
        let mut worst_f: f64 = 0.0;
        for _ in 0..50 {
            let th = rng.uniform_range(0.6, 4.9);
            let t = ((rng.uniform() * spec.horizon as f64) as usize).min(spec.horizon - 1);
            let g = surrogate_grad(spec, th, t, &env)?;
            let hs = 1e-5;
            let fd = (surrogate_cost(spec, th + hs, t, &env)? - surrogate_cost(spec, th - hs, t, &env)?) / (2.0 * hs);
            worst_f = worst_f.max(rel_err(g, fd));
        }
        Ok(verdict(
            worst_g <= 1e-6 && worst_h <= 1e-6 && worst_f <= 1e-5,
            format!("max rel err: g-hat {worst_g:.2e}, h-hat {worst_h:.2e} (tol 1e-6); surrogate grad {worst_f:.2e} (tol 1e-5)"),
        ))
    })
}

pub fn projection_properties() -> Outcome {
    timed(3, "projection properties", 1, || {
        let sets = [
            ConvexSet::Box {
                lo: vec![-1.0, 0.0, 2.0],
                hi: vec![1.0, 0.5, 4.0],
            },
            ConvexSet::Ball {
                center: vec![0.5, -1.0, 2.0],
                radius: 1.5,
            },
            ConvexSet::interval(0.5, 5.0),
        ];
        let mut rng = StreamRng::from_seed_u64(0x3);
        let (mut worst_expand, mut worst_idem): (f64, f64) = (f64::NEG_INFINITY, 0.0);
        let mut pairs = 0;
        for set in &sets {
            let d = set.dim();
            let n = 10_000 / sets.len() + 1;
            for _ in 0..n {
                let a: Vec<f64> = (0..d).map(|_| rng.uniform_range(-8.0, 8.0)).collect();
                let b: Vec<f64> = (0..d).map(|_| rng.uniform_range(-8.0, 8.0)).collect();
                let pa = set.project(&a)?;
                let pb = set.project(&b)?;
                worst_expand = worst_expand.max(vecops::dist(&pa, &pb) - vecops::dist(&a, &b));
                worst_idem = worst_idem.max(vecops::dist(&set.project(&pa)?, &pa));
                pairs += 1;
            }
        }
        Ok(verdict(
            worst_expand <= 1e-12 && worst_idem <= 1e-12 && pairs >= 10_000,
            format!("{pairs} pairs; max expansion {worst_expand:.2e}, max idempotence gap {worst_idem:.2e} (slack 1e-12)"),
        ))
    })
}

pub fn mgaps_equals_full_gaps() -> Outcome {
    timed(4, "M-GAPS equals full-buffer GAPS", 2, || {
        let cfg = config("c04_mgaps_vs_gaps.json")?;
        let cell = &cfg.cells()[0];
        let spec = &cell.spec;
        let (rec, _) = simulate(cell)?;
        let mut buffer = std::collections::VecDeque::new();
        let mut y = 0.0;
        let mut worst: f64 = 0.0;
        for s in &rec.steps {
            let hh = hhat_gradients(spec, s.x, s.theta, &s.a_hat);
            let g_mgaps = hh.d_x * y + hh.d_theta;
            let g_full = gaps_gradient(spec, s.x, s.theta, &s.a_hat, &buffer);
            worst = worst.max((g_full - s.g_approx).abs()).max((g_mgaps - g_full).abs());
            let jac = ghat_jacobians(spec, s.x, s.theta);
            y = jac.d_x * y + jac.d_theta;
            buffer.push_back(BufferEntry {
                jac,
                x: s.x,
                theta: s.theta,
            });
        }
        Ok(verdict(
            worst <= 1e-10 && rec.len() == 200,
            format!("T={}, B={}, max |G'_t - G_t| = {worst:.2e} (tol 1e-10)", rec.len(), rec.len()),
        ))
    })
}

pub fn bias_eta_scaling() -> Outcome {
    timed(5, "gradient-bias eta scaling", 20, || {
        let cfg = config("c05_bias_eta_scaling.json")?;
        let mut maxima = Vec::new();
        for group in group_by_value(cfg.cells()) {
            let mut per_seed = Vec::new();
            for cell in &group {
                let (rec, env) = simulate(cell)?;
                let half = rec.len() / 2;
                let mut worst: f64 = 0.0;
                for s in &rec.steps[half..] {
                    worst = worst.max((s.g_approx - surrogate_grad(&cell.spec, s.theta, s.t, &env)?).abs());
                }
                per_seed.push(worst);
            }
            maxima.push((group[0].alg.eta(), mean(&per_seed)));
        }
        let ratio = maxima[0].1 / maxima[1].1;
        Ok(verdict(
            (1.5..=2.5).contains(&ratio),
            format!(
                "max bias over t>=T/2: eta={} -> {:.4e}, eta={} -> {:.4e}; ratio {ratio:.3} (band [1.5, 2.5])",
                maxima[0].0, maxima[0].1, maxima[1].0, maxima[1].1
            ),
        ))
    })
}

pub fn local_regret_sublinear() -> Outcome {
    timed(6, "local-regret sublinearity", 120, || {
        let cfg = config("c06_local_regret_sublinear.json")?;
        let mut per_t = Vec::new();
        for group in group_by_value(cfg.cells()) {
            let mut vals = Vec::new();
            for cell in &group {
                let (rec, env) = simulate(cell)?;
                let r = local_regret(&cell.spec, &rec.thetas(), cell.alg.eta(), &env)?;
                vals.push(r / rec.len() as f64);
            }
            per_t.push((group[0].spec.horizon, group[0].alg.eta(), mean(&vals), group.len()));
        }
        let factor = per_t[0].2 / per_t[1].2;
        Ok(verdict(
            factor >= 2.0,
            format!(
                "mean R/T over {} seeds: T={} (eta={:.4}) -> {:.4e}, T={} (eta={:.4}) -> {:.4e}; decrease factor {factor:.3} (need >= 2)",
                per_t[0].3, per_t[0].0, per_t[0].1, per_t[0].2, per_t[1].0, per_t[1].1, per_t[1].2
            ),
        ))
    })
}

pub fn estimator_regret_scaling() -> Outcome {
    timed(7, "estimator regret scaling", 60, || {
        let cfg = config("c07_estimator_regret.json")?;
        let mut means = Vec::new();
        for group in group_by_value(cfg.cells()) {
            let mut vals = Vec::new();
            for cell in &group {
                let (rec, _) = simulate(cell)?;
                vals.push(rec.steps.iter().map(|s| s.est_loss).sum::<f64>());
            }
            means.push((group[0].spec.horizon, mean(&vals), group.len()));
        }
        let ratio = means[1].1 / means[0].1;
        Ok(verdict(
            ratio <= 3.0,
            format!(
                "mean sum of losses over {} seeds: T={} -> {:.4e}, T={} -> {:.4e}; ratio {ratio:.3} (need <= 3.0)",
                means[0].2, means[0].0, means[0].1, means[1].0, means[1].1
            ),
        ))
    })
}

pub fn gradient_error_bound() -> Outcome {
    timed(8, "gradient-error bound", 60, || {
        let cfg = config("c08_gradient_error_bound.json")?;
        let cells = cfg.cells();
        let th = cells[0]
            .report
            .theorem
            .ok_or_else(|| Error::InvalidConfig(vec!["metrics.theorem: required".into()]))?;
        let horizon = cells[0].spec.horizon;
        let (mut losses, mut lhs, mut w_var) = (Vec::new(), Vec::new(), Vec::new());
        for cell in &cells {
            let (rec, env) = simulate(cell)?;
            losses.push(rec.steps.iter().map(|s| s.est_loss).sum::<f64>());
            lhs.push(rec.steps.iter().map(|s| s.eps1 * s.eps1).sum::<f64>());
            w_var.push(mean(&env.w.iter().map(|w| w * w).collect::<Vec<_>>()));
        }
        let rhs = theorem_grad_error_rhs(th.k, th.sigma_lb, th.eps_bar, th.beta_e, th.gamma_e, horizon)?;
        let budget = th.eps_bar.powi(3) * horizon as f64;
        let mean_loss = mean(&losses);
        let mean_lhs = mean(&lhs);
        let detail = format!(
            "{} seeds, T={horizon}: precondition mean sum of losses {mean_loss:.4e} vs eps_bar^3 T = {budget:.4e}; \
             mean sum |grad_x e|^2 = {mean_lhs:.4e} vs RHS {rhs:.4e} (sigma_lb={:.4e}, measured Var(w)={:.4e})",
            cells.len(),
            th.sigma_lb,
            mean(&w_var)
        );
        if mean_loss > budget {
            return Ok(Check {
                status: Status::Inconclusive,
                detail: format!("precondition failed; {detail}"),
            });
        }
        Ok(verdict(mean_lhs <= rhs, detail))
    })
}

pub fn mismatch_distance_linearity() -> Outcome {
    timed(9, "mismatch-to-distance linearity", 30, || {
        let cfg = config("c09_mismatch_distance.json")?;
        let mut rows = Vec::new();
        for group in group_by_value(cfg.cells()) {
            let (mut dist, mut zsum) = (Vec::new(), Vec::new());
            for cell in &group {
                let (rec, env) = simulate(cell)?;
                let replay = replay_exact_env(&cell.spec, &rec.thetas(), &env)?;
                let zeta = extract_zeta(&cell.spec, cell.alg.eta(), &rec, &replay)?;
                dist.push(trajectory_distance(&rec, &replay)?);
                zsum.push(zeta.iter().map(|z| z.abs()).sum::<f64>());
            }
            rows.push((group[0].sweep_value.unwrap_or(0.0), mean(&dist), mean(&zsum)));
        }
        let mut ok = true;
        let mut ratios = Vec::new();
        for pair in rows.windows(2) {
            let rd = pair[1].1 / pair[0].1;
            let rz = pair[1].2 / pair[0].2;
            ok &= (1.6..=2.6).contains(&rd) && (1.6..=2.6).contains(&rz);
            ratios.push(format!("{}->{}: distance x{rd:.3}, zeta x{rz:.3}", pair[0].0, pair[1].0));
        }
        Ok(verdict(ok, format!("{} (band [1.6, 2.6])", ratios.join("; "))))
    })
}

pub fn biased_ogd_shape() -> Outcome {
    timed(10, "biased-OGD regret shape", 30, || {
        let cfg = config("c10_biased_ogd.json")?;
        let mut pts = Vec::new();
        for group in group_by_value(cfg.cells()) {
            let mut vals = Vec::new();
            for cell in &group {
                let (rec, _) = simulate(cell)?;
                let env = environment_of(&rec);
                let grads = surrogate_grads_along(&cell.spec, &rec.thetas(), &env)?;
                let r: f64 = crate::metrics::projected_gradient_sq(&cell.spec, &rec.thetas(), &grads, cell.alg.eta())?
                    .iter()
                    .sum();
                vals.push(r);
            }
            pts.push((group[0].sweep_value.unwrap_or(0.0), mean(&vals)));
        }
        let base = pts
            .iter()
            .find(|p| p.0 == 0.0)
            .ok_or_else(|| Error::InvalidConfig(vec!["experiment.values: needs bias 0".into()]))?
            .1;
        let slopes: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 > 0.0).map(|p| (p.0, (p.1 - base) / p.0)).collect();
        let ratio = slopes[1].1 / slopes[0].1;
        let ok = slopes.iter().all(|s| s.1 > 0.0) && (0.5..=2.0).contains(&ratio);
        Ok(verdict(
            ok,
            format!(
                "R(0)={base:.4e}; slopes {}; ratio {ratio:.3} (within factor 2)",
                slopes
                    .iter()
                    .map(|(b, s)| format!("beta={b}: {s:.4e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ))
    })
}

pub fn determinism_and_formats() -> Outcome {
    timed(11, "determinism and formats", 5, || {
        use crate::harness::trace::{parse_trace, write_trace};
        use crate::harness::{run_config, RunnerOptions};
        let cfg = config("c11_minimal.json")?;
        let root = std::env::temp_dir().join(format!("adaptive-polyopt-accept-{}", std::process::id()));
        let opts = |sub: &str| RunnerOptions {
            out_dir: Some(root.join(sub)),
            quiet: true,
            ..Default::default()
        };
        let a = run_config(&cfg, &opts("a"))?;
        let b = run_config(&cfg, &opts("b"))?;
        let csv_name = format!("{}.csv", a.cells[0].cell);
        let bytes_a = std::fs::read(a.run_dir.join(&csv_name))?;
        let bytes_b = std::fs::read(b.run_dir.join(&csv_name))?;
        let identical = bytes_a == bytes_b;
        let (rows, p) = parse_trace(&bytes_a)?;
        let round_trip = write_trace(&rows, p)? == bytes_a;
        let row_count = rows.len();

        let base: serde_json::Value = serde_json::from_str(CONFIGS[9].1)?;
        let mut malformed = Vec::new();
        let mut add = |f: &dyn Fn(&mut serde_json::Value)| {
            let mut v = base.clone();
            f(&mut v);
            malformed.push(v.to_string());
        };
        add(&|v| v["unknown_key"] = 1.into());
        add(&|v| v["schema_version"] = 99.into());
        add(&|v| v["seeds"] = serde_json::json!([]));
        add(&|v| v["system"]["delta"] = (-0.1).into());
        add(&|v| v["alg"]["kind"] = "sgd".into());
        add(&|v| {
            v.as_object_mut().unwrap().remove("horizon");
        });
        add(&|v| v["system"]["theta_set"] = serde_json::json!({"kind": "box", "lo": [1.0], "hi": [0.0]}));
        malformed.push("{ not json".into());
        let rejected = malformed
            .iter()
            .filter(|m| matches!(RunConfig::from_json(m), Err(Error::InvalidConfig(_))))
            .count();
        let _ = std::fs::remove_dir_all(&root);
        Ok(verdict(
            identical && round_trip && row_count == cfg.horizon && rejected == malformed.len(),
            format!(
                "byte-identical CSV: {identical}; round-trip exact: {round_trip}; rows {row_count}; rejected {rejected}/{} malformed configs",
                malformed.len()
            ),
        ))
    })
}

pub fn run_all() -> Vec<Outcome> {
    vec![
        oracle_collapse(),
        derivative_correctness(),
        projection_properties(),
        mgaps_equals_full_gaps(),
        bias_eta_scaling(),
        local_regret_sublinear(),
        estimator_regret_scaling(),
        gradient_error_bound(),
        mismatch_distance_linearity(),
        biased_ogd_shape(),
        determinism_and_formats(),
    ]
}
