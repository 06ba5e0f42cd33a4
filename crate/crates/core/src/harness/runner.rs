//! Executes configured experiment matrices and writes their artifacts.
//!
//! Layout of a run directory `run-<hash>`:
//! `config.json`, `<cell>.csv`, `<cell>.summary.json`, `summary.json`,
//! `plot/<cell>.dat`, `plot/plot.gp`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{Cell, RunConfig};
use crate::harness::plot::{gnuplot_script, plot_data};
use crate::harness::trace::{parse_trace, rows_from_record, write_trace, TraceRow};
use crate::meta::{extract_zeta, replay_exact_env, run_meta_with, Environment, RunOptions, TrajectoryRecord};
use crate::metrics::{compute_report, MetricsReport};

pub const OUT_ENV: &str = "ADAPTIVE_POLYOPT_OUT";

#[derive(Debug, Clone, Default)]
pub struct RunnerOptions {
    pub out_dir: Option<PathBuf>,
    pub seed_override: Option<Vec<u64>>,
    /// Parallel cells; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub quiet: bool,
}

impl RunnerOptions {
    pub fn out_root(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub eta: f64,
    pub horizon: usize,
    pub slow_variation_violations: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLine {
    pub cell: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub horizon: usize,
    pub eta: f64,
    pub local_regret: f64,
    pub est_loss_sum: f64,
    pub sum_eps1_sq: f64,
    pub traj_distance: f64,
    pub sum_zeta_norm: f64,
    pub total_cost: f64,
    pub static_regret: Option<f64>,
    pub theorem_bound_rhs: Option<f64>,
}

/// Seed-wise means for one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMeans {
    pub sweep_value: Option<f64>,
    pub seeds: Vec<u64>,
    pub mean_local_regret: f64,
    pub mean_local_regret_per_step: f64,
    pub mean_est_loss_sum: f64,
    pub mean_sum_eps1_sq: f64,
    pub mean_traj_distance: f64,
    pub mean_sum_zeta_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub name: Option<String>,
    pub sweep_axis: Option<String>,
    pub cells: Vec<CellLine>,
    pub by_value: Vec<ValueMeans>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub cells: Vec<CellSummary>,
    pub summary: RunSummary,
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other("path has no file name")))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn simulate(cell: &Cell, eps_theta: Option<f64>) -> Result<(TrajectoryRecord, Environment)> {
    let env = Environment::sample(&cell.spec, cell.seed);
    let record = run_meta_with(&cell.spec, &cell.alg, &cell.est, cell.seed, RunOptions { eps_theta }).map_err(
        |e| match e {
            Error::RunAbort { step, reason } => Error::RunAbort {
                step,
                reason: format!("{}: {reason}", cell.id),
            },
            other => other,
        },
    )?;
    Ok((record, env))
}

fn summarize(cell: &Cell, record: &TrajectoryRecord, env: &Environment) -> Result<(CellSummary, Vec<f64>)> {
    let replay = replay_exact_env(&cell.spec, &record.thetas(), env)?;
    let zeta = extract_zeta(&cell.spec, cell.alg.eta(), record, &replay)?;
    let report = compute_report(&cell.spec, record, &replay, &zeta, &cell.report)?;
    Ok((
        CellSummary {
            cell: cell.id.clone(),
            seed: cell.seed,
            sweep_value: cell.sweep_value,
            eta: cell.alg.eta(),
            horizon: cell.spec.horizon,
            slow_variation_violations: record.slow_variation_violations,
            report,
        },
        zeta,
    ))
}

fn cell_line(s: &CellSummary) -> CellLine {
    let r = &s.report;
    CellLine {
        cell: s.cell.clone(),
        seed: s.seed,
        sweep_value: s.sweep_value,
        horizon: s.horizon,
        eta: s.eta,
        local_regret: r.local_regret,
        est_loss_sum: r.est_loss_sum,
        sum_eps1_sq: r.sum_eps1_sq,
        traj_distance: r.traj_distance,
        sum_zeta_norm: r.sum_zeta_norm,
        total_cost: r.total_cost,
        static_regret: r.static_regret.map(|s| s.value),
        theorem_bound_rhs: r.theorem_bound_rhs,
    }
}

fn run_summary(cfg: &RunConfig, cells: &[CellSummary]) -> RunSummary {
    let lines: Vec<CellLine> = cells.iter().map(cell_line).collect();
    let mut by_value = Vec::new();
    for value in cfg.sweep_values() {
        let group: Vec<&CellLine> = lines.iter().filter(|l| l.sweep_value == value).collect();
        if group.is_empty() {
            continue;
        }
        let n = group.len() as f64;
        let mean = |f: fn(&CellLine) -> f64| group.iter().map(|l| f(l)).sum::<f64>() / n;
        by_value.push(ValueMeans {
            sweep_value: value,
            seeds: group.iter().map(|l| l.seed).collect(),
            mean_local_regret: mean(|l| l.local_regret),
            mean_local_regret_per_step: mean(|l| l.local_regret / l.horizon.max(1) as f64),
            mean_est_loss_sum: mean(|l| l.est_loss_sum),
            mean_sum_eps1_sq: mean(|l| l.sum_eps1_sq),
            mean_traj_distance: mean(|l| l.traj_distance),
            mean_sum_zeta_norm: mean(|l| l.sum_zeta_norm),
        });
    }
    RunSummary {
        config_hash: cfg.hash_hex(),
        name: cfg.name.clone(),
        sweep_axis: cfg.sweep_axis().map(|a| a.label().to_string()),
        cells: lines,
        by_value,
    }
}

fn print_line(s: &CellSummary) {
    let r = &s.report;
    let value = s.sweep_value.map(|v| format!(" value={v}")).unwrap_or_default();
    println!(
        "{}{value} T={} eta={:.6} local_regret={:.6e} est_loss={:.6e} dist={:.6e} zeta={:.6e}",
        s.cell, s.horizon, s.eta, r.local_regret, r.est_loss_sum, r.traj_distance, r.sum_zeta_norm
    );
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn write_cell_outputs(
    cfg: &RunConfig,
    dir: &Path,
    cell: &Cell,
    record: &TrajectoryRecord,
    summary: &CellSummary,
    zeta: Option<&[f64]>,
) -> Result<()> {
    let p = cell.spec.param_dim();
    if cfg.outputs.trace_csv {
        let rows = rows_from_record(record, zeta);
        write_atomic(&dir.join(format!("{}.csv", cell.id)), &write_trace(&rows, p)?)?;
    }
    if cfg.outputs.summary_json {
        let json = serde_json::to_vec_pretty(summary)?;
        write_atomic(&dir.join(format!("{}.summary.json", cell.id)), &json)?;
    }
    if cfg.outputs.plot_data {
        let losses: Vec<f64> = record.steps.iter().map(|s| s.est_loss).collect();
        let data = plot_data(&summary.report, &losses, &record.thetas());
        write_atomic(&dir.join("plot").join(format!("{}.dat", cell.id)), data.as_bytes())?;
    }
    Ok(())
}

fn write_run_outputs(cfg: &RunConfig, dir: &Path, summaries: &[CellSummary]) -> Result<RunSummary> {
    let summary = run_summary(cfg, summaries);
    if cfg.outputs.summary_json {
        write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    }
    if cfg.outputs.plot_data {
        let ids: Vec<String> = summaries.iter().map(|s| s.cell.clone()).collect();
        write_atomic(&dir.join("plot").join("plot.gp"), gnuplot_script(&ids).as_bytes())?;
    }
    Ok(summary)
}

/// Runs every cell of `cfg`; traces carry a blank `zeta_norm` column.
pub fn run_config(cfg: &RunConfig, opts: &RunnerOptions) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(seeds) = &opts.seed_override {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    let dir = opts.out_root().join(cfg.run_dir_name());
    std::fs::create_dir_all(dir.join("plot"))?;
    write_atomic(&dir.join("config.json"), cfg.canonical_json().as_bytes())?;
    log::info!("run directory {}", dir.display());

    let cells = cfg.cells();
    let results: Vec<Result<CellSummary>> = in_pool(opts.jobs, || {
        cells
            .par_iter()
            .map(|cell| {
                let (record, env) = simulate(cell, cfg.eps_theta)?;
                let (summary, _) = summarize(cell, &record, &env)?;
                write_cell_outputs(&cfg, &dir, cell, &record, &summary, None)?;
                Ok(summary)
            })
            .collect()
    })?;
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        let s = r?;
        if !opts.quiet {
            print_line(&s);
        }
        summaries.push(s);
    }
    let summary = write_run_outputs(&cfg, &dir, &summaries)?;
    Ok(RunOutcome {
        run_dir: dir,
        cells: summaries,
        summary,
    })
}

fn compare_rows(cell: &str, stored: &[TraceRow], fresh: &[TraceRow]) -> Result<()> {
    if stored.len() != fresh.len() {
        return Err(Error::RecordMismatch(format!(
            "{cell}: trace has {} rows, re-simulation has {}",
            stored.len(),
            fresh.len()
        )));
    }
    for (a, b) in stored.iter().zip(fresh) {
        let mut a = a.clone();
        a.zeta_norm = b.zeta_norm;
        if a != *b {
            return Err(Error::RecordMismatch(format!("{cell}: row {} differs from re-simulation", b.t)));
        }
    }
    Ok(())
}

/// Re-simulates each cell from the stored config, checks the stored trace
/// against it, fills `zeta_norm` and rewrites the summaries.
pub fn postprocess(run_dir: &Path, opts: &RunnerOptions) -> Result<RunOutcome> {
    let cfg = RunConfig::from_path(&run_dir.join("config.json"))?;
    std::fs::create_dir_all(run_dir.join("plot"))?;
    let cells = cfg.cells();
    let results: Vec<Result<CellSummary>> = in_pool(opts.jobs, || {
        cells
            .par_iter()
            .map(|cell| {
                let (record, env) = simulate(cell, cfg.eps_theta)?;
                let (summary, zeta) = summarize(cell, &record, &env)?;
                let path = run_dir.join(format!("{}.csv", cell.id));
                if cfg.outputs.trace_csv {
                    let (stored, p) = parse_trace(&std::fs::read(&path)?)?;
                    if p != cell.spec.param_dim() {
                        return Err(Error::RecordMismatch(format!("{}: parameter dimension {p}", cell.id)));
                    }
                    compare_rows(&cell.id, &stored, &rows_from_record(&record, Some(&zeta)))?;
                }
                write_cell_outputs(&cfg, run_dir, cell, &record, &summary, Some(&zeta))?;
                Ok(summary)
            })
            .collect()
    })?;
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        let s = r?;
        if !opts.quiet {
            print_line(&s);
        }
        summaries.push(s);
    }
    let summary = write_run_outputs(&cfg, run_dir, &summaries)?;
    Ok(RunOutcome {
        run_dir: run_dir.to_path_buf(),
        cells: summaries,
        summary,
    })
}

/// Validates a config file without running it.
pub fn check(path: &Path) -> Result<RunConfig> {
    RunConfig::from_path(path)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) | Error::Json(_) => 2,
        Error::RunAbort { .. } => 3,
        Error::RecordMismatch(_) | Error::Csv(_) => 4,
        _ => 1,
    }
}
