//! Local regret of OGD on exact surrogate gradients with an injected bias.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::meta::{run_meta_env, Environment, RunOptions};
use adaptive_polyopt::metrics::local_regret;

fn main() {
    let mut cfg = config("c10_biased_ogd.json").unwrap();
    if let adaptive_polyopt::harness::config::Experiment::Sweep { values, .. } = &mut cfg.experiment {
        *values = vec![0.0, 0.005, 0.01, 0.02, 0.04];
    }
    let mut base = None;
    for cell in cfg.cells() {
        let env = Environment::sample(&cell.spec, cell.seed);
        let rec = run_meta_env(&cell.spec, &cell.alg, &cell.est, cell.seed, &env, RunOptions::default()).unwrap();
        let r = local_regret(&cell.spec, &rec.thetas(), cell.alg.eta(), &env).unwrap();
        let beta = cell.sweep_value.unwrap();
        let r0 = *base.get_or_insert(r);
        let slope = if beta > 0.0 { format!("{:.3}", (r - r0) / beta) } else { "-".into() };
        println!("β={beta:.3}: R_L={r:.4} slope={slope}");
    }
}
