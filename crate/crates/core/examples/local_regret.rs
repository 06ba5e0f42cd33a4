//! Local regret per step shrinking with the horizon when η ∝ 1/√T.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::meta::{run_meta_env, Environment, RunOptions};
use adaptive_polyopt::metrics::{local_regret, static_regret};

fn main() {
    let mut cfg = config("c06_local_regret_sublinear.json").unwrap();
    cfg.seeds = vec![1, 2, 3];
    for cell in cfg.cells() {
        let env = Environment::sample(&cell.spec, cell.seed);
        let rec = run_meta_env(&cell.spec, &cell.alg, &cell.est, cell.seed, &env, RunOptions::default()).unwrap();
        let r = local_regret(&cell.spec, &rec.thetas(), cell.alg.eta(), &env).unwrap();
        let s = static_regret(&cell.spec, &rec, 201).unwrap();
        println!(
            "T={:5} seed={} η={:.5}: R_L/T={:.4e} static regret={:.4} (θ*≈{:.3} ± {:.3})",
            cell.spec.horizon,
            cell.seed,
            cell.alg.eta(),
            r / rec.len() as f64,
            s.value,
            s.argmin,
            s.grid_spacing
        );
    }
}
