use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::meta::{run_meta_env, Environment, RunOptions};
use adaptive_polyopt::metrics::surrogate_grad;

fn late_max_bias(eta: f64) -> f64 {
    let cfg = config("c05_bias_eta_scaling.json").unwrap();
    let mut cell = cfg.cells()[0].clone();
    cell.alg = cell.alg.with_eta(eta);
    cell.spec.horizon = 1500;
    let env = Environment::sample(&cell.spec, cell.seed);
    let rec = run_meta_env(&cell.spec, &cell.alg, &cell.est, cell.seed, &env, RunOptions::default()).unwrap();
    rec.steps[rec.len() / 2..]
        .iter()
        .map(|s| (s.g_approx - surrogate_grad(&cell.spec, s.theta, s.t, &env).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn oracle_bias_decreases_with_step_size() {
    let b: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&e| late_max_bias(e)).collect();
    assert!(b[0] > b[1] && b[1] > b[2], "{b:?}");
    assert!(late_max_bias(0.0) < 1e-9);
}
