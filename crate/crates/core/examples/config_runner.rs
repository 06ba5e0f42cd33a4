//! Runs a shipped config through the harness into a temporary directory,
//! then post-processes it.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::harness::{postprocess, run_config, RunnerOptions};

fn main() {
    let cfg = config("c09_mismatch_distance.json").unwrap();
    let opts = RunnerOptions {
        out_dir: Some(std::env::temp_dir().join("adaptive-polyopt-example")),
        ..Default::default()
    };
    let out = run_config(&cfg, &opts).unwrap();
    println!("wrote {}", out.run_dir.display());
    postprocess(&out.run_dir, &RunnerOptions { quiet: true, ..opts }).unwrap();
    for v in &out.summary.by_value {
        println!(
            "offset={:?}: mean distance {:.5}, mean Σ|ζ| {:.6}",
            v.sweep_value, v.mean_traj_distance, v.mean_sum_zeta_norm
        );
    }
}
