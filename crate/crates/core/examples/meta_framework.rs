//! One run of the meta-framework, its exact-parameter replay and the
//! perturbations that relate them.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::meta::{extract_zeta, replay_exact, run_meta};
use adaptive_polyopt::metrics::trajectory_distance;

fn main() {
    let cfg = config("c09_mismatch_distance.json").unwrap();
    for cell in cfg.cells() {
        let rec = run_meta(&cell.spec, &cell.alg, &cell.est, cell.seed).unwrap();
        let replay = replay_exact(&cell.spec, &rec.thetas(), cell.seed).unwrap();
        let zeta = extract_zeta(&cell.spec, cell.alg.eta(), &rec, &replay).unwrap();
        let eps: f64 = rec.steps.iter().map(|s| s.eps0).sum();
        println!(
            "offset={:.2}: Σε={eps:.4} distance={:.5} Σ|ζ|={:.6} final θ={:.4}",
            cell.sweep_value.unwrap(),
            trajectory_distance(&rec, &replay).unwrap(),
            zeta.iter().map(|z| z.abs()).sum::<f64>(),
            rec.terminal.theta
        );
    }
}
