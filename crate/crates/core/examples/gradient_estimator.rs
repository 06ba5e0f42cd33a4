//! The online gradient estimator tracking a switching parameter.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::alg::AlgKind;
use adaptive_polyopt::est::{default_iota, EstKind};
use adaptive_polyopt::meta::run_meta;

fn main() {
    let cfg = config("c07_estimator_regret.json").unwrap();
    for cell in cfg.cells().iter().filter(|c| c.seed == 1) {
        let spec = &cell.spec;
        let rec = run_meta(spec, &AlgKind::Mgaps { eta: 0.01 }, &EstKind::Gradient { iota: None, a_hat0: None }, cell.seed)
            .unwrap();
        let loss: f64 = rec.steps.iter().map(|s| s.est_loss).sum();
        println!("T={:5} iota={:.5} sum of losses {loss:.4}", spec.horizon, default_iota(spec));
        for s in rec.steps.iter().step_by(spec.horizon / 8) {
            println!("  t={:5} a*={:+.3} â={:+.4}", s.t, s.a_star[0], s.a_hat[0]);
        }
    }
}
