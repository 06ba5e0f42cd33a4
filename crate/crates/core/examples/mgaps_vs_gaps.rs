//! M-GAPS against buffered GAPS: the full buffer reproduces the accumulator,
//! short buffers truncate the chain-rule sum.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::alg::{gaps_buffered_update, mgaps_update, GapsBufferState, MgapsState};

fn main() {
    let cfg = config("c04_mgaps_vs_gaps.json").unwrap();
    let spec = &cfg.cells()[0].spec;
    let a_hat = [1.0];
    for buffer in [1, 5, 20, 200] {
        let mut m = MgapsState::new(0.02);
        let mut g = GapsBufferState::new(buffer, 0.02).unwrap();
        let (mut x, mut theta) = (1.0, 1.0);
        let mut worst: f64 = 0.0;
        for t in 0..200 {
            let mo = mgaps_update(spec, x, theta, &a_hat, t, m).unwrap();
            let go = gaps_buffered_update(spec, x, theta, &a_hat, t, g).unwrap();
            worst = worst.max((mo.g_approx - go.g_approx).abs());
            m = mo.state_next;
            g = go.state_next;
            theta = mo.theta_next;
            x = 0.9 * x + 0.1 * (0.3 * t as f64).sin();
        }
        println!("B={buffer:3}: max |G'_t - G_t| = {worst:.3e}");
    }
}
