//! Analytic Jacobians of the estimated dynamics and cost against central
//! differences.

use adaptive_polyopt::acceptance::config;
use adaptive_polyopt::derivatives::{fd_jacobian, ghat, ghat_jacobians, hhat, hhat_gradients, rel_err};

fn main() {
    let cfg = config("c02_derivatives.json").unwrap();
    let spec = &cfg.cells()[0].spec;
    let a_hat = [0.8, -0.4];
    for &(x, theta) in &[(0.3, 1.0), (-1.2, 2.5), (1.9, 0.7)] {
        let gj = ghat_jacobians(spec, x, theta);
        let hg = hhat_gradients(spec, x, theta, &a_hat);
        let g_fd = fd_jacobian(|v| vec![ghat(spec, v[0], v[1], &a_hat)], &[x, theta], 1e-6).unwrap();
        let h_fd = fd_jacobian(|v| vec![hhat(spec, v[0], v[1], &a_hat)], &[x, theta], 1e-6).unwrap();
        println!(
            "x={x:+.2} θ={theta:.2}  ĝ_x {:.6} (fd err {:.1e})  ĝ_θ {:.6} (fd err {:.1e})  ĥ_x {:.6} (fd err {:.1e})  ĥ_θ {:.6} (fd err {:.1e})",
            gj.d_x,
            rel_err(gj.d_x, g_fd[0][0]),
            gj.d_theta,
            rel_err(gj.d_theta, g_fd[0][1]),
            hg.d_x,
            rel_err(hg.d_x, h_fd[0][0]),
            hg.d_theta,
            rel_err(hg.d_theta, h_fd[0][1]),
        );
    }
}
