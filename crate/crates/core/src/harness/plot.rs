//! Plot-ready data files and a gnuplot script template.

use std::fmt::Write;

use crate::harness::trace::fmt_real;
use crate::metrics::MetricsReport;

/// Columns: `t`, cumulative local-regret density `Σ_{s≤t} ‖∇_{Θ,η}F_s‖² / (t+1)`,
/// cumulative estimator loss, `θ_t`.
pub fn plot_data(report: &MetricsReport, est_loss: &[f64], thetas: &[f64]) -> String {
    let mut out = String::from("# t local_regret_density cumulative_est_loss theta\n");
    let (mut reg, mut loss) = (0.0, 0.0);
    for (t, ((g2, l), th)) in report.proj_grad_sq.iter().zip(est_loss).zip(thetas).enumerate() {
        reg += g2;
        loss += l;
        let _ = writeln!(
            out,
            "{t} {} {} {}",
            fmt_real(reg / (t + 1) as f64),
            fmt_real(loss),
            fmt_real(*th)
        );
    }
    out
}

pub fn gnuplot_script(cells: &[String]) -> String {
    let mut s = String::from(
        "# gnuplot -persist plot.gp\n\
         set logscale y\n\
         set xlabel 't'\n\
         set ylabel 'cumulative local regret / (t+1)'\n",
    );
    let series: Vec<String> = cells
        .iter()
        .map(|c| format!("'{c}.dat' using 1:2 with lines title '{c}'"))
        .collect();
    if !series.is_empty() {
        s.push_str("plot ");
        s.push_str(&series.join(", \\\n     "));
        s.push('\n');
    }
    s
}
