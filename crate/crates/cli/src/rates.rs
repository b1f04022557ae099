//! Rate-report emission for the `rates` subcommand.

use std::fmt::Write as _;

use rcgls::theory::RateReport;

/// Key/value CSV with the contraction diagnostics and the sampled
/// improvement-factor statistics.
pub fn render_rates_csv(report: &RateReport, rcd_factor: f64) -> String {
    let gamma_min = report
        .gamma_samples
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let gamma_finite_max = report
        .gamma_samples
        .iter()
        .cloned()
        .filter(|g| g.is_finite())
        .fold(1.0f64, f64::max);
    let ratio_max = report
        .empirical_ratios
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);

    let mut out = String::from("metric,value\n");
    let _ = writeln!(out, "sigma_min_sq,{}", report.sigma_min_sq);
    let _ = writeln!(out, "grcd_factor,{}", report.grcd_factor);
    let _ = writeln!(out, "rcd_factor,{rcd_factor}");
    let _ = writeln!(out, "gamma_min,{gamma_min}");
    let _ = writeln!(out, "gamma_finite_max,{gamma_finite_max}");
    let _ = writeln!(out, "gamma_samples,{}", report.gamma_samples.len());
    let _ = writeln!(out, "max_step_ratio,{ratio_max}");
    match report.m_matrix_samples {
        Some(s) => {
            let _ = writeln!(out, "m_matrix_estimator,monte-carlo");
            let _ = writeln!(out, "m_matrix_samples,{s}");
        }
        None => {
            let _ = writeln!(out, "m_matrix_estimator,exact");
        }
    }
    out
}
