//! Solve one desk-scale realization for every baseline and print the WSR.
//!
//! `cargo run --release --example full_solve -- [realization]`

use famimo::scenario::{build_problem, sample_scenario, Baseline, ScenarioSpec};
use famimo::solver::{solve, SolverConfig};

fn main() -> famimo::error::Result<()> {
    let index: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = ScenarioSpec::default();
    let realization = sample_scenario(&spec, index)?;
    for baseline in Baseline::ALL {
        let problem = build_problem(&spec, baseline, index, realization.geometry.clone())?;
        let config = SolverConfig {
            optimize_t: baseline.optimize_t(),
            optimize_r: baseline.optimize_r(),
            ..SolverConfig::default()
        };
        let report = solve(&problem, &config)?;
        println!(
            "{:>5}: {:.4} bps/Hz after {:>2} iterations (converged: {}, {:.0} ms)",
            baseline, report.final_wsr_bits, report.iterations, report.converged, report.total_time_ms
        );
    }
    Ok(())
}
