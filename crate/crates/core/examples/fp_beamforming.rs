//! Beamforming alone on fixed arrays: the exact bisection update against the
//! inverse-free update with Nesterov extrapolation.
//!
//! `cargo run --release --example fp_beamforming`

use famimo::objective::nats_to_bits;
use famimo::scenario::{build_problem, sample_scenario, Baseline, ScenarioSpec};
use famimo::solver::{solve, BeamformerMode, SolverConfig};

fn main() -> famimo::error::Result<()> {
    let spec = ScenarioSpec::default();
    let problem = build_problem(&spec, Baseline::Fpa, 0, sample_scenario(&spec, 0)?.geometry)?;
    let run = |beamformer| {
        let config = SolverConfig {
            beamformer,
            optimize_t: false,
            optimize_r: false,
            tol_outer: 1e-8,
            max_outer: 200,
            ..SolverConfig::default()
        };
        solve(&problem, &config)
    };
    let exact = run(BeamformerMode::Bisection)?;
    let fast = run(BeamformerMode::InverseFree)?;
    println!("iter  bisection  inverse-free   (bps/Hz)");
    let (a, b) = (exact.wsr_trace_nats(), fast.wsr_trace_nats());
    for i in (0..a.len().max(b.len())).filter(|i| i % 5 == 0 || *i < 5) {
        let cell = |t: &[f64]| t.get(i).map(|v| format!("{:.5}", nats_to_bits(*v))).unwrap_or_else(|| "-".into());
        println!("{i:>4}  {:>9}  {:>12}", cell(&a), cell(&b));
    }
    for (name, r) in [("bisection", &exact), ("inverse-free", &fast)] {
        let mu: Vec<f64> = r.trace.iter().filter_map(|t| t.mu).collect();
        println!(
            "{name}: {:.5} bps/Hz in {} iterations, final power {:.6} W, multipliers seen {}",
            r.final_wsr_bits,
            r.iterations,
            r.trace.last().map_or(0.0, |t| t.power),
            mu.len()
        );
    }
    Ok(())
}
