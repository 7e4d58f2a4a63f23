//! CU/DU run of one realization: message traffic per round and the time
//! charged to the decentralized design against a centralized solve.
//!
//! `cargo run --release --example decentralized -- [clusters] [log.csv]`

use famimo::dbp::dec_solve;
use famimo::scenario::{build_problem, sample_scenario, Baseline, ScenarioSpec};
use famimo::solver::{solve, SolverConfig};

fn main() -> famimo::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let clusters: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let spec = ScenarioSpec::default();
    let problem = build_problem(&spec, Baseline::Trfa, 0, sample_scenario(&spec, 0)?.geometry)?;

    let dec = dec_solve(&problem, &SolverConfig::decentralized_reference(), clusters)?;
    let cen = solve(&problem, &SolverConfig::default())?;
    let summary = dec.log.summary();
    println!("{clusters} DUs, {} iterations, {} messages, {} bytes", dec.report.iterations, summary.messages, summary.total_bytes);
    println!("first iteration:");
    for e in dec.log.iteration(1).iter().filter(|e| e.dst == famimo::dbp::Node::Du(0) || e.src == famimo::dbp::Node::Du(0)) {
        println!("  round {:>3} {:<13} {:<16} {} -> {} {:>5} bytes", e.round, e.kind.as_str(), format!("{:?}", e.step), e.src, e.dst, e.bytes);
    }
    println!(
        "WSR: decentralized {:.4}, centralized {:.4} bps/Hz",
        dec.report.final_wsr_bits, cen.final_wsr_bits
    );
    println!(
        "time: CU {:.1} ms + slowest DU {:.1} ms = {:.1} ms; centralized {:.1} ms",
        dec.timing.cu_ms,
        dec.timing.du_ms.iter().cloned().fold(0.0, f64::max),
        dec.timing.decentralized_ms,
        cen.total_time_ms
    );
    if let Some(path) = args.next() {
        dec.log.write_csv(path.as_ref())?;
        println!("message log written to {path}");
    }
    Ok(())
}
