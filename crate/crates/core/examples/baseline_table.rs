//! Average WSR of every baseline over a few realizations, both modes.
//!
//! `cargo run --release --example baseline_table -- [realizations]`

use famimo::experiment::{run_experiment, summary_table, Mode, RunOptions};
use famimo::scenario::{Baseline, PerturbationSpec, ScenarioSpec};

fn main() -> famimo::error::Result<()> {
    let realizations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = ScenarioSpec {
        realizations,
        ..ScenarioSpec::default()
    };
    let result = run_experiment(
        &spec,
        &Baseline::ALL,
        &[Mode::Centralized, Mode::Decentralized],
        &PerturbationSpec::default(),
        &RunOptions::new(&spec),
    )?;
    print!("{}", summary_table(&result).to_csv());
    Ok(())
}
