//! Designs optimized on erroneous angles or path responses, scored on the
//! true channel.
//!
//! `cargo run --release --example robustness -- [realizations]`

use famimo::experiment::{run_sweep, Mode, RunOptions, SweepParameter};
use famimo::scenario::{Baseline, ScenarioSpec};

fn main() -> famimo::error::Result<()> {
    let realizations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = ScenarioSpec {
        realizations,
        ..ScenarioSpec::default()
    };
    let baselines = [Baseline::Fpa, Baseline::Tfa, Baseline::Trfa];
    let opts = RunOptions::new(&spec);
    for parameter in [SweepParameter::AngleError, SweepParameter::PrmError] {
        let values = parameter.default_values();
        let sweep = run_sweep(&spec, parameter, &values, &baselines, &[Mode::Centralized], &opts)?;
        println!("{} {:?}", parameter.column(), values);
        for b in baselines {
            let curve = sweep.curve(b, Mode::Centralized);
            let change = sweep.relative_change(b, Mode::Centralized);
            let cells: Vec<String> = curve.iter().zip(&change).map(|(v, c)| format!("{v:.3} ({:+.1}%)", 100.0 * c)).collect();
            println!("  {b:>5}: {}", cells.join("  "));
        }
    }
    Ok(())
}
