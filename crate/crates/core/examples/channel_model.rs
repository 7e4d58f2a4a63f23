//! Field-response channel of one realization, for fixed and movable arrays.
//!
//! `cargo run --release --example channel_model -- [scenario.json]`

use famimo::channel::{assemble_channels, Position};
use famimo::linalg::frobenius;
use famimo::scenario::{baseline_layout, sample_scenario, Baseline, ScenarioSpec};

fn main() -> famimo::error::Result<()> {
    let spec = match std::env::args().nth(1) {
        Some(path) => ScenarioSpec::load(path.as_ref())?,
        None => ScenarioSpec::default(),
    };
    let realization = sample_scenario(&spec, 0)?;
    println!("lambda = {:.3} mm, noise = {:.2e} W, P_max = {:.2} W", 1e3 * spec.wavelength(), spec.noise_watt(), spec.p_max_watt());
    for (k, d) in realization.distances.iter().enumerate() {
        println!("user {k}: distance {d:.1} m, path gain {:.2e}", spec.pathloss(*d)?);
    }

    let fixed = baseline_layout(&spec, Baseline::Fpa, 0)?;
    let random = baseline_layout(&spec, Baseline::Rpa, 0)?;
    let h_fixed = assemble_channels(&realization.geometry, &fixed)?.h;
    let h_random = assemble_channels(&realization.geometry, &random)?.h;
    println!("\n||H_k||_F  fixed UPA   random in boxes");
    for (k, (a, b)) in h_fixed.iter().zip(&h_random).enumerate() {
        println!("user {k}:   {:.3e}   {:.3e}", frobenius(a), frobenius(b));
    }

    let mut moved = fixed.clone();
    moved.tx.positions[0] += Position::new(spec.wavelength() / 4.0, 0.0, 0.0);
    let h_moved = assemble_channels(&realization.geometry, &moved)?.h;
    let changed: Vec<usize> = (0..spec.tx_antennas)
        .filter(|&m| (h_moved[0].column(m) - h_fixed[0].column(m)).norm() > 0.0)
        .collect();
    println!("\nmoving transmit antenna 0 by lambda/4 changes columns {changed:?} of H_0");
    Ok(())
}
