//! One transmit-position subproblem: MM iterations with the exact curvature
//! and with the row-norm bound used by the decentralized solver.
//!
//! `cargo run --release --example position_mm`

use famimo::mm::{mm_loop, MmConfig, PositionObjective, TxCurvature};
use famimo::verify::Frozen;

fn main() -> famimo::error::Result<()> {
    let frozen = Frozen::new(7, 16, 4, 4, 2)?;
    let start = &frozen.inst.layout.tx.positions;
    let boxes = &frozen.inst.layout.tx.boxes;
    let cfg = MmConfig {
        tol: 1e-9,
        max_iterations: 200,
    };
    for curvature in [TxCurvature::Exact, TxCurvature::RowNormBound] {
        let sub = frozen.tx(curvature)?;
        let out = mm_loop(&sub, start, boxes, &cfg)?;
        let moved = out.positions.iter().zip(start).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!(
            "{curvature:?}: delta {:.3e}, value {:.6} -> {:.6} in {} steps, largest move {:.3} mm",
            sub.delta(),
            out.trace[0],
            out.trace.last().unwrap(),
            out.iterations,
            1e3 * moved
        );
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(out.positions.iter().zip(boxes).all(|(p, b)| b.contains(p)));
    }
    Ok(())
}
