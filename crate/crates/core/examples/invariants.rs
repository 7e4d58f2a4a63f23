//! Runs every invariant suite and prints its margin.
//!
//! `cargo run --release --example invariants -- [seed]`

fn main() -> famimo::error::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    for result in famimo::verify::run_all(seed)? {
        println!("{result}");
    }
    Ok(())
}
