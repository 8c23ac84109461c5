//! Sweeps the initial nutrient level and shows where the smallness
//! condition starts to certify a non-constant limit.
//!
//! `cargo run --release --example smallness_sweep`

use std::path::Path;

use ks_degenerate::cli::{sweep, sweep_csv, SweepParam};
use ks_degenerate::config::ScenarioConfig;

fn main() -> ks_degenerate::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/s1.toml");
    let cfg = ScenarioConfig::from_path(&path)?;
    let rows = sweep(&cfg, SweepParam::VIn, &[0.1, 0.05, 0.01, 0.0085, 0.0084, 0.005], 0)?;
    print!("{}", sweep_csv(&rows)?);
    Ok(())
}
