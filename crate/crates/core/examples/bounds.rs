//! Runs the reference scenario (linear motility, cosine density, uniform
//! nutrient 0.1) and prints every check of the verification report.
//!
//! `cargo run --release --example bounds`

use std::path::Path;

use ks_degenerate::cli::simulate;
use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::report::render_table;

fn main() -> ks_degenerate::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/s1.toml");
    let sc = ScenarioConfig::from_path(&path)?.build()?;
    let (out, report) = simulate(&sc)?;
    print!("{}", render_table(&report));
    let worst_b9 = out.samples.iter().map(|s| s.b9_residual).fold(0.0, f64::max);
    println!("largest accumulation-identity residual over {} samples: {worst_b9:e}", out.samples.len());
    Ok(())
}
