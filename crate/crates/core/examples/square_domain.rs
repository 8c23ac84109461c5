//! The reference scenario on the unit square with 64 x 64 cells.
//!
//! `cargo run --release --example square_domain`

use std::path::Path;
use std::time::Instant;

use ks_degenerate::cli::simulate;
use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::report::render_table;

fn main() -> ks_degenerate::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/s1_2d.toml");
    let sc = ScenarioConfig::from_path(&path)?.build()?;
    let start = Instant::now();
    let (_, report) = simulate(&sc)?;
    print!("{}", render_table(&report));
    println!("wall time {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
