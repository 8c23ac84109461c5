//! Sign and first-order decay of the discrete L^2 dissipation residual.
//!
//! `cargo run --release --example dissipation`

use std::path::Path;

use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::study::energy_residual_at;

fn main() -> ks_degenerate::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/s1.toml");
    let sc = ScenarioConfig::from_path(&path)?.build()?;
    let dts = [2.5e-4, 1.25e-4, 6.25e-5];
    let res = energy_residual_at(&sc, 0.5, &dts)?;
    println!("{:>10}  {:>14}  {:>8}", "dt", "residual", "ratio");
    for (k, (dt, r)) in dts.iter().zip(&res).enumerate() {
        let ratio = if k > 0 { res[k - 1] / r } else { f64::NAN };
        println!("{dt:>10.3e}  {r:>14.6e}  {ratio:>8.4}");
    }
    Ok(())
}
