//! A tabulated motility `gamma(s) = s exp(-s)` with its derivative table:
//! evaluation, the supremum of `|gamma'|`, and a full run on it.
//!
//! `cargo run --release --example table_motility`

use std::path::Path;

use ks_degenerate::cli::simulate;
use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::MotilitySpec;

fn main() -> ks_degenerate::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let m = MotilitySpec::from_table_csv(&dir.join("gamma_s_exp.csv"))?;
    for s in [0.0, 0.3, 1.0, 1.7] {
        println!(
            "gamma({s}) = {:.8}   gamma'({s}) = {:.8}   exact {:.8} / {:.8}",
            m.eval_gamma(s)?,
            m.eval_gamma_prime(s)?,
            s * (-s as f64).exp(),
            (1.0 - s) * (-s as f64).exp()
        );
    }
    println!("sup |gamma'| on [0, 2] = {}", m.sup_gamma_prime(2.0));
    match m.eval_gamma(2.5) {
        Err(e) => println!("beyond the table: {e}"),
        Ok(g) => println!("beyond the table: {g}"),
    }
    let sc = ScenarioConfig::from_path(&dir.join("table_gamma.toml"))?.build()?;
    let (_, report) = simulate(&sc)?;
    let failed: Vec<_> = report.failed().map(|c| c.name.as_str()).collect();
    println!("run on the tabulated motility: {} checks, failed: {failed:?}", report.checks.len());
    Ok(())
}
