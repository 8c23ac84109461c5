//! Self-convergence of the scheme: spatial order under `(h, dt) -> (h/2,
//! dt/4)`, temporal order at fixed `h`, and the order of the weak-form
//! residual in `dt`.
//!
//! `cargo run --release --example convergence_study [config]`

use std::path::PathBuf;

use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::study::self_convergence;

fn main() -> ks_degenerate::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/s1.toml"));
    let cfg = ScenarioConfig::from_path(&path)?;
    let study = self_convergence(&cfg, cfg.verify.t_end)?;
    println!("base dt = {:.4e}, t_end = {}", study.base_dt, study.t_end);
    for e in [&study.spatial, &study.temporal, &study.weak_form] {
        println!("{}:", e.label);
        for (h, err) in e.steps.iter().zip(&e.errors) {
            println!("  step {h:.4e}  error {err:.4e}");
        }
        match e.order {
            Some(p) => println!("  order {p:.3} (min {})", e.min_order),
            None => println!("  exact"),
        }
    }
    println!("overall: {}", if study.pass { "PASS" } else { "FAIL" });
    Ok(())
}
