//! Runs any scenario file and writes the time series, snapshots and report,
//! exactly like `ksdeg run`.
//!
//! `cargo run --release --example run_config -- configs/s2.toml [out_dir]`

use std::path::PathBuf;

use ks_degenerate::cli::cmd_run;
use ks_degenerate::config::Overrides;

fn main() -> ks_degenerate::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/s2.toml"));
    let o = Overrides {
        output_dir: args.next().map(PathBuf::from),
        ..Default::default()
    };
    let a = cmd_run(&config, &o)?;
    for c in &a.report.checks {
        println!("{:<26} {}", c.name, if c.pass { "pass" } else if c.enforced { "FAIL" } else { "info" });
    }
    println!("artifacts in {}", a.dir.display());
    std::process::exit(a.outcome.exit_code());
}
