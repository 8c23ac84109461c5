//! Extracts the large-time limit of the density for two nutrient levels and
//! compares its distance to the initial density with the product bound. At
//! the lower level the smallness condition holds and the limit is certified
//! non-constant.
//!
//! `cargo run --release --example limit_profile`

use std::path::Path;

use ks_degenerate::cli::simulate;
use ks_degenerate::config::ScenarioConfig;
use ks_degenerate::diagnostics::{check_prop2, extract_limit};
use ks_degenerate::snapshot::write_snapshot;

fn main() -> ks_degenerate::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["s1.toml", "s2.toml"] {
        let sc = ScenarioConfig::from_path(&dir.join(name))?.build()?;
        let (out, _) = simulate(&sc)?;
        let lr = extract_limit(&out.final_state, &sc.u_in, out.v_l1_stop, sc.config.scheme.poisson_tol)?;
        let p2 = check_prop2(&lr, &sc.u_in, &sc.v_in, &sc.motility, sc.config.checks.tol_discretization);
        println!("{name}: t_final = {:.3}", out.final_state.t);
        println!("  ||u_inf - u_in||^2          = {:.6e}", lr.dist_dual * lr.dist_dual);
        println!("  product bound               = {:.6e}", p2.dist.rhs);
        println!("  ||u_in - <u_in>||^2         = {:.6e}", lr.u_in_dual * lr.u_in_dual);
        println!("  smallness holds             = {}", p2.smalldist_holds);
        println!("  ||u_inf - <u_inf>||         = {:.6e}", lr.nonconst_dual);
        println!("  certified non-constant      = {}", p2.nonconstant);
        let out_path = std::env::temp_dir().join(format!("u_inf_{}.csv", name.trim_end_matches(".toml")));
        write_snapshot(&out_path, &lr.u_inf)?;
        println!("  limit written to {}", out_path.display());
    }
    Ok(())
}
