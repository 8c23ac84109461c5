//! The zero-mean Neumann Poisson solve and the dual norm built on it,
//! checked against the discrete cosine eigenpair and its continuum limit
//! `1 / (pi sqrt 2)`.
//!
//! `cargo run --release --example dual_norm`

use std::f64::consts::PI;

use ks_degenerate::elliptic::{h1_dual_norm, solve_k, solve_k_spectral, DEFAULT_POISSON_TOL};
use ks_degenerate::grid::l2_norm;
use ks_degenerate::{Field, Grid};

pub fn main() -> ks_degenerate::Result<()> {
    let exact = 1.0 / (PI * 2f64.sqrt());
    let mut prev: Option<f64> = None;
    println!("{:>6}  {:>14}  {:>11}  {:>6}  {:>10}", "cells", "dual norm", "error", "order", "cg vs dct");
    for cells in [32, 64, 128, 256, 512] {
        let g = Grid::interval(1.0, cells)?;
        let z = Field::from_fn(g, |x| (PI * x[0]).cos());
        let n = h1_dual_norm(&z, DEFAULT_POISSON_TOL)?;
        let err = (n - exact).abs();
        let order = prev.map_or(f64::NAN, |e| (e / err).log2());
        let cg = solve_k(&z, DEFAULT_POISSON_TOL)?.potential;
        let diff = l2_norm(&cg.sub(&solve_k_spectral(&z))?);
        println!("{cells:>6}  {n:>14.10}  {err:>11.3e}  {order:>6.3}  {diff:>10.2e}");
        prev = Some(err);
    }
    Ok(())
}
