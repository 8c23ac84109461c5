//! Without nutrient the density does not move: a thousand steps leave `u`
//! unchanged and `v` identically zero.
//!
//! `cargo run --release --example stationary`

use std::f64::consts::PI;

use ks_degenerate::solver::{step, SchemeParams, State};
use ks_degenerate::{Field, Grid, MotilitySpec};

pub fn main() -> ks_degenerate::Result<()> {
    let grid = Grid::interval(1.0, 128)?;
    let u_in = Field::from_fn(grid, |x| 1.0 + 0.5 * (PI * x[0]).cos());
    let m = MotilitySpec::power(1.0)?;
    let p = SchemeParams {
        dt_max: 1e-3,
        t_end: 10.0,
        ..Default::default()
    };
    let mut s = State::initial(u_in.clone(), Field::zeros(grid))?;
    for _ in 0..1000 {
        s = step(&s, &m, &p)?;
    }
    let du = s
        .u
        .values()
        .iter()
        .zip(u_in.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("t = {}, steps = {}", s.t, s.step_count);
    println!("max |u - u_in| = {du:e}");
    println!("max |v|        = {:e}", s.v.max().abs().max(s.v.min().abs()));
    Ok(())
}
