//! Self-convergence studies: spatial and temporal orders of the scheme and
//! the time-discretization order of the weak-form residual.

use serde::{Deserialize, Serialize};

use crate::config::{Scenario, ScenarioConfig};
use crate::diagnostics::{BoundCheck, WeakFormAccumulator};
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Field, Grid};
use crate::report::evaluate;
use crate::solver::{run, run_observed, stable_dt, RunOptions, RunOutput, SampleSchedule, SchemeParams};

/// Errors below this (relative to the solution size) count as exact.
const EXACT: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub label: String,
    /// Step size of each level (`h` or `dt`).
    pub steps: Vec<f64>,
    /// Difference (or residual) at each level.
    pub errors: Vec<f64>,
    /// `log2` ratio of the two finest errors; `None` when they vanish.
    pub order: Option<f64>,
    pub min_order: f64,
    pub pass: bool,
}

impl OrderEstimate {
    fn new(label: &str, steps: Vec<f64>, errors: Vec<f64>, scale: f64, min_order: f64) -> Self {
        let n = errors.len();
        let exact = errors.iter().all(|e| *e <= EXACT * scale.max(1.0));
        let order = (!exact && n >= 2).then(|| (errors[n - 2] / errors[n - 1]).log2());
        OrderEstimate {
            label: label.into(),
            steps,
            errors,
            pass: exact || order.is_some_and(|p| p >= min_order),
            order,
            min_order,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub t_end: f64,
    pub base_dt: f64,
    pub spatial: OrderEstimate,
    pub temporal: OrderEstimate,
    pub weak_form: OrderEstimate,
    /// Checks of the runs at `(h, dt)` and `(h/2, dt/4)`.
    pub level_checks: Vec<Vec<BoundCheck>>,
    pub pass: bool,
}

/// Averages `2^dim` fine cells into each coarse cell.
pub fn restrict(fine: &Field) -> Result<Field> {
    let g = fine.grid();
    let cells = g.cells();
    if cells.iter().take(g.dim()).any(|n| n % 2 != 0) {
        return Err(Error::InvalidArgument("restriction needs an even cell count".into()));
    }
    let coarse = if g.dim() == 1 {
        Grid::interval(g.extent()[0], cells[0] / 2)?
    } else {
        Grid::rectangle([g.extent()[0], g.extent()[1]], [cells[0] / 2, cells[1] / 2])?
    };
    let f = fine.values();
    let nx = cells[0];
    let vals = (0..coarse.len())
        .map(|k| {
            if g.dim() == 1 {
                0.5 * (f[2 * k] + f[2 * k + 1])
            } else {
                let (i, j) = (k % (nx / 2), k / (nx / 2));
                let at = |a: usize, b: usize| f[(2 * j + b) * nx + 2 * i + a];
                0.25 * (at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1))
            }
        })
        .collect();
    Field::from_values(coarse, vals)
}

fn refine(g: &Grid, factor: usize) -> Result<Grid> {
    let c = g.cells();
    if g.dim() == 1 {
        Grid::interval(g.extent()[0], c[0] * factor)
    } else {
        Grid::rectangle([g.extent()[0], g.extent()[1]], [c[0] * factor, c[1] * factor])
    }
}

/// Parameters that take `ceil(t_end / dt)` equal steps to `t_end` with no
/// early stop.
fn fixed_steps(base: &SchemeParams, t_end: f64, dt: f64) -> SchemeParams {
    let n = (t_end / dt).ceil().max(1.0);
    SchemeParams {
        dt_max: t_end / n,
        cfl_safety: 1.0,
        t_end,
        v_l1_stop: Some(0.0),
        linear_tol: base.linear_tol,
    }
}

fn run_level(sc: &Scenario, p: &SchemeParams, schedule: &SampleSchedule) -> Result<RunOutput> {
    run(&sc.u_in, &sc.v_in, &sc.motility, p, schedule, RunOptions::default()).map_err(|f| f.error)
}

/// Runs the scenario at `(h, dt)`, `(h/2, dt/4)`, `(h/4, dt/16)` for the
/// spatial order, at `dt`, `dt/2`, `dt/4` on the base grid for the temporal
/// order, and records the weak-form residual (sampled every step) at the
/// same three time steps.
pub fn self_convergence(cfg: &ScenarioConfig, t_end: f64) -> Result<ConvergenceStudy> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("study t_end must be positive, got {t_end}")));
    }
    let base = cfg.build()?;
    let cfl = base.params.cfl_safety;
    let dt0 = base
        .params
        .dt_max
        .min(stable_dt(&base.grid, &base.motility, base.v_in.max(), cfl))
        .min(t_end);
    let vf = &cfg.verify;
    let samples = SampleSchedule::Uniform(20);

    // spatial: dt shrinks with h^2 so the stability ratio stays fixed
    let mut finals = Vec::new();
    let mut level_checks = Vec::new();
    let mut hs = Vec::new();
    for k in 0..3usize {
        let grid = refine(&base.grid, 1 << k)?;
        let sc = cfg.build_at(grid)?;
        let p = fixed_steps(&base.params, t_end, dt0 / 4f64.powi(k as i32));
        let out = run_level(&sc, &p, &samples)?;
        if k < 2 {
            let mut sc_checks = sc.clone();
            sc_checks.config.checks.limit = false;
            sc_checks.config.checks.weak_form = false;
            level_checks.push(evaluate(&sc_checks, &out)?.0.checks);
        }
        hs.push(grid.min_spacing());
        finals.push(out.final_state.u);
    }
    let scale = l2_norm(&finals[0]);
    let spatial_err = (0..2)
        .map(|k| Ok(l2_norm(&restrict(&finals[k + 1])?.sub(&finals[k])?)))
        .collect::<Result<Vec<f64>>>()?;
    let spatial = OrderEstimate::new("spatial (u at t_end)", hs[..2].to_vec(), spatial_err, scale, vf.min_spatial_order);

    // temporal and weak form at fixed h
    let mut temporal_u = Vec::new();
    let mut weak = Vec::new();
    let mut dts = Vec::new();
    for k in 0..3 {
        let p = fixed_steps(&base.params, t_end, dt0 / 2f64.powi(k));
        let mut acc = WeakFormAccumulator::new(&base.u_in, &base.motility, cfg.checks.weak_form_mode);
        let mut acc_err = None;
        let out = run_observed(
            &base.u_in,
            &base.v_in,
            &base.motility,
            &p,
            &SampleSchedule::EveryStep,
            RunOptions::default(),
            &mut |s| {
                if acc_err.is_none() {
                    acc_err = acc.push(s).err();
                }
            },
        )
        .map_err(|f| f.error)?;
        if let Some(e) = acc_err {
            return Err(e);
        }
        dts.push(p.dt_max);
        weak.push(acc.residual()?);
        temporal_u.push(out.final_state.u);
    }
    let temporal_err = (0..2)
        .map(|k| Ok(l2_norm(&temporal_u[k].sub(&temporal_u[k + 1])?)))
        .collect::<Result<Vec<f64>>>()?;
    let temporal = OrderEstimate::new("temporal (u at t_end)", dts[..2].to_vec(), temporal_err, scale, vf.min_temporal_order);
    let weak_form = OrderEstimate::new("weak-form residual", dts, weak, scale, vf.min_weak_form_order);

    let checks_pass = level_checks.iter().flatten().all(|c| !c.enforced || c.pass);
    Ok(ConvergenceStudy {
        t_end,
        base_dt: dt0,
        pass: spatial.pass && temporal.pass && weak_form.pass && checks_pass,
        spatial,
        temporal,
        weak_form,
        level_checks,
    })
}

/// Dissipation residual of the last step before `t` for each time step in
/// `dts` (equal steps, no early stop).
pub fn energy_residual_at(sc: &Scenario, t: f64, dts: &[f64]) -> Result<Vec<f64>> {
    dts.iter()
        .map(|&dt| {
            let p = fixed_steps(&sc.params, t, dt);
            let out = run_level(sc, &p, &SampleSchedule::Times(vec![]))?;
            Ok(out.samples.last().map_or(0.0, |s| s.energy_residual))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_averages_pairs_and_blocks() {
        let g = Grid::interval(1.0, 4).unwrap();
        let f = Field::from_values(g, vec![1.0, 3.0, 5.0, 9.0]).unwrap();
        assert_eq!(restrict(&f).unwrap().values(), &[2.0, 7.0]);
        let g = Grid::rectangle([1.0, 1.0], [2, 2]).unwrap();
        let f = Field::from_values(g, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(restrict(&f).unwrap().values(), &[3.0]);
        let odd = Field::zeros(Grid::interval(1.0, 3).unwrap());
        assert!(restrict(&odd).is_err());
    }

    #[test]
    fn restriction_preserves_integrals() {
        let g = Grid::rectangle([2.0, 1.0], [8, 6]).unwrap();
        let f = Field::from_fn(g, |x| x[0].sin() + x[1] * x[1]);
        let r = restrict(&f).unwrap();
        let (a, b) = (crate::grid::integrate(&f), crate::grid::integrate(&r));
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn order_estimate_from_errors() {
        let e = OrderEstimate::new("x", vec![0.1, 0.05], vec![4e-3, 1e-3], 1.0, 1.8);
        assert!((e.order.unwrap() - 2.0).abs() < 1e-12);
        assert!(e.pass);
        let e = OrderEstimate::new("x", vec![0.1, 0.05], vec![0.0, 0.0], 1.0, 1.8);
        assert!(e.order.is_none() && e.pass);
        let e = OrderEstimate::new("x", vec![0.1, 0.05], vec![2e-3, 1e-3], 1.0, 1.8);
        assert!(!e.pass);
    }
}
