//! Time integration of the chemotaxis-consumption system.
//!
//! One step, in order:
//!
//! 1. `v+` solves `(I - dt Δ_h + dt diag(u)) v+ = v` (backward Euler with the
//!    absorption frozen at the current `u`);
//! 2. `a = dt * u * gamma(v+)` cellwise;
//! 3. `u+ = u + Δ_h a` and `A+ = A + a`.
//!
//! Because `u` and `A` receive the same increment `a`, the identity
//! `u(t) - u_in = Δ_h A(t)` holds up to round-off for every step count. `A`
//! is kept as a compensated pair so the `1/h^2` amplification of its
//! rounding errors does not build up over long runs.
//!
//! The explicit `u` update is positivity preserving when
//! `dt <= h_min^2 / (2 dim sup gamma[0, V])`, with `V = ||v_in||_inf`
//! bounding `v` for all time by the discrete maximum principle.

use serde::{Deserialize, Serialize};

use crate::diagnostics::energy_residual;
use crate::error::{Error, Result};
use crate::grid::{
    grad_sq_norm, integrate, l1_norm, l2_norm, laplacian_neumann, linf_norm, Field, Grid,
};
use crate::linalg::CgProblem;
use crate::motility::MotilitySpec;

pub const DEFAULT_CFL_SAFETY: f64 = 0.9;
pub const DEFAULT_LINEAR_TOL: f64 = 1e-12;
/// Default stop threshold relative to `||v_in||_1`.
pub const DEFAULT_V_L1_STOP_RELATIVE: f64 = 1e-8;

/// Largest relative excursion outside `[0, max v]` accepted from the inexact
/// linear solve before it is reported as a broken maximum principle.
const MAX_PRINCIPLE_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    /// Accumulated `int_0^t u gamma(v) ds`, rounded to double.
    pub a: Field,
    /// Low-order part of `A`; `a + a_carry` is the accumulated sum.
    a_carry: Vec<f64>,
    pub uv_l1_cumulative: f64,
    pub step_count: u64,
    /// `||v_in||_inf`, the a-priori bound on `v`.
    pub v_bound: f64,
    /// Time step of the most recent step (0 before the first step).
    pub last_dt: f64,
    /// Sum over steps of `|int v - int v+ - dt int u v+|`: the mass defect
    /// left by the inexact linear solves.
    pub linear_defect: f64,
}

impl State {
    pub fn initial(u: Field, v: Field) -> Result<Self> {
        u.check_same_grid(&v)?;
        for (name, f) in [("u", &u), ("v", &v)] {
            if !f.is_finite() {
                return Err(Error::InvalidArgument(format!("initial {name} has non-finite values")));
            }
            if !f.is_nonnegative() {
                return Err(Error::InvalidArgument(format!(
                    "initial {name} must be nonnegative (min {})",
                    f.min()
                )));
            }
        }
        let grid = *u.grid();
        let v_bound = linf_norm(&v);
        Ok(State {
            t: 0.0,
            a: Field::zeros(grid),
            a_carry: vec![0.0; grid.len()],
            u,
            v,
            uv_l1_cumulative: 0.0,
            step_count: 0,
            v_bound,
            last_dt: 0.0,
            linear_defect: 0.0,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `Δ_h A` including the compensation term.
    pub fn laplacian_a(&self) -> Field {
        let grid = *self.grid();
        let mut lap = laplacian_neumann(&self.a);
        let mut lo = vec![0.0; grid.len()];
        grid.apply_laplacian(&self.a_carry, &mut lo);
        lap.values_mut().iter_mut().zip(lo).for_each(|(x, y)| *x += y);
        lap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeParams {
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Stop once `||v||_1` drops to this value; `None` means
    /// `1e-8 * ||v_in||_1`.
    pub v_l1_stop: Option<f64>,
    /// Relative residual target of the implicit `v` solve.
    pub linear_tol: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            dt_max: 1e-2,
            cfl_safety: DEFAULT_CFL_SAFETY,
            t_end: 200.0,
            v_l1_stop: None,
            linear_tol: DEFAULT_LINEAR_TOL,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if let Some(stop) = self.v_l1_stop {
            if !(stop >= 0.0) {
                return Err(Error::InvalidArgument(format!("v_l1_stop must be >= 0, got {stop}")));
            }
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "linear_tol must be positive, got {}",
                self.linear_tol
            )));
        }
        Ok(())
    }

    pub fn resolved_v_l1_stop(&self, v_in: &Field) -> f64 {
        self.v_l1_stop
            .unwrap_or(DEFAULT_V_L1_STOP_RELATIVE * l1_norm(v_in))
    }
}

/// `cfl_safety * h_min^2 / (2 dim sup gamma[0, v_bound])`; infinite when
/// `gamma` vanishes on the whole range.
pub fn stable_dt(grid: &Grid, m: &MotilitySpec, v_bound: f64, cfl_safety: f64) -> f64 {
    let g = m.sup_gamma(v_bound);
    if g <= 0.0 {
        return f64::INFINITY;
    }
    let h = grid.min_spacing();
    cfl_safety * h * h / (2.0 * grid.dim() as f64 * g)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NutrientStepInfo {
    pub iterations: usize,
    pub residual: f64,
    /// Mass moved by projecting the solve back into `[0, max v]`.
    pub clamped_mass: f64,
}

/// Backward-Euler nutrient step. The solution is projected onto
/// `[0, max v]`, the range the exact solution occupies.
pub fn step_v(u: &Field, v: &Field, dt: f64, tol: f64) -> Result<Field> {
    step_v_detailed(u, v, dt, tol).map(|(f, _)| f)
}

pub fn step_v_detailed(u: &Field, v: &Field, dt: f64, tol: f64) -> Result<(Field, NutrientStepInfo)> {
    u.check_same_grid(v)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let grid = *v.grid();
    let b = v.values();
    let b_norm = grid.inner(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((Field::zeros(grid), NutrientStepInfo::default()));
    }
    let uv = u.values();
    let problem = CgProblem {
        grid: &grid,
        apply: |x: &[f64], out: &mut [f64]| {
            grid.apply_laplacian(x, out);
            for i in 0..x.len() {
                out[i] = x[i] - dt * out[i] + dt * uv[i] * x[i];
            }
        },
        project_mean: false,
        max_iter: 10 * grid.len(),
        what: "implicit nutrient solve",
    };
    let mut x = b.to_vec();
    let outcome = problem.solve(b, &mut x, tol * b_norm)?;

    let vmax = v.max();
    let slack = MAX_PRINCIPLE_SLACK * vmax;
    let mut clamped = 0.0;
    for (cell, xi) in x.iter_mut().enumerate() {
        if *xi < 0.0 || *xi > vmax {
            let target = xi.clamp(0.0, vmax);
            if (*xi - target).abs() > slack {
                return Err(Error::MaxPrinciple {
                    cell,
                    value: *xi,
                    max: vmax,
                });
            }
            clamped += (*xi - target).abs();
            *xi = target;
        }
    }
    let info = NutrientStepInfo {
        iterations: outcome.iterations,
        residual: outcome.residual,
        clamped_mass: clamped * grid.cell_volume(),
    };
    Ok((Field::from_values(grid, x)?, info))
}

/// Explicit conservative density step `u + dt Δ_h w`.
pub fn step_u(u: &Field, w: &Field, dt: f64) -> Result<Field> {
    u.check_same_grid(w)?;
    let increment = w.scale(dt);
    apply_increment(u, &increment, dt)
}

fn apply_increment(u: &Field, increment: &Field, dt: f64) -> Result<Field> {
    let mut next = laplacian_neumann(increment);
    for (cell, (n, &ui)) in next.values_mut().iter_mut().zip(u.values()).enumerate() {
        *n += ui;
        if *n < -1e-14 {
            return Err(Error::CflViolation {
                cell,
                value: *n,
                dt,
            });
        }
    }
    Ok(next)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    let e = (a - (s - bp)) + (b - bp);
    (s, e)
}

/// Advances `s` by one step of size `min(dt_max, stable_dt, t_end - t)`.
pub fn step(s: &State, m: &MotilitySpec, p: &SchemeParams) -> Result<State> {
    p.validate()?;
    let dt = p
        .dt_max
        .min(stable_dt(s.grid(), m, s.v_bound, p.cfl_safety))
        .min(p.t_end - s.t);
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "no time left to step: t = {} and t_end = {}",
            s.t, p.t_end
        )));
    }
    let t_next = if dt == p.t_end - s.t { p.t_end } else { s.t + dt };
    step_with_dt(s, m, dt, t_next, p.linear_tol)
}

/// One step of exactly `dt`, landing at `t_next`.
pub(crate) fn step_with_dt(
    s: &State,
    m: &MotilitySpec,
    dt: f64,
    t_next: f64,
    linear_tol: f64,
) -> Result<State> {
    let (v_next, _) = step_v_detailed(&s.u, &s.v, dt, linear_tol)?;
    let grid = *s.grid();

    let increment: Vec<f64> = s
        .u
        .values()
        .iter()
        .zip(v_next.values())
        .map(|(&u, &v)| dt * (u * m.gamma_clamped(v)))
        .collect();
    let increment = Field::from_values(grid, increment)?;
    let u_next = apply_increment(&s.u, &increment, dt)?;

    let mut a = s.a.clone();
    let mut carry = s.a_carry.clone();
    for ((ai, ci), &inc) in a.values_mut().iter_mut().zip(carry.iter_mut()).zip(increment.values()) {
        let y = inc + *ci;
        if y >= 0.0 {
            let (sum, err) = two_sum(*ai, y);
            *ai = sum;
            *ci = err;
        } else {
            // keep A monotone; the deficit stays in the carry
            *ci = y;
        }
    }

    let vol = grid.cell_volume();
    let absorbed: f64 = s
        .u
        .values()
        .iter()
        .zip(v_next.values())
        .map(|(u, v)| (u * v).abs())
        .sum::<f64>()
        * vol
        * dt;
    let defect = (integrate(&s.v) - integrate(&v_next) - absorbed).abs();

    Ok(State {
        t: t_next,
        u: u_next,
        v: v_next,
        a,
        a_carry: carry,
        uv_l1_cumulative: s.uv_l1_cumulative + absorbed,
        step_count: s.step_count + 1,
        v_bound: s.v_bound,
        last_dt: dt,
        linear_defect: s.linear_defect + defect,
    })
}

/// `||u - u_in - Δ_h A||_2`.
pub fn b9_residual(s: &State, u_in: &Field) -> f64 {
    let lap = s.laplacian_a();
    let vals: Vec<f64> = s
        .u
        .values()
        .iter()
        .zip(u_in.values())
        .zip(lap.values())
        .map(|((u, u0), l)| (u - u0) - l)
        .collect();
    s.grid().inner(&vals, &vals).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleSchedule {
    /// Record at these times (plus `t = 0` and the final state).
    Times(Vec<f64>),
    /// `count` uniform intervals over `[0, t_end]`.
    Uniform(usize),
    EveryStep,
}

impl SampleSchedule {
    fn times(&self, t_end: f64) -> Vec<f64> {
        let mut ts = match self {
            SampleSchedule::Times(ts) => ts.clone(),
            SampleSchedule::Uniform(n) => {
                let n = (*n).max(1);
                (1..=n).map(|k| t_end * k as f64 / n as f64).collect()
            }
            SampleSchedule::EveryStep => Vec::new(),
        };
        ts.retain(|&t| t > 0.0 && t <= t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Keep a full copy of the state in every sample.
    pub record_states: bool,
}

/// Scalar diagnostics at one sample time.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticSample {
    pub t: f64,
    pub mass_u: f64,
    pub v_l1: f64,
    pub v_l2: f64,
    pub v_linf: f64,
    pub grad_v_l2: f64,
    pub uv_l1_cumulative: f64,
    pub grad_a_sq: f64,
    pub a_l1: f64,
    pub b9_residual: f64,
    /// Dissipation residual of the step that ended here (0 at `t = 0`).
    pub energy_residual: f64,
    pub dt: f64,
    pub linear_defect: f64,
    #[serde(skip)]
    pub state: Option<State>,
}

impl DiagnosticSample {
    pub fn from_state(s: &State, u_in: &Field, energy_residual: f64, keep: bool) -> Self {
        DiagnosticSample {
            t: s.t,
            mass_u: integrate(&s.u),
            v_l1: l1_norm(&s.v),
            v_l2: l2_norm(&s.v),
            v_linf: linf_norm(&s.v),
            grad_v_l2: grad_sq_norm(&s.v).sqrt(),
            uv_l1_cumulative: s.uv_l1_cumulative,
            grad_a_sq: grad_sq_norm(&s.a),
            a_l1: l1_norm(&s.a),
            b9_residual: b9_residual(s, u_in),
            energy_residual,
            dt: s.last_dt,
            linear_defect: s.linear_defect,
            state: keep.then(|| s.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TEnd,
    VDepleted,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub initial: State,
    pub final_state: State,
    pub samples: Vec<DiagnosticSample>,
    pub stop_reason: StopReason,
    pub v_l1_stop: f64,
    pub stable_dt: f64,
    /// Largest per-step dissipation residual over the whole run.
    pub max_energy_residual: f64,
    /// Largest `|residual| / dt`-free magnitude seen, for reporting.
    pub min_energy_residual: f64,
}

/// A failed run together with the last state that was computed successfully.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub last_state: Box<State>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run failed at t = {} after {} steps: {}",
            self.last_state.t, self.last_state.step_count, self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn run(
    init_u: &Field,
    init_v: &Field,
    m: &MotilitySpec,
    p: &SchemeParams,
    schedule: &SampleSchedule,
    opts: RunOptions,
) -> std::result::Result<RunOutput, RunFailure> {
    run_observed(init_u, init_v, m, p, schedule, opts, &mut |_| {})
}

/// [`run`] with a callback invoked on the initial state and after every step.
pub fn run_observed(
    init_u: &Field,
    init_v: &Field,
    m: &MotilitySpec,
    p: &SchemeParams,
    schedule: &SampleSchedule,
    opts: RunOptions,
    observer: &mut dyn FnMut(&State),
) -> std::result::Result<RunOutput, RunFailure> {
    let initial = State::initial(init_u.clone(), init_v.clone()).map_err(|error| RunFailure {
        error,
        last_state: Box::new(State::initial(Field::zeros(*init_u.grid()), Field::zeros(*init_u.grid())).unwrap()),
    })?;
    let fail = |error: Error, s: &State| RunFailure {
        error,
        last_state: Box::new(s.clone()),
    };
    p.validate().map_err(|e| fail(e, &initial))?;
    m.check_admissible(initial.v_bound).map_err(|e| fail(e, &initial))?;

    let stop = p.resolved_v_l1_stop(init_v);
    let dt_stable = stable_dt(initial.grid(), m, initial.v_bound, p.cfl_safety);
    let every_step = matches!(schedule, SampleSchedule::EveryStep);
    let times = schedule.times(p.t_end);
    let mut next_sample = 0;

    let mut samples = vec![DiagnosticSample::from_state(&initial, init_u, 0.0, opts.record_states)];
    let mut state = initial.clone();
    observer(&state);
    let mut max_energy = f64::NEG_INFINITY;
    let mut min_energy = f64::INFINITY;

    let stop_reason = loop {
        if l1_norm(&state.v) <= stop {
            break StopReason::VDepleted;
        }
        if state.t >= p.t_end {
            break StopReason::TEnd;
        }
        let target = times.get(next_sample).copied().unwrap_or(p.t_end).min(p.t_end);
        let remaining = target - state.t;
        let mut dt = p.dt_max.min(dt_stable);
        // absorb remainders that round-off would otherwise leave as a sliver step
        let lands = dt >= remaining * (1.0 - 1e-12) || remaining - dt <= 1e-9 * dt;
        if lands {
            dt = remaining;
        }
        let t_next = if lands { target } else { state.t + dt };
        let next = step_with_dt(&state, m, dt, t_next, p.linear_tol).map_err(|e| fail(e, &state))?;
        let energy = energy_residual(&state, &next);
        max_energy = max_energy.max(energy);
        min_energy = min_energy.min(energy);
        state = next;
        observer(&state);

        let mut record = every_step;
        while next_sample < times.len() && times[next_sample] <= state.t {
            next_sample += 1;
            record = true;
        }
        if record {
            samples.push(DiagnosticSample::from_state(&state, init_u, energy, opts.record_states));
        } else if l1_norm(&state.v) <= stop || state.t >= p.t_end {
            samples.push(DiagnosticSample::from_state(&state, init_u, energy, opts.record_states));
        }
    };

    if max_energy == f64::NEG_INFINITY {
        max_energy = 0.0;
        min_energy = 0.0;
    }
    Ok(RunOutput {
        initial,
        final_state: state,
        samples,
        stop_reason,
        v_l1_stop: stop,
        stable_dt: dt_stable,
        max_energy_residual: max_energy,
        min_energy_residual: min_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::mean;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit(cells: usize) -> Grid {
        Grid::interval(1.0, cells).unwrap()
    }

    #[test]
    fn zero_nutrient_stays_zero() {
        let g = unit(8);
        let u = Field::constant(g, 2.0);
        let out = step_v(&u, &Field::zeros(g), 0.1, 1e-12).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_nutrient_step_is_scalar_backward_euler() {
        let g = unit(16);
        let out = step_v(&Field::constant(g, 2.0), &Field::constant(g, 1.0), 0.1, 1e-12).unwrap();
        for &x in out.values() {
            assert!((x - 1.0 / 1.2).abs() < 1e-14);
        }
    }

    #[test]
    fn density_step_trivial_cases() {
        let g = unit(10);
        let u = Field::from_fn(g, |x| 1.0 + x[0]);
        let same = step_u(&u, &Field::constant(g, 0.3), 0.01).unwrap();
        assert_eq!(same, u);
        let same = step_u(&u, &Field::zeros(g), 0.01).unwrap();
        assert_eq!(same, u);
    }

    #[test]
    fn too_large_density_step_is_reported() {
        let g = unit(10);
        let u = Field::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        let err = step_u(&u, &u, 1.0).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn stationary_data_only_advance_time() {
        let g = unit(32);
        let u = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let s0 = State::initial(u.clone(), Field::zeros(g)).unwrap();
        let m = MotilitySpec::power(1.0).unwrap();
        let p = SchemeParams { dt_max: 0.05, t_end: 10.0, ..Default::default() };
        let s1 = step(&s0, &m, &p).unwrap();
        assert_eq!(s1.u, u);
        assert!(s1.v.values().iter().all(|&x| x == 0.0));
        assert!(s1.a.values().iter().all(|&x| x == 0.0));
        assert_eq!(s1.t, 0.05);
    }

    #[test]
    fn uniform_data_follow_the_scalar_recursion() {
        let g = unit(12);
        let m_mass = 1.5;
        let mut s = State::initial(Field::constant(g, m_mass), Field::constant(g, 0.2)).unwrap();
        let m = MotilitySpec::power(1.0).unwrap();
        let p = SchemeParams { dt_max: 1e-3, t_end: 1.0, ..Default::default() };
        let mut scalar = 0.2;
        for _ in 0..50 {
            let dt = p.dt_max.min(stable_dt(&g, &m, s.v_bound, p.cfl_safety));
            s = step(&s, &m, &p).unwrap();
            scalar /= 1.0 + dt * m_mass;
            for &u in s.u.values() {
                assert_eq!(u, m_mass);
            }
            for &v in s.v.values() {
                assert!((v - scalar).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn run_on_stationary_data_returns_initial_density() {
        let g = unit(64);
        let u = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let m = MotilitySpec::power(1.0).unwrap();
        let p = SchemeParams { dt_max: 0.1, t_end: 10.0, ..Default::default() };
        let out = run(&u, &Field::zeros(g), &m, &p, &SampleSchedule::Uniform(10), RunOptions::default()).unwrap();
        assert_eq!(out.final_state.u, u);
        assert!(out.final_state.v.values().iter().all(|&x| x == 0.0));
        assert_eq!(out.stop_reason, StopReason::VDepleted);
    }

    #[test]
    fn uniform_run_decays_like_backward_euler() {
        let g = unit(16);
        let m = MotilitySpec::power(1.0).unwrap();
        let p = SchemeParams { dt_max: 0.01, t_end: 30.0, v_l1_stop: Some(0.0), ..Default::default() };
        let out = run(
            &Field::constant(g, 1.0),
            &Field::constant(g, 1.0),
            &m,
            &p,
            &SampleSchedule::Uniform(30),
            RunOptions::default(),
        )
        .unwrap();
        let v = l1_norm(&out.final_state.v);
        // backward Euler decays slower than e^{-t}: (1 + dt)^{-t/dt}
        assert!(v >= (-30.0_f64).exp());
        assert!(v <= (-30.0_f64).exp() * (1.0 + 0.01 * 30.0));
        assert!(out.final_state.uv_l1_cumulative <= 1.0 + 1e-8);
        assert!((out.final_state.uv_l1_cumulative + v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn samples_land_on_requested_times() {
        let g = unit(16);
        let u = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let v = Field::constant(g, 0.1);
        let m = MotilitySpec::power(1.0).unwrap();
        let p = SchemeParams { dt_max: 0.013, t_end: 1.0, v_l1_stop: Some(0.0), ..Default::default() };
        let times = vec![0.25, 0.5, 0.3, 1.0];
        let out = run(&u, &v, &m, &p, &SampleSchedule::Times(times), RunOptions::default()).unwrap();
        let ts: Vec<f64> = out.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.3, 0.5, 1.0]);
        assert_eq!(out.stop_reason, StopReason::TEnd);
    }

    #[test]
    fn equal_steps_leave_no_sliver_step() {
        let g = unit(32);
        let u = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let v = Field::constant(g, 0.1);
        let m = MotilitySpec::power(1.0).unwrap();
        for n in [200u64, 777, 2000] {
            let t_end = 0.5;
            let p = SchemeParams { dt_max: t_end / n as f64, t_end, v_l1_stop: Some(0.0), ..Default::default() };
            let out = run(&u, &v, &m, &p, &SampleSchedule::Times(vec![]), RunOptions::default()).unwrap();
            assert_eq!(out.final_state.step_count, n);
            assert_eq!(out.final_state.t, t_end);
            assert!(out.final_state.last_dt > 0.5 * p.dt_max);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn nutrient_step_keeps_maximum_principle(
            u in proptest::collection::vec(0.0f64..3.0, 20),
            v in proptest::collection::vec(0.0f64..1.0, 20),
            dt in 1e-4f64..1.0,
        ) {
            let g = unit(20);
            let u = Field::from_values(g, u).unwrap();
            let v = Field::from_values(g, v).unwrap();
            let next = step_v(&u, &v, dt, 1e-12).unwrap();
            prop_assert!(next.min() >= 0.0);
            prop_assert!(linf_norm(&next) <= linf_norm(&v));
        }

        #[test]
        fn one_step_is_conservative_and_accumulates_nonnegatively(
            u in proptest::collection::vec(0.0f64..3.0, 24),
            v in proptest::collection::vec(0.0f64..1.0, 24),
        ) {
            let g = Grid::rectangle([1.0, 0.5], [6, 4]).unwrap();
            let u = Field::from_values(g, u).unwrap();
            let v = Field::from_values(g, v).unwrap();
            let m = MotilitySpec::power(1.5).unwrap();
            let s0 = State::initial(u.clone(), v).unwrap();
            let p = SchemeParams { dt_max: 1.0, t_end: 1.0, ..Default::default() };
            let s1 = step(&s0, &m, &p).unwrap();
            prop_assert!((integrate(&s1.u) - integrate(&u)).abs() <= 1e-13);
            prop_assert!(s1.u.min() >= 0.0);
            prop_assert!(s1.a.values().iter().all(|&a| a >= 0.0));
            prop_assert!((mean(&s1.u) - mean(&u)).abs() <= 1e-12 * mean(&u).max(1e-300));
            prop_assert!(b9_residual(&s1, &u) <= 1e-10 * (1.0 + l2_norm(&u)));
        }
    }
}
