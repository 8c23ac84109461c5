//! Checks of the a-priori bounds, identities and limit statements along a
//! computed trajectory, and extraction of the large-time limit pair.
//!
//! Every check is a [`BoundCheck`] `lhs <= rhs` with a relative slack
//! `(rhs - lhs) / max(|rhs|, 1e-30)`; it passes when `slack >= -tolerance`.
//! Identities that should hold to round-off use tolerance 0 with the
//! round-off budget folded into `rhs`. Inequalities that only hold in the
//! continuum limit carry the discretization tolerance (5% by default).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elliptic::h1_dual_norm;
use crate::error::{Error, Result};
use crate::grid::{
    grad_sq_norm, inner, l1_norm, l2_norm, laplacian_neumann, linf_norm, lp_norm, mean, Field,
};
use crate::motility::MotilitySpec;
use crate::solver::{b9_residual, DiagnosticSample, State};

pub const DEFAULT_TOL_DISCRETIZATION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// The relation being checked, in words.
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational checks are reported but never fail a run.
    pub enforced: bool,
}

impl BoundCheck {
    pub fn new(name: &str, relation: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = (rhs - lhs) / rhs.abs().max(1e-30);
        BoundCheck {
            name: name.to_string(),
            relation: relation.to_string(),
            lhs,
            rhs,
            slack,
            tolerance,
            pass: slack >= -tolerance && lhs.is_finite() && rhs.is_finite(),
            enforced: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }

    /// Worst (smallest slack) of a non-empty family of the same check.
    pub fn worst(checks: impl IntoIterator<Item = BoundCheck>) -> Option<BoundCheck> {
        checks
            .into_iter()
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
    }
}

/// `||u_in||_inf ||v_in||_1 sup|gamma'|[0, ||v_in||_inf]`, the bound shared
/// by the gradient of `A` and by the distance from `u_in` to the limit.
pub fn product_bound(u_in: &Field, v_in: &Field, m: &MotilitySpec) -> f64 {
    linf_norm(u_in) * l1_norm(v_in) * m.sup_gamma_prime(linf_norm(v_in))
}

/// Mass conservation, maximum principle for `v`, and the bound on the total
/// absorbed nutrient.
pub fn check_conservation(s: &State, u_in: &Field, v_in: &Field) -> Vec<BoundCheck> {
    conservation_from(mean(&s.u), linf_norm(&s.v), s.uv_l1_cumulative, u_in, v_in)
}

fn conservation_from(mean_u: f64, v_linf: f64, uv_cum: f64, u_in: &Field, v_in: &Field) -> Vec<BoundCheck> {
    let m0 = mean(u_in);
    vec![
        BoundCheck::new(
            "mass_conservation",
            "|<u(t)> - <u_in>| <= 1e-12 |<u_in>|",
            (mean_u - m0).abs(),
            1e-12 * m0.abs(),
            0.0,
        ),
        BoundCheck::new(
            "v_max_principle",
            "||v(t)||_inf <= ||v_in||_inf",
            v_linf,
            linf_norm(v_in) + 1e-14,
            0.0,
        ),
        BoundCheck::new(
            "uv_absorption_total",
            "int_0^t ||uv||_1 <= ||v_in||_1",
            uv_cum,
            l1_norm(v_in) * (1.0 + 1e-8),
            0.0,
        ),
    ]
}

/// `||v(t)||_1 + int_0^t ||uv||_1 = ||v_in||_1` up to the linear-solve budget.
pub fn check_v_ledger(s: &State, v_in: &Field) -> BoundCheck {
    ledger_from(l1_norm(&s.v), s.uv_l1_cumulative, v_in)
}

fn ledger_from(v_l1: f64, uv_cum: f64, v_in: &Field) -> BoundCheck {
    BoundCheck::new(
        "v_l1_ledger",
        "| ||v(t)||_1 + int_0^t ||uv||_1 - ||v_in||_1 | <= 1e-8",
        (v_l1 + uv_cum - l1_norm(v_in)).abs(),
        1e-8,
        0.0,
    )
}

pub fn check_a_bounds(
    s: &State,
    u_in: &Field,
    v_in: &Field,
    m: &MotilitySpec,
    tol: f64,
) -> Vec<BoundCheck> {
    a_bounds_from(l1_norm(&s.a), grad_sq_norm(&s.a), u_in, v_in, m, tol)
}

fn a_bounds_from(
    a_l1: f64,
    grad_a_sq: f64,
    u_in: &Field,
    v_in: &Field,
    m: &MotilitySpec,
    tol: f64,
) -> Vec<BoundCheck> {
    let g = m.sup_gamma_prime(linf_norm(v_in));
    vec![
        BoundCheck::new(
            "a_l1_bound",
            "||A(t)||_1 <= ||v_in||_1 sup|gamma'|",
            a_l1,
            l1_norm(v_in) * g,
            tol,
        ),
        BoundCheck::new(
            "grad_a_bound",
            "||grad A(t)||_2^2 <= ||u_in||_inf ||v_in||_1 sup|gamma'|",
            grad_a_sq,
            product_bound(u_in, v_in, m),
            tol,
        ),
    ]
}

/// `u(t) - Δ_h A(t) = u_in` to round-off.
pub fn check_b9(s: &State, u_in: &Field) -> BoundCheck {
    b9_from(b9_residual(s, u_in), u_in)
}

fn b9_from(residual: f64, u_in: &Field) -> BoundCheck {
    BoundCheck::new(
        "accumulation_identity",
        "||u(t) - u_in - lap A(t)||_2 <= 1e-10 (1 + ||u_in||_2)",
        residual,
        1e-10 * (1.0 + l2_norm(u_in)),
        0.0,
    )
}

/// Which families [`trajectory_checks`] evaluates.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryChecks {
    pub conservation: bool,
    pub a_bounds: bool,
    pub identity: bool,
}

/// Conservation, ledger, `A` bounds and the accumulation identity at every
/// sample, reduced to the worst sample per check.
pub fn trajectory_checks(
    samples: &[DiagnosticSample],
    u_in: &Field,
    v_in: &Field,
    m: &MotilitySpec,
    which: TrajectoryChecks,
    tol: f64,
) -> Vec<BoundCheck> {
    let vol = u_in.grid().domain_volume();
    let mut per_sample: Vec<Vec<BoundCheck>> = Vec::new();
    for s in samples {
        let mut row = Vec::new();
        if which.conservation {
            row.extend(conservation_from(s.mass_u / vol, s.v_linf, s.uv_l1_cumulative, u_in, v_in));
            row.push(ledger_from(s.v_l1, s.uv_l1_cumulative, v_in));
        }
        if which.a_bounds {
            row.extend(a_bounds_from(s.a_l1, s.grad_a_sq, u_in, v_in, m, tol));
        }
        if which.identity {
            row.push(b9_from(s.b9_residual, u_in));
        }
        per_sample.push(row);
    }
    let Some(first) = per_sample.first() else {
        return Vec::new();
    };
    (0..first.len())
        .filter_map(|k| BoundCheck::worst(per_sample.iter().map(|r| r[k].clone())))
        .collect()
}

/// Discrete `L^2` dissipation residual of the step `prev -> next`:
/// `(||v+||^2 - ||v||^2)/dt + 2 ||grad v+||^2 + 2 ||sqrt(u) v+||^2`.
///
/// For an exact backward-Euler solve it equals `-||v+ - v||^2 / dt <= 0`.
pub fn energy_residual(prev: &State, next: &State) -> f64 {
    let dt = next.last_dt;
    if dt <= 0.0 {
        return 0.0;
    }
    let grid = *next.grid();
    let vp = next.v.values();
    let v = prev.v.values();
    let d2 = grid.inner(vp, vp) - grid.inner(v, v);
    let absorb: f64 = prev
        .u
        .values()
        .iter()
        .zip(vp)
        .map(|(u, x)| (u * x * x).abs())
        .sum::<f64>()
        * grid.cell_volume();
    d2 / dt + 2.0 * grad_sq_norm(&next.v) + 2.0 * absorb
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    pub v_l1: f64,
    pub envelope_rhs: f64,
    /// `int_0^t e^{M(s-t)} ||grad v(s)||_2 ds` by the trapezoid rule.
    pub tail: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayDiagnostic {
    pub c1: f64,
    pub mass: f64,
    pub tolerance: f64,
    pub rows: Vec<DecayRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayOutcome {
    Evaluated(DecayDiagnostic),
    /// The envelope needs a positive mean density.
    SkippedZeroMass,
}

/// Envelope `||v_in||_1 e^{-Mt} + c1 int_0^t e^{M(s-t)} ||grad v(s)||_2 ds`
/// with `c1 = ||u_in||_2 + sqrt(||u_in||_inf ||v_in||_1 sup|gamma'|)`.
///
/// The time integral uses the trapezoid rule over the sample times, so
/// samples must start at `t = 0`.
pub fn decay_envelope(
    samples: &[DiagnosticSample],
    u_in: &Field,
    v_in: &Field,
    m: &MotilitySpec,
    tol: f64,
) -> DecayOutcome {
    let mass = mean(u_in);
    if !(mass > 0.0) {
        return DecayOutcome::SkippedZeroMass;
    }
    let c1 = l2_norm(u_in) + product_bound(u_in, v_in, m).sqrt();
    let v0 = l1_norm(v_in);
    let mut rows = Vec::with_capacity(samples.len());
    let mut tail = 0.0;
    let mut prev: Option<&DiagnosticSample> = None;
    for s in samples {
        if let Some(p) = prev {
            let gap = s.t - p.t;
            let damp = (-mass * gap).exp();
            tail = damp * tail + 0.5 * gap * (damp * p.grad_v_l2 + s.grad_v_l2);
        }
        let envelope_rhs = v0 * (-mass * s.t).exp() + c1 * tail;
        rows.push(DecayRow {
            t: s.t,
            v_l1: s.v_l1,
            envelope_rhs,
            tail,
            pass: s.v_l1 <= envelope_rhs * (1.0 + tol),
        });
        prev = Some(s);
    }
    DecayOutcome::Evaluated(DecayDiagnostic {
        c1,
        mass,
        tolerance: tol,
        rows,
    })
}

impl DecayDiagnostic {
    /// Worst ratio `||v||_1 / envelope` over the rows, as a check.
    pub fn envelope_check(&self) -> BoundCheck {
        let worst = self
            .rows
            .iter()
            .map(|r| {
                if r.v_l1 == 0.0 {
                    0.0
                } else {
                    r.v_l1 / r.envelope_rhs
                }
            })
            .fold(0.0_f64, f64::max);
        BoundCheck::new(
            "decay_envelope",
            "||v(t)||_1 <= ||v_in||_1 e^{-Mt} + c1 int e^{M(s-t)} ||grad v||_2",
            worst,
            1.0,
            self.tolerance,
        )
    }

    /// The weighted gradient integral must decay to zero: after its peak it
    /// may not grow again.
    pub fn tail_check(&self) -> BoundCheck {
        let peak = self
            .rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.tail.total_cmp(&b.1.tail))
            .map_or(0, |(k, _)| k);
        let growth = self.rows[peak..]
            .windows(2)
            .filter(|w| w[0].tail > 0.0)
            .map(|w| w[1].tail / w[0].tail)
            .fold(0.0_f64, f64::max);
        BoundCheck::new(
            "envelope_tail_decay",
            "int_0^t e^{M(s-t)} ||grad v||_2 ds is non-increasing after its peak",
            growth,
            1.0,
            1e-9,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitRecord {
    pub a_inf: Field,
    pub u_inf: Field,
    /// `||u_inf - u_in||_(H^1)'`.
    pub dist_dual: f64,
    /// `||u_inf - <u_inf>||_(H^1)'`.
    pub nonconst_dual: f64,
    /// `||u_in - <u_in>||_(H^1)'`.
    pub u_in_dual: f64,
    /// `u_in_dual - dist_dual`, the triangle-inequality lower bound on
    /// `nonconst_dual`.
    pub nonconst_lower_bound: f64,
    pub certified_nonconstant: bool,
    pub mean_defect: f64,
    pub min_u_inf: f64,
}

/// Builds `A_inf = A(t_final)` and `u_inf = u_in + Δ_h A_inf` from a state
/// whose nutrient is exhausted below `v_l1_stop`.
pub fn extract_limit(s: &State, u_in: &Field, v_l1_stop: f64, tol: f64) -> Result<LimitRecord> {
    let v_l1 = l1_norm(&s.v);
    if v_l1 > v_l1_stop {
        return Err(Error::NotAtLimit {
            v_l1,
            threshold: v_l1_stop,
        });
    }
    let a_inf = s.a.clone();
    let u_inf = u_in.add(&s.laplacian_a())?;
    let dist_dual = h1_dual_norm(&u_inf.sub(u_in)?, tol)?;
    let nonconst_dual = h1_dual_norm(&u_inf.shift(-mean(&u_inf)), tol)?;
    let u_in_dual = h1_dual_norm(&u_in.shift(-mean(u_in)), tol)?;
    let lower = u_in_dual - dist_dual;
    let certified = lower > 0.0 && nonconst_dual >= lower - 1e-9;
    Ok(LimitRecord {
        mean_defect: (mean(&u_inf) - mean(u_in)).abs(),
        min_u_inf: u_inf.min(),
        a_inf,
        u_inf,
        dist_dual,
        nonconst_dual,
        u_in_dual,
        nonconst_lower_bound: lower,
        certified_nonconstant: certified,
    })
}

/// Mean preservation and nonnegativity of the extracted limit.
pub fn check_limit(lr: &LimitRecord, u_in: &Field) -> Vec<BoundCheck> {
    vec![
        BoundCheck::new(
            "limit_mass",
            "|<u_inf> - <u_in>| <= 1e-10 |<u_in>|",
            lr.mean_defect,
            1e-10 * mean(u_in).abs(),
            0.0,
        ),
        BoundCheck::new(
            "limit_nonnegative",
            "-min u_inf <= 1e-10",
            -lr.min_u_inf,
            1e-10,
            0.0,
        ),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prop2Outcome {
    /// `||u_inf - u_in||^2 <= product bound`.
    pub dist: BoundCheck,
    /// `product bound < ||u_in - <u_in>||^2`; informational.
    pub smalldist: BoundCheck,
    pub smalldist_holds: bool,
    /// True when the smallness condition holds and the limit is certified
    /// non-constant.
    pub nonconstant: bool,
}

pub fn check_prop2(
    lr: &LimitRecord,
    u_in: &Field,
    v_in: &Field,
    m: &MotilitySpec,
    tol: f64,
) -> Prop2Outcome {
    let bound = product_bound(u_in, v_in, m);
    let dist = BoundCheck::new(
        "limit_distance",
        "||u_inf - u_in||_(H1)'^2 <= ||u_in||_inf ||v_in||_1 sup|gamma'|",
        lr.dist_dual * lr.dist_dual,
        bound,
        tol,
    );
    let spread = lr.u_in_dual * lr.u_in_dual;
    let smalldist = BoundCheck::new(
        "smallness_condition",
        "||u_in||_inf ||v_in||_1 sup|gamma'| < ||u_in - <u_in>||_(H1)'^2",
        bound,
        spread,
        0.0,
    )
    .informational();
    let holds = bound < spread;
    Prop2Outcome {
        dist,
        smalldist,
        smalldist_holds: holds,
        nonconstant: holds && lr.certified_nonconstant,
    }
}

/// Certificate check, only meaningful when the smallness condition holds.
pub fn check_nonconstant_certificate(lr: &LimitRecord) -> BoundCheck {
    BoundCheck::new(
        "nonconstant_certificate",
        "||u_in - <u_in>|| - ||u_inf - u_in|| <= ||u_inf - <u_inf>||, lower bound > 0",
        lr.nonconst_lower_bound.max(0.0) - 1e-9,
        lr.nonconst_dual,
        0.0,
    )
}

/// Neumann eigenmode `cos(pi k x / Lx)` (times `cos(pi k y / Ly)` in 2D).
pub fn test_mode_field(grid: &crate::grid::Grid, mode: u32) -> Field {
    let k = mode as f64;
    let ext = grid.extent().to_vec();
    let dim = grid.dim();
    Field::from_fn(*grid, |x| {
        let mut val = (PI * k * x[0] / ext[0]).cos();
        if dim == 2 {
            val *= (PI * k * x[1] / ext[1]).cos();
        }
        val
    })
}

/// `|<u(t) - u_in, theta> - int_0^t <u gamma(v), Δ_h theta> ds|` at the last
/// sample, with the time integral taken by the trapezoid rule over the
/// samples. Samples must carry states.
pub fn weak_form_residual(
    samples: &[DiagnosticSample],
    u_in: &Field,
    m: &MotilitySpec,
    test_mode: u32,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::MissingStates);
    }
    let mut acc = WeakFormAccumulator::new(u_in, m, test_mode);
    for s in samples {
        acc.push(s.state.as_ref().ok_or(Error::MissingStates)?)?;
    }
    acc.residual()
}

/// Streaming form of [`weak_form_residual`]: feed states in time order.
#[derive(Clone, Debug)]
pub struct WeakFormAccumulator {
    u_in: Field,
    m: MotilitySpec,
    theta: Field,
    lap_theta: Field,
    integral: f64,
    last: Option<(f64, f64)>,
    lhs: f64,
}

impl WeakFormAccumulator {
    pub fn new(u_in: &Field, m: &MotilitySpec, test_mode: u32) -> Self {
        let theta = test_mode_field(u_in.grid(), test_mode);
        WeakFormAccumulator {
            u_in: u_in.clone(),
            m: m.clone(),
            lap_theta: laplacian_neumann(&theta),
            theta,
            integral: 0.0,
            last: None,
            lhs: 0.0,
        }
    }

    pub fn push(&mut self, s: &State) -> Result<()> {
        let flux = s.u.zip_map(&s.v, |u, v| u * self.m.gamma_clamped(v))?;
        let cur = inner(&flux, &self.lap_theta)?;
        if let Some((t, prev)) = self.last {
            self.integral += 0.5 * (s.t - t) * (prev + cur);
        }
        self.last = Some((s.t, cur));
        self.lhs = inner(&s.u.sub(&self.u_in)?, &self.theta)?;
        Ok(())
    }

    pub fn residual(&self) -> Result<f64> {
        if self.last.is_none() {
            return Err(Error::MissingStates);
        }
        Ok((self.lhs - self.integral).abs())
    }
}

/// Same residual with the time integral replaced by the accumulated `A`,
/// i.e. the scheme's own quadrature; vanishes to round-off.
pub fn weak_form_residual_accumulated(s: &State, u_in: &Field, test_mode: u32) -> Result<f64> {
    let theta = test_mode_field(u_in.grid(), test_mode);
    let lhs = inner(&s.u.sub(u_in)?, &theta)?;
    let rhs = inner(&s.laplacian_a(), &theta)?;
    Ok((lhs - rhs).abs())
}

/// Final `||v||_p` against the threshold implied by the stop criterion,
/// `V^{1-1/p} stop^{1/p}`, plus monotone decay of `||v||_1`.
pub fn check_v_decay(
    samples: &[DiagnosticSample],
    final_state: &State,
    p_values: &[f64],
    v_l1_stop: f64,
) -> Result<Vec<BoundCheck>> {
    let v_sup = final_state.v_bound;
    let mut checks = Vec::with_capacity(p_values.len() + 1);
    for &p in p_values {
        let norm = lp_norm(&final_state.v, p)?;
        let threshold = if p.is_infinite() {
            v_sup
        } else {
            v_sup.powf(1.0 - 1.0 / p) * v_l1_stop.powf(1.0 / p)
        };
        checks.push(BoundCheck::new(
            &format!("v_decay_l{p}"),
            "final ||v||_p <= ||v_in||_inf^(1-1/p) v_l1_stop^(1/p)",
            norm,
            threshold * (1.0 + 1e-12),
            0.0,
        ));
    }
    let growth = samples
        .windows(2)
        .filter(|w| w[0].v_l1 > 0.0)
        .map(|w| w[1].v_l1 / w[0].v_l1)
        .fold(0.0_f64, f64::max);
    checks.push(BoundCheck::new(
        "v_l1_monotone",
        "||v(t)||_1 is non-increasing",
        growth,
        1.0,
        1e-9,
    ));
    Ok(checks)
}

/// Monotone approach of `A(t)` to its final value and a small last
/// increment. Needs at least three snapshots (including the final one);
/// returns `None` otherwise.
pub fn check_a_convergence(snapshots: &[&Field], rel_tol: f64) -> Result<Option<Vec<BoundCheck>>> {
    if snapshots.len() < 3 {
        return Ok(None);
    }
    let last = snapshots[snapshots.len() - 1];
    let dists = snapshots
        .iter()
        .map(|a| Ok(l2_norm(&a.sub(last)?)))
        .collect::<Result<Vec<f64>>>()?;
    let growth = dists
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0_f64, f64::max);
    let final_increment = dists[dists.len() - 2];
    Ok(Some(vec![
        BoundCheck::new(
            "a_monotone_approach",
            "||A(t) - A_final||_2 is non-increasing",
            growth,
            1.0,
            1e-12,
        ),
        BoundCheck::new(
            "a_final_increment",
            "||A(t_last sample) - A_final||_2 <= tol ||A_final||_2",
            final_increment,
            rel_tol * l2_norm(last),
            0.0,
        ),
    ]))
}

/// Distance in the dual norm from `u(t)` to the extracted limit at the last
/// sample before the final one, against the initial distance. A numerical
/// proxy for the weak convergence of `u`; reported, not enforced.
pub fn check_u_dual_convergence(
    samples: &[DiagnosticSample],
    lr: &LimitRecord,
    tol: f64,
) -> Result<Option<BoundCheck>> {
    let states: Vec<&State> = samples.iter().filter_map(|s| s.state.as_ref()).collect();
    if states.len() < 3 {
        return Ok(None);
    }
    let d0 = lr.dist_dual;
    let late = states[states.len() - 2];
    let d = h1_dual_norm(&late.u.sub(&lr.u_inf)?, tol)?;
    Ok(Some(
        BoundCheck::new(
            "u_dual_convergence",
            "||u(t_late) - u_inf||_(H1)' <= 1e-3 ||u_in - u_inf||_(H1)'",
            d,
            1e-3 * d0,
            0.0,
        )
        .informational(),
    ))
}
