//! Evaluation of a finished run into a verification report, and its text
//! and CSV renderings.

use serde::{Deserialize, Serialize};

use crate::config::{Scenario, ScenarioConfig};
use crate::diagnostics::{
    check_a_convergence, check_limit, check_nonconstant_certificate, check_prop2,
    check_u_dual_convergence, check_v_decay, decay_envelope, product_bound, trajectory_checks,
    weak_form_residual, weak_form_residual_accumulated, BoundCheck, DecayOutcome, LimitRecord,
    TrajectoryChecks,
};
use crate::error::Result;
use crate::grid::{grad_sq_norm, l1_norm, l2_norm, Field};
use crate::snapshot::fmt17;
use crate::solver::{RunOutput, StopReason};

pub const REPORT_FILE: &str = "report.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const ENVELOPE_FILE: &str = "envelope.csv";

pub const TIMESERIES_HEADER: [&str; 11] = [
    "t",
    "mass_u",
    "v_l1",
    "v_l2",
    "v_linf",
    "uv_l1_cumulative",
    "grad_A_sq",
    "A_l1",
    "b9_residual",
    "energy_residual",
    "dt",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stop_reason: StopReason,
    pub t_final: f64,
    pub steps: u64,
    pub stable_dt: f64,
    pub v_l1_stop: f64,
    pub samples: usize,
    pub max_energy_residual: f64,
    pub min_energy_residual: f64,
}

/// Scalars of the extracted limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub dist_dual: f64,
    pub dist_dual_sq: f64,
    pub nonconst_dual: f64,
    pub u_in_dual: f64,
    pub u_in_dual_sq: f64,
    pub nonconst_lower_bound: f64,
    pub product_bound: f64,
    pub smalldist_holds: bool,
    pub certified_nonconstant: bool,
    pub mean_defect: f64,
    pub min_u_inf: f64,
    pub grad_a_inf_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakFormSummary {
    pub mode: u32,
    /// Against the scheme's own time quadrature (round-off).
    pub accumulated: f64,
    /// Against the trapezoid rule over the samples (discretization error).
    pub trapezoid: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub run: RunSummary,
    pub checks: Vec<BoundCheck>,
    pub notes: Vec<String>,
    pub limit: Option<LimitSummary>,
    pub decay: Option<DecayOutcome>,
    pub weak_form: Option<WeakFormSummary>,
    pub all_pass: bool,
}

impl RunReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| c.enforced && !c.pass)
    }
}

/// Round-off budget for the sign of the dissipation residual: the implicit
/// step makes it `-||v+ - v||^2 / dt`, so positive values can only come from
/// the inexact linear solve.
fn dissipation_budget(out: &RunOutput, v_in: &Field) -> f64 {
    let dt_min = out
        .samples
        .iter()
        .map(|s| s.dt)
        .filter(|&d| d > 0.0)
        .fold(out.stable_dt.min(1.0), f64::min);
    1e-10 * l2_norm(v_in).powi(2).max(f64::MIN_POSITIVE) / dt_min.max(f64::MIN_POSITIVE)
}

/// Evaluates every enabled check on a finished run.
pub fn evaluate(sc: &Scenario, out: &RunOutput) -> Result<(RunReport, Option<LimitRecord>)> {
    let c = &sc.config.checks;
    let tol = c.tol_discretization;
    let poisson_tol = sc.config.scheme.poisson_tol;
    let (u_in, v_in, m) = (&sc.u_in, &sc.v_in, &sc.motility);
    let mut checks = trajectory_checks(
        &out.samples,
        u_in,
        v_in,
        m,
        TrajectoryChecks {
            conservation: c.conservation,
            a_bounds: c.a_bounds,
            identity: c.identity,
        },
        tol,
    );
    let mut notes = Vec::new();

    if c.dissipation {
        checks.push(BoundCheck::new(
            "dissipation_sign",
            "max over steps of (||v+||^2 - ||v||^2)/dt + 2||grad v+||^2 + 2||sqrt(u) v+||^2 <= 0",
            out.max_energy_residual,
            dissipation_budget(out, v_in),
            0.0,
        ));
    }

    let mut decay = None;
    if c.decay {
        let d = decay_envelope(&out.samples, u_in, v_in, m, tol);
        match &d {
            DecayOutcome::Evaluated(dd) => {
                checks.push(dd.envelope_check());
                checks.push(dd.tail_check());
            }
            DecayOutcome::SkippedZeroMass => {
                notes.push("decay envelope skipped: the initial density has zero mass".into())
            }
        }
        decay = Some(d);
    }

    let mut limit = None;
    let mut record = None;
    if c.limit {
        match out.stop_reason {
            StopReason::VDepleted => {
                let lr = crate::diagnostics::extract_limit(&out.final_state, u_in, out.v_l1_stop, poisson_tol)?;
                checks.extend(check_limit(&lr, u_in));
                let bound = product_bound(u_in, v_in, m);
                let grad_a_inf_sq = grad_sq_norm(&lr.a_inf);
                checks.push(BoundCheck::new(
                    "grad_a_limit_bound",
                    "||grad A_inf||_2^2 <= ||u_in||_inf ||v_in||_1 sup|gamma'|",
                    grad_a_inf_sq,
                    bound,
                    tol,
                ));
                let p2 = check_prop2(&lr, u_in, v_in, m, tol);
                checks.push(p2.dist.clone());
                checks.push(p2.smalldist.clone());
                if p2.smalldist_holds {
                    checks.push(check_nonconstant_certificate(&lr));
                }
                checks.extend(check_v_decay(&out.samples, &out.final_state, &c.p_values, out.v_l1_stop)?);
                let snaps: Vec<&Field> = out.samples.iter().filter_map(|s| s.state.as_ref().map(|st| &st.a)).collect();
                match check_a_convergence(&snaps, c.a_convergence_tol)? {
                    Some(cs) => checks.extend(cs),
                    None => notes.push("A convergence not checked: fewer than three recorded samples".into()),
                }
                if let Some(cu) = check_u_dual_convergence(&out.samples, &lr, poisson_tol)? {
                    checks.push(cu);
                }
                limit = Some(LimitSummary {
                    dist_dual: lr.dist_dual,
                    dist_dual_sq: lr.dist_dual * lr.dist_dual,
                    nonconst_dual: lr.nonconst_dual,
                    u_in_dual: lr.u_in_dual,
                    u_in_dual_sq: lr.u_in_dual * lr.u_in_dual,
                    nonconst_lower_bound: lr.nonconst_lower_bound,
                    product_bound: bound,
                    smalldist_holds: p2.smalldist_holds,
                    certified_nonconstant: p2.nonconstant,
                    mean_defect: lr.mean_defect,
                    min_u_inf: lr.min_u_inf,
                    grad_a_inf_sq,
                });
                record = Some(lr);
            }
            StopReason::TEnd => {
                let v_l1 = l1_norm(&out.final_state.v);
                checks.push(BoundCheck::new(
                    "limit_reached",
                    "||v(t_end)||_1 <= v_l1_stop",
                    v_l1,
                    out.v_l1_stop,
                    0.0,
                ));
                notes.push(format!(
                    "run stopped at t_end = {} with ||v||_1 = {v_l1:.3e} above the stop threshold {:.3e}; increase t_end to extract the limit",
                    out.final_state.t, out.v_l1_stop
                ));
            }
        }
    }

    let mut weak = None;
    if c.weak_form {
        let accumulated = weak_form_residual_accumulated(&out.final_state, u_in, c.weak_form_mode)?;
        let trapezoid = if out.samples.iter().all(|s| s.state.is_some()) {
            Some(weak_form_residual(&out.samples, u_in, m, c.weak_form_mode)?)
        } else {
            None
        };
        checks.push(BoundCheck::new(
            "weak_form_identity",
            "|<u(t) - u_in, theta> - <A(t), lap theta>| <= 1e-10 (1 + ||u_in||_2)",
            accumulated,
            1e-10 * (1.0 + l2_norm(u_in)),
            0.0,
        ));
        weak = Some(WeakFormSummary {
            mode: c.weak_form_mode,
            accumulated,
            trapezoid,
        });
    }

    let all_pass = checks.iter().all(|c| !c.enforced || c.pass);
    let fs = &out.final_state;
    Ok((
        RunReport {
            schema_version: crate::config::SCHEMA_VERSION,
            config: sc.config.clone(),
            run: RunSummary {
                stop_reason: out.stop_reason,
                t_final: fs.t,
                steps: fs.step_count,
                stable_dt: out.stable_dt,
                v_l1_stop: out.v_l1_stop,
                samples: out.samples.len(),
                max_energy_residual: out.max_energy_residual,
                min_energy_residual: out.min_energy_residual,
            },
            checks,
            notes,
            limit,
            decay,
            weak_form: weak,
            all_pass,
        },
        record,
    ))
}

/// The time series as CSV text, 17 significant digits per value.
pub fn timeseries_csv(out: &RunOutput) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TIMESERIES_HEADER)?;
    for s in &out.samples {
        let row = [
            s.t,
            s.mass_u,
            s.v_l1,
            s.v_l2,
            s.v_linf,
            s.uv_l1_cumulative,
            s.grad_a_sq,
            s.a_l1,
            s.b9_residual,
            s.energy_residual,
            s.dt,
        ];
        w.write_record(row.iter().map(|x| fmt17(*x)))?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("ascii"))
}

/// `t, v_l1, envelope_rhs` rows for plotting; `None` when the envelope was
/// not evaluated.
pub fn envelope_csv(report: &RunReport) -> Result<Option<String>> {
    let Some(DecayOutcome::Evaluated(d)) = &report.decay else {
        return Ok(None);
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "v_l1", "envelope_rhs"])?;
    for r in &d.rows {
        w.write_record([fmt17(r.t), fmt17(r.v_l1), fmt17(r.envelope_rhs)])?;
    }
    Ok(Some(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("ascii")))
}

/// Plain-text table of the checks.
pub fn render_table(report: &RunReport) -> String {
    let name_w = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut s = format!(
        "{:<name_w$}  {:>12}  {:>12}  {:>10}  {:<6}  relation\n",
        "check", "lhs", "rhs", "slack", "status"
    );
    for c in &report.checks {
        let status = match (c.pass, c.enforced) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        s.push_str(&format!(
            "{:<name_w$}  {:>12.5e}  {:>12.5e}  {:>10.3e}  {:<6}  {}\n",
            c.name, c.lhs, c.rhs, c.slack, status, c.relation
        ));
    }
    s.push_str(&format!(
        "\nstop: {:?} at t = {} after {} steps; overall: {}\n",
        report.run.stop_reason,
        report.run.t_final,
        report.run.steps,
        if report.all_pass { "PASS" } else { "FAIL" }
    ));
    if let Some(l) = &report.limit {
        s.push_str(&format!(
            "limit: dist^2 = {:.6e}, product bound = {:.6e}, ||u_in - <u_in>||^2 = {:.6e}, smallness {}, nonconstant certified {}\n",
            l.dist_dual_sq, l.product_bound, l.u_in_dual_sq, l.smalldist_holds, l.certified_nonconstant
        ));
    }
    for n in &report.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s
}
