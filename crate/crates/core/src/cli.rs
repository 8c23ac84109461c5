//! The batch commands behind the `ksdeg` binary: `run`, `verify`, `sweep`
//! and `report`. Each returns a [`CommandOutcome`]; the binary maps it to an
//! exit status.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FieldSpec, GammaSpec, Overrides, Scenario, ScenarioConfig, SnapshotMode};
use crate::diagnostics::product_bound;
use crate::error::{Error, Result};
use crate::report::{
    envelope_csv, evaluate, render_table, timeseries_csv, RunReport, ENVELOPE_FILE, REPORT_FILE,
    TIMESERIES_FILE,
};
use crate::snapshot::{fmt17, write_snapshot};
use crate::solver::{run, RunOptions, RunOutput, State};
use crate::study::{self_convergence, ConvergenceStudy};

pub const VERIFY_FILE: &str = "verify.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandOutcome {
    Pass,
    ChecksFailed,
}

impl CommandOutcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            CommandOutcome::Pass
        } else {
            CommandOutcome::ChecksFailed
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            CommandOutcome::Pass => 0,
            CommandOutcome::ChecksFailed => 1,
        }
    }
}

/// Exit code for errors (bad config, solver failure, I/O).
pub const EXIT_ERROR: i32 = 2;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_state(dir: &Path, tag: &str, s: &State) -> Result<()> {
    write_snapshot(&dir.join(format!("u_{tag}.csv")), &s.u)?;
    write_snapshot(&dir.join(format!("v_{tag}.csv")), &s.v)?;
    write_snapshot(&dir.join(format!("A_{tag}.csv")), &s.a)
}

pub fn load(config: &Path, o: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_path(config)?;
    cfg.apply(o);
    Ok(cfg)
}

/// Runs a scenario and evaluates its checks without writing anything.
pub fn simulate(sc: &Scenario) -> Result<(RunOutput, RunReport)> {
    let out = run(
        &sc.u_in,
        &sc.v_in,
        &sc.motility,
        &sc.params,
        &sc.schedule,
        RunOptions { record_states: true },
    )
    .map_err(|f| f.error)?;
    let (report, _) = evaluate(sc, &out)?;
    Ok((out, report))
}

/// Result of [`cmd_run`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub report: RunReport,
    pub outcome: CommandOutcome,
}

/// Executes the scenario and writes `timeseries.csv`, `report.json`,
/// `envelope.csv` and the snapshots under the output directory. On a solver
/// failure the last good state is written as `failure_{u,v,A}.csv` before
/// the error is returned.
pub fn cmd_run(config: &Path, o: &Overrides) -> Result<RunArtifacts> {
    let cfg = load(config, o)?;
    let sc = cfg.build()?;
    let dir = cfg.output_dir(Some(config));
    create_dir(&dir)?;
    let out = match run(
        &sc.u_in,
        &sc.v_in,
        &sc.motility,
        &sc.params,
        &sc.schedule,
        RunOptions { record_states: true },
    ) {
        Ok(out) => out,
        Err(f) => {
            write_state(&dir, "failure", &f.last_state)?;
            return Err(f.error);
        }
    };
    let (report, _) = evaluate(&sc, &out)?;
    write(&dir.join(TIMESERIES_FILE), &timeseries_csv(&out)?)?;
    write(&dir.join(REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;
    if let Some(env) = envelope_csv(&report)? {
        write(&dir.join(ENVELOPE_FILE), &env)?;
    }
    let snaps = dir.join("snapshots");
    create_dir(&snaps)?;
    write_state(&snaps, "initial", &out.initial)?;
    write_state(&snaps, "final", &out.final_state)?;
    if cfg.output.snapshots == SnapshotMode::All {
        let mut index = String::from("sample,t\n");
        for (k, s) in out.samples.iter().enumerate() {
            if let Some(st) = &s.state {
                write_state(&snaps, &format!("{k:05}"), st)?;
                index.push_str(&format!("{k},{}\n", fmt17(s.t)));
            }
        }
        write(&snaps.join("index.csv"), &index)?;
    }
    Ok(RunArtifacts {
        dir,
        outcome: CommandOutcome::from_pass(report.all_pass),
        report,
    })
}

/// Self-convergence study at the config's `[verify]` settings; writes
/// `verify.json` into the output directory.
pub fn cmd_verify(config: &Path, o: &Overrides) -> Result<(ConvergenceStudy, CommandOutcome)> {
    let mut cfg = load(config, o)?;
    // --t-end shortens the study, not a long limit run
    let t_end = o.t_end.unwrap_or(cfg.verify.t_end);
    cfg.verify.t_end = t_end;
    let study = self_convergence(&cfg, t_end)?;
    let dir = cfg.output_dir(Some(config));
    create_dir(&dir)?;
    write(&dir.join(VERIFY_FILE), &serde_json::to_string_pretty(&study)?)?;
    let pass = study.pass;
    Ok((study, CommandOutcome::from_pass(pass)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Constant initial nutrient level.
    VIn,
    /// Exponent of a power motility.
    Alpha,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v_in" => Ok(SweepParam::VIn),
            "alpha" => Ok(SweepParam::Alpha),
            _ => Err(Error::InvalidArgument(format!("unknown sweep parameter {s:?} (expected v_in or alpha)"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::VIn => "v_in",
            SweepParam::Alpha => "alpha",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepParam::VIn => cfg.initial.v = FieldSpec::Constant { value },
            SweepParam::Alpha => cfg.gamma = GammaSpec::Power { alpha: value },
        }
    }
}

/// One aggregate row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    /// `pass`, `checks_failed`, or `error: <message>`.
    pub status: String,
    pub dist_dual_sq: Option<f64>,
    pub product_bound: Option<f64>,
    pub smalldist_holds: Option<bool>,
    pub certified_nonconstant: Option<bool>,
    pub nonconst_dual: Option<f64>,
    pub u_in_dual_sq: Option<f64>,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "param",
    "value",
    "status",
    "dist_dual_sq",
    "product_bound",
    "smalldist_holds",
    "certified_nonconstant",
    "nonconst_dual",
    "u_in_dual_sq",
];

fn sweep_one(cfg: &ScenarioConfig, param: SweepParam, value: f64) -> SweepRow {
    let mut cfg = cfg.clone();
    param.apply(&mut cfg, value);
    let mut row = SweepRow {
        param: param.name().into(),
        value,
        status: String::new(),
        dist_dual_sq: None,
        product_bound: None,
        smalldist_holds: None,
        certified_nonconstant: None,
        nonconst_dual: None,
        u_in_dual_sq: None,
    };
    let result = cfg.build().and_then(|sc| {
        let bound = product_bound(&sc.u_in, &sc.v_in, &sc.motility);
        simulate(&sc).map(|(_, rep)| (bound, rep))
    });
    match result {
        Ok((bound, rep)) => {
            row.status = if rep.all_pass { "pass" } else { "checks_failed" }.into();
            row.product_bound = Some(bound);
            if let Some(l) = &rep.limit {
                row.dist_dual_sq = Some(l.dist_dual_sq);
                row.smalldist_holds = Some(l.smalldist_holds);
                row.certified_nonconstant = Some(l.certified_nonconstant);
                row.nonconst_dual = Some(l.nonconst_dual);
                row.u_in_dual_sq = Some(l.u_in_dual_sq);
            }
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Runs one scenario per value on a pool of `workers` threads (0 = one per
/// core). Failed runs are recorded in their row and do not stop the sweep.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64], workers: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| values.par_iter().map(|&v| sweep_one(cfg, param, v)).collect()))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let opt_f = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    let opt_b = |x: Option<bool>| x.map(|b| b.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            fmt17(r.value),
            r.status.clone(),
            opt_f(r.dist_dual_sq),
            opt_f(r.product_bound),
            opt_b(r.smalldist_holds),
            opt_b(r.certified_nonconstant),
            opt_f(r.nonconst_dual),
            opt_f(r.u_in_dual_sq),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("ascii"))
}

/// Sweep and write `sweep_<param>.csv` into the output directory. Returns
/// the path and the rows.
pub fn cmd_sweep(
    config: &Path,
    o: &Overrides,
    param: SweepParam,
    values: &[f64],
    workers: usize,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    let cfg = load(config, o)?;
    let rows = sweep(&cfg, param, values, workers)?;
    let dir = cfg.output_dir(Some(config));
    create_dir(&dir)?;
    let path = dir.join(format!("sweep_{}.csv", param.name()));
    write(&path, &sweep_csv(&rows)?)?;
    Ok((path, rows))
}

/// Reads `report.json` from a run directory, writes `envelope.csv` next to
/// it and returns the rendered check table.
pub fn cmd_report(dir: &Path) -> Result<(String, CommandOutcome)> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let report: RunReport = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if let Some(env) = envelope_csv(&report)? {
        write(&dir.join(ENVELOPE_FILE), &env)?;
    }
    Ok((render_table(&report), CommandOutcome::from_pass(report.all_pass)))
}
