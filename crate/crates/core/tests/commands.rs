use std::fs;
use std::path::{Path, PathBuf};

use ks_degenerate::cli::{cmd_report, cmd_run, cmd_sweep, cmd_verify, sweep, CommandOutcome, SweepParam, SWEEP_HEADER};
use ks_degenerate::config::{Overrides, ScenarioConfig};
use ks_degenerate::report::{RunReport, REPORT_FILE, TIMESERIES_FILE, TIMESERIES_HEADER};
use ks_degenerate::snapshot::read_snapshot;
use ks_degenerate::Error;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn into(dir: &Path) -> Overrides {
    Overrides {
        output_dir: Some(dir.to_path_buf()),
        ..Default::default()
    }
}

#[test]
fn stationary_run_passes_with_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_run(&config("stationary.toml"), &into(dir.path())).unwrap();
    assert_eq!(a.outcome, CommandOutcome::Pass);
    let r = &a.report;
    for name in ["accumulation_identity", "grad_a_bound", "uv_absorption_total", "limit_distance"] {
        assert_eq!(r.check(name).unwrap().lhs, 0.0, "{name}");
    }
    let lim = r.limit.as_ref().unwrap();
    assert_eq!(lim.dist_dual, 0.0);
    let u_final = read_snapshot(&dir.path().join("snapshots/u_final.csv")).unwrap();
    let u_init = read_snapshot(&dir.path().join("snapshots/u_initial.csv")).unwrap();
    assert_eq!(u_final, u_init);
}

#[test]
fn negative_initial_nutrient_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("s1.toml"))
        .unwrap()
        .replace("kind = \"constant\"\nvalue = 0.1", "kind = \"cosine\"\nmean = 0.1\namplitude = -1.0\nmode = 1");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let err = cmd_run(&path, &into(&dir.path().join("out"))).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_syntax_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    fs::write(&path, "schema_version = 1\n[grid]\ndim = \n").unwrap();
    let err = cmd_run(&path, &into(dir.path())).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn run_writes_artifacts_and_report_renders_them() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_run(&config("s1.toml"), &into(dir.path())).unwrap();
    assert_eq!(a.outcome, CommandOutcome::Pass);
    let ts = fs::read_to_string(dir.path().join(TIMESERIES_FILE)).unwrap();
    let mut lines = ts.lines();
    assert_eq!(lines.next().unwrap(), TIMESERIES_HEADER.join(","));
    assert_eq!(lines.count(), a.report.run.samples);
    let dist = a.report.check("limit_distance").unwrap();
    assert!(dist.slack >= 0.0);

    let (table, outcome) = cmd_report(dir.path()).unwrap();
    assert_eq!(outcome, CommandOutcome::Pass);
    for c in &a.report.checks {
        assert!(table.contains(&c.name), "{}", c.name);
    }
    let env = fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    assert!(env.starts_with("t,v_l1,envelope_rhs\n"));
    assert_eq!(env.lines().count(), a.report.run.samples + 1);

    let text = fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
    let mut back: RunReport = serde_json::from_str(&text).unwrap();
    back.config.base_dir = a.report.config.base_dir.clone();
    assert_eq!(back, a.report);
    // every default is recorded
    assert!(text.contains("\"cfl_safety\": 0.9"));
    assert!(text.contains("\"poisson_tol\": 1e-10"));
}

#[test]
fn identical_configs_give_identical_files() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_run(&config("s2.toml"), &into(d1.path())).unwrap();
    cmd_run(&config("s2.toml"), &into(d2.path())).unwrap();
    for f in [TIMESERIES_FILE, "snapshots/u_final.csv", "snapshots/A_final.csv", "envelope.csv"] {
        let a = fs::read(d1.path().join(f)).unwrap();
        let b = fs::read(d2.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn unreached_limit_fails_the_run_without_erroring() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        t_end: Some(1.0),
        ..into(dir.path())
    };
    let a = cmd_run(&config("s2.toml"), &o).unwrap();
    assert_eq!(a.outcome, CommandOutcome::ChecksFailed);
    assert!(!a.report.check("limit_reached").unwrap().pass);
    assert_eq!(a.report.failed().count(), 1);
}

#[test]
fn all_snapshots_mode_writes_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(config("stationary.toml")).unwrap() + "\n[output]\nsnapshots = \"all\"\n";
    let path = dir.path().join("st.toml");
    fs::write(&path, src).unwrap();
    let a = cmd_run(&path, &into(&dir.path().join("out"))).unwrap();
    let index = fs::read_to_string(a.dir.join("snapshots/index.csv")).unwrap();
    assert_eq!(index.lines().count(), a.report.run.samples + 1);
    assert!(a.dir.join("snapshots/v_00000.csv").exists());
}

#[test]
fn output_root_comes_from_the_environment() {
    let cfg = ScenarioConfig::from_path(&config("s1.toml")).unwrap();
    let root = tempfile::tempdir().unwrap();
    std::env::set_var(ks_degenerate::config::OUTPUT_ROOT_ENV, root.path());
    let dir = cfg.output_dir(Some(&config("s1.toml")));
    std::env::remove_var(ks_degenerate::config::OUTPUT_ROOT_ENV);
    assert_eq!(dir, root.path().join("s1"));
}

#[test]
fn empty_sweep_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let (path, rows) = cmd_sweep(&config("s1.toml"), &into(dir.path()), SweepParam::VIn, &[], 2).unwrap();
    assert!(rows.is_empty());
    assert_eq!(fs::read_to_string(path).unwrap(), SWEEP_HEADER.join(",") + "\n");
}

#[test]
fn alpha_sweep_uses_the_closed_form_derivative_bound() {
    let cfg = ScenarioConfig::from_path(&config("s2.toml")).unwrap();
    let rows = sweep(&cfg, SweepParam::Alpha, &[1.0, 2.0, 0.5], 3).unwrap();
    let u_inf = cfg.build().unwrap().u_in.max();
    let (v0, vmax) = (0.005, 0.005);
    let b1 = rows[0].product_bound.unwrap();
    let b2 = rows[1].product_bound.unwrap();
    assert!((b1 - u_inf * v0 * 1.0).abs() < 1e-15);
    assert!((b2 - u_inf * v0 * 2.0 * vmax).abs() < 1e-15);
    assert_eq!(rows[0].status, "pass");
    assert_eq!(rows[1].status, "pass");
    // alpha < 1 is not an admissible motility: recorded, sweep continues
    assert!(rows[2].status.starts_with("error"), "{}", rows[2].status);
}

#[test]
fn verify_writes_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides {
        t_end: Some(0.25),
        ..into(dir.path())
    };
    let (study, outcome) = cmd_verify(&config("s2.toml"), &o).unwrap();
    assert_eq!(study.t_end, 0.25);
    assert_eq!(outcome, CommandOutcome::from_pass(study.pass));
    assert!(dir.path().join("verify.json").exists());
    assert_eq!(study.level_checks.len(), 2);
}

#[test]
fn stationary_verify_is_a_vacuous_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (study, outcome) = cmd_verify(&config("stationary.toml"), &into(dir.path())).unwrap();
    assert_eq!(outcome, CommandOutcome::Pass);
    assert!(study.temporal.order.is_none());
    assert!(study.weak_form.order.is_none());
}
