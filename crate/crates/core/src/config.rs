//! Scenario configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! gamma = { kind = "power", alpha = 1.0 }
//!
//! [grid]
//! dim = 1
//! extent = [1.0]
//! cells = [128]
//!
//! [initial.u]
//! kind = "cosine"
//! mean = 1.0
//! amplitude = 0.5
//! mode = 1
//!
//! [initial.v]
//! kind = "constant"
//! value = 0.1
//! ```
//!
//! Relative file paths (snapshots, motility tables) are resolved against the
//! directory of the config file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DEFAULT_TOL_DISCRETIZATION;
use crate::elliptic::DEFAULT_POISSON_TOL;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::motility::{MotilitySpec, PowerTerm};
use crate::snapshot::read_snapshot;
use crate::solver::{SampleSchedule, SchemeParams, DEFAULT_CFL_SAFETY, DEFAULT_LINEAR_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the root directory for run outputs.
pub const OUTPUT_ROOT_ENV: &str = "KSDEG_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub gamma: GammaSpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub u: FieldSpec,
    pub v: FieldSpec,
}

/// Initial datum. The cosine profile is
/// `mean + amplitude cos(pi mode x / Lx) cos(pi mode_y y / Ly)`; with the
/// default `mode_y = 0` it varies along `x` only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Cosine {
        mean: f64,
        amplitude: f64,
        mode: u32,
        #[serde(default)]
        mode_y: u32,
    },
    Snapshot {
        file: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSpec {
    Power { alpha: f64 },
    Combination { terms: Vec<PowerTerm> },
    Table { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSpec {
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub v_l1_stop: Option<f64>,
    pub linear_tol: f64,
    pub poisson_tol: f64,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        let p = SchemeParams::default();
        SchemeSpec {
            dt_max: p.dt_max,
            cfl_safety: DEFAULT_CFL_SAFETY,
            t_end: p.t_end,
            v_l1_stop: None,
            linear_tol: DEFAULT_LINEAR_TOL,
            poisson_tol: DEFAULT_POISSON_TOL,
        }
    }
}

/// Either `count` uniform intervals over `[0, t_end]` or explicit `times`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub count: Option<usize>,
    pub times: Option<Vec<f64>>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: Some(100),
            times: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    /// Initial and final fields only.
    Final,
    /// Every sample.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub snapshots: SnapshotMode,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            snapshots: SnapshotMode::Final,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSpec {
    pub conservation: bool,
    pub a_bounds: bool,
    pub identity: bool,
    pub dissipation: bool,
    pub decay: bool,
    pub limit: bool,
    pub weak_form: bool,
    pub tol_discretization: f64,
    pub p_values: Vec<f64>,
    pub weak_form_mode: u32,
    /// Relative size of the last `A` increment accepted as converged.
    pub a_convergence_tol: f64,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            conservation: true,
            a_bounds: true,
            identity: true,
            dissipation: true,
            decay: true,
            limit: true,
            weak_form: true,
            tol_discretization: DEFAULT_TOL_DISCRETIZATION,
            p_values: vec![1.0, 2.0],
            weak_form_mode: 1,
            a_convergence_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Final time of the refinement runs.
    pub t_end: f64,
    pub min_spatial_order: f64,
    pub min_temporal_order: f64,
    pub min_weak_form_order: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            t_end: 1.0,
            min_spatial_order: 1.8,
            min_temporal_order: 0.9,
            min_weak_form_order: 0.9,
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub poisson_tol: Option<f64>,
    pub t_end: Option<f64>,
    pub v_l1_stop: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// A validated config turned into solver inputs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub u_in: Field,
    pub v_in: Field,
    pub motility: MotilitySpec,
    pub params: SchemeParams,
    pub schedule: SampleSchedule,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses without resolving relative paths. The error string carries the
    /// line and column of the offending entry.
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(x) = o.poisson_tol {
            self.scheme.poisson_tol = x;
        }
        if let Some(x) = o.t_end {
            self.scheme.t_end = x;
        }
        if let Some(x) = o.v_l1_stop {
            self.scheme.v_l1_stop = Some(x);
        }
        if let Some(d) = &o.output_dir {
            self.output.dir = Some(d.clone());
        }
    }

    fn invalid(&self, message: String) -> Error {
        Error::Config {
            path: self.base_dir.clone(),
            message,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, &self.grid.extent, &self.grid.cells)
            .map_err(|e| self.invalid(format!("[grid]: {e}")))
    }

    pub fn build_motility(&self) -> Result<MotilitySpec> {
        let m = match &self.gamma {
            GammaSpec::Power { alpha } => MotilitySpec::power(*alpha),
            GammaSpec::Combination { terms } => MotilitySpec::combination(terms.clone()),
            GammaSpec::Table { file } => MotilitySpec::from_table_csv(&self.resolve(file)),
        };
        m.map_err(|e| self.invalid(format!("gamma: {e}")))
    }

    pub fn build_params(&self) -> Result<SchemeParams> {
        let s = &self.scheme;
        let p = SchemeParams {
            dt_max: s.dt_max,
            cfl_safety: s.cfl_safety,
            t_end: s.t_end,
            v_l1_stop: s.v_l1_stop,
            linear_tol: s.linear_tol,
        };
        p.validate().map_err(|e| self.invalid(format!("[scheme]: {e}")))?;
        if !(s.poisson_tol > 0.0) {
            return Err(self.invalid(format!("[scheme]: poisson_tol must be positive, got {}", s.poisson_tol)));
        }
        Ok(p)
    }

    pub fn build_schedule(&self) -> Result<SampleSchedule> {
        match (&self.samples.count, &self.samples.times) {
            (Some(_), Some(_)) => Err(self.invalid("[samples]: give either count or times, not both".into())),
            (None, None) => Err(self.invalid("[samples]: give count or times".into())),
            (Some(n), None) => Ok(SampleSchedule::Uniform(*n)),
            (None, Some(ts)) => {
                if ts.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return Err(self.invalid("[samples]: times must be finite and nonnegative".into()));
                }
                Ok(SampleSchedule::Times(ts.clone()))
            }
        }
    }

    /// Evaluates an initial datum on `grid` and checks it is finite and
    /// nonnegative.
    pub fn build_field(&self, spec: &FieldSpec, grid: Grid, name: &str) -> Result<Field> {
        let f = match spec {
            FieldSpec::Constant { value } => Field::constant(grid, *value),
            FieldSpec::Cosine {
                mean,
                amplitude,
                mode,
                mode_y,
            } => {
                let (lx, ly) = (grid.extent()[0], grid.extent().get(1).copied().unwrap_or(1.0));
                let (kx, ky) = (*mode as f64, *mode_y as f64);
                Field::from_fn(grid, |x| {
                    mean + amplitude * (PI * kx * x[0] / lx).cos() * (PI * ky * x[1] / ly).cos()
                })
            }
            FieldSpec::Snapshot { file } => {
                let f = read_snapshot(&self.resolve(file))?;
                if *f.grid() != grid {
                    return Err(self.invalid(format!(
                        "[initial.{name}]: snapshot {} is on a different grid",
                        file.display()
                    )));
                }
                f
            }
        };
        if !f.is_finite() {
            return Err(self.invalid(format!("[initial.{name}]: initial data are not finite")));
        }
        if f.min() < 0.0 {
            return Err(self.invalid(format!(
                "[initial.{name}]: initial data must be nonnegative (minimum {})",
                f.min()
            )));
        }
        Ok(f)
    }

    /// Validates everything and evaluates the initial data.
    pub fn build(&self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(self.invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let grid = self.build_grid()?;
        self.build_at(grid)
    }

    /// Like [`ScenarioConfig::build`] on another grid (used by refinement
    /// studies).
    pub fn build_at(&self, grid: Grid) -> Result<Scenario> {
        let u_in = self.build_field(&self.initial.u, grid, "u")?;
        let v_in = self.build_field(&self.initial.v, grid, "v")?;
        let motility = self.build_motility()?;
        motility
            .check_admissible(v_in.max().max(0.0))
            .map_err(|e| self.invalid(format!("gamma on [0, max v_in]: {e}")))?;
        let c = &self.checks;
        if !(c.tol_discretization >= 0.0) || c.p_values.iter().any(|p| !(*p >= 1.0)) {
            return Err(self.invalid("[checks]: tol_discretization must be >= 0 and p_values >= 1".into()));
        }
        Ok(Scenario {
            config: self.clone(),
            grid,
            u_in,
            v_in,
            motility,
            params: self.build_params()?,
            schedule: self.build_schedule()?,
        })
    }

    /// Output directory: the configured one, or the config file stem, placed
    /// under `$KSDEG_OUTPUT_ROOT` when it is relative and the variable is set.
    pub fn output_dir(&self, config_path: Option<&Path>) -> PathBuf {
        let dir = self.output.dir.clone().unwrap_or_else(|| {
            let stem = config_path
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            PathBuf::from(stem)
        });
        if dir.is_absolute() {
            return dir;
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(dir),
            None => dir,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S1: &str = r#"
schema_version = 1
gamma = { kind = "power", alpha = 1.0 }

[grid]
dim = 1
extent = [1.0]
cells = [16]

[initial.u]
kind = "cosine"
mean = 1.0
amplitude = 0.5
mode = 1

[initial.v]
kind = "constant"
value = 0.1
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ScenarioConfig::from_toml_str(S1).unwrap();
        assert_eq!(cfg.scheme, SchemeSpec::default());
        assert_eq!(cfg.checks.tol_discretization, 0.05);
        let sc = cfg.build().unwrap();
        assert_eq!(sc.grid.len(), 16);
        assert!((sc.u_in.max() - (1.0 + 0.5 * (PI / 32.0).cos())).abs() < 1e-15);
        assert_eq!(sc.schedule, SampleSchedule::Uniform(100));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml_str(S1).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn negative_initial_data_are_rejected() {
        let text = S1.replace(
            "kind = \"constant\"\nvalue = 0.1",
            "kind = \"cosine\"\nmean = 0.1\namplitude = -1.0\nmode = 1",
        );
        let err = ScenarioConfig::from_toml_str(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("nonnegative"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = S1.replace("cells = [16]", "cells = [16]\nbogus = 3");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn non_degenerate_motility_is_rejected() {
        let text = S1.replace(
            "gamma = { kind = \"power\", alpha = 1.0 }",
            "gamma = { kind = \"combination\", terms = [{ coef = 1.0, alpha = 0.0 }] }",
        );
        assert!(ScenarioConfig::from_toml_str(&text).unwrap().build().is_err());
    }

    #[test]
    fn samples_need_exactly_one_form() {
        let mut cfg = ScenarioConfig::from_toml_str(S1).unwrap();
        cfg.samples.times = Some(vec![1.0]);
        assert!(cfg.build().is_err());
        cfg.samples.count = None;
        assert_eq!(cfg.build().unwrap().schedule, SampleSchedule::Times(vec![1.0]));
    }

    #[test]
    fn overrides_replace_scheme_values() {
        let mut cfg = ScenarioConfig::from_toml_str(S1).unwrap();
        cfg.apply(&Overrides {
            poisson_tol: Some(1e-8),
            t_end: Some(3.0),
            v_l1_stop: Some(1e-5),
            output_dir: Some("x".into()),
        });
        assert_eq!(cfg.scheme.poisson_tol, 1e-8);
        assert_eq!(cfg.scheme.t_end, 3.0);
        assert_eq!(cfg.scheme.v_l1_stop, Some(1e-5));
        assert_eq!(cfg.output.dir, Some(PathBuf::from("x")));
    }
}
