use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ks_degenerate::cli::{self, CommandOutcome, SweepParam, EXIT_ERROR};
use ks_degenerate::config::Overrides;

#[derive(Parser)]
#[command(name = "ksdeg", version, about = "Degenerate chemotaxis-consumption simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// Residual tolerance of the Poisson solves in the dual norm.
    #[arg(long)]
    poisson_tol: Option<f64>,
    /// Final time (for `verify`, the length of the refinement runs).
    #[arg(long)]
    t_end: Option<f64>,
    /// Stop once ||v||_1 falls below this value.
    #[arg(long)]
    v_l1_stop: Option<f64>,
    /// Output directory (default: config stem under $KSDEG_OUTPUT_ROOT).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            poisson_tol: self.poisson_tol,
            t_end: self.t_end,
            v_l1_stop: self.v_l1_stop,
            output_dir: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the time series, snapshots and report.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Measure self-convergence orders under grid and time-step refinement.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a family of scenarios concurrently and write an aggregate CSV.
    Sweep {
        config: PathBuf,
        /// Parameter to vary: v_in or alpha.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values (may be empty).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        flags: Flags,
    },
    /// Render the check table of a run directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, flags } => cli::cmd_run(&config, &flags.overrides()).map(|a| {
            print!("{}", ks_degenerate::report::render_table(&a.report));
            println!("artifacts: {}", a.dir.display());
            a.outcome
        }),
        Command::Verify { config, flags } => cli::cmd_verify(&config, &flags.overrides()).map(|(s, outcome)| {
            for e in [&s.spatial, &s.temporal, &s.weak_form] {
                let order = e.order.map_or("exact".to_string(), |p| format!("{p:.3}"));
                println!(
                    "{:<24} order {order:>7} (min {}) {}",
                    e.label,
                    e.min_order,
                    if e.pass { "PASS" } else { "FAIL" }
                );
            }
            for (k, checks) in s.level_checks.iter().enumerate() {
                for c in checks.iter().filter(|c| c.enforced && !c.pass) {
                    println!("level {k}: {} FAIL (lhs {:.3e}, rhs {:.3e})", c.name, c.lhs, c.rhs);
                }
            }
            outcome
        }),
        Command::Sweep {
            config,
            param,
            values,
            workers,
            flags,
        } => cli::cmd_sweep(&config, &flags.overrides(), param, &values, workers).map(|(path, rows)| {
            println!("{} rows written to {}", rows.len(), path.display());
            CommandOutcome::from_pass(rows.iter().all(|r| !r.status.starts_with("error")))
        }),
        Command::Report { dir } => cli::cmd_report(&dir).map(|(table, outcome)| {
            print!("{table}");
            outcome
        }),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
