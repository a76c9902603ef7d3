use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use opinion_lab_cli::catalog::Mode;
use opinion_lab_cli::config::{self, CounterexampleSpec, Overrides};
use opinion_lab_cli::run::{self, RunMeta, RunReport, EXIT_ERROR};
use opinion_lab_cli::report;

/// Continuum opinion dynamics: simulations, the cycling counterexample and
/// Picard cross-checks.
///
/// Exit status: 0 when every check passes, 2 when a check fails, 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "opinion-lab", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "OPINION_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and evaluate its checks.
    Simulate(ScenarioArgs),
    /// Analytic report on the cycling construction.
    Counterexample(CounterexampleArgs),
    /// Solve a scenario by Picard iteration and compare with RK4.
    PicardCheck(ScenarioArgs),
    /// Print the report of a finished run.
    Report {
        /// Run directory.
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for randomized diagnostics (overrides the config).
    #[arg(long)]
    seed_override: Option<u64>,
    /// Enable a check with a tolerance, e.g. `--check convergence_w1=0.01`.
    #[arg(long = "check", value_name = "NAME=TOL", value_parser = parse_check)]
    checks: Vec<(String, f64)>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            output: self.output.clone(),
            seed: self.seed_override,
            checks: self.checks.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file.
    #[arg(value_name = "CONFIG", required_unless_present = "config", conflicts_with = "config")]
    path: Option<PathBuf>,
    /// Scenario file, as a flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CounterexampleArgs {
    /// Optional file with a [counterexample] table; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Velocity exponent p in (2/3, 1).
    #[arg(long)]
    p: Option<f64>,
    /// Initial cluster position.
    #[arg(long)]
    c0: Option<f64>,
    /// Interval nodes.
    #[arg(long)]
    n: Option<usize>,
    /// Nodes per cluster.
    #[arg(long)]
    n_cluster: Option<usize>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sample_dt: Option<f64>,
    /// Fold exclusion radius for the right-hand-side check.
    #[arg(long)]
    delta: Option<f64>,
    /// Time of a right-hand-side check (repeatable; default t_end).
    #[arg(long = "verify-at")]
    verify_at: Vec<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_check(s: &str) -> Result<(String, f64), String> {
    let (name, tol) = s.split_once('=').ok_or_else(|| format!("expected NAME=TOL, got `{s}`"))?;
    let tol: f64 = tol.trim().parse().map_err(|e| format!("bad tolerance in `{s}`: {e}"))?;
    Ok((name.trim().to_string(), tol))
}

fn print_report(report: &RunReport) {
    for c in &report.checks {
        let ok = if c.pass { "PASS" } else { "FAIL" };
        println!("{ok} {} worst={:e} tol={:e}", c.name, c.worst_violation, c.tolerance);
    }
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    println!("{verdict} {} ({:.2} s)", report.scenario, report.wall_time_s);
    if let Some(dir) = report.artifacts.first().and_then(|p| p.parent()) {
        println!("artifacts in {}", dir.display());
    }
}

fn dispatch(cli: Cli, meta: RunMeta) -> Result<i32, String> {
    let outcome = match cli.command {
        Command::Simulate(a) => {
            let path = a.path.or(a.config).expect("clap requires a config");
            let cfg = config::load_config_with(&path, Mode::Simulate, &a.common.overrides()).map_err(|e| e.to_string())?;
            run::run_simulation(&cfg, &meta)
        }
        Command::PicardCheck(a) => {
            let path = a.path.or(a.config).expect("clap requires a config");
            let cfg = config::load_config_with(&path, Mode::Picard, &a.common.overrides()).map_err(|e| e.to_string())?;
            run::run_picard(&cfg, &meta)
        }
        Command::Counterexample(a) => {
            let flags = CounterexampleSpec {
                p: a.p,
                c0: a.c0,
                n_interval: a.n,
                n_cluster: a.n_cluster,
                t_start: a.t_start,
                t_end: a.t_end,
                sample_dt: a.sample_dt,
                delta: a.delta,
                verify_at: (!a.verify_at.is_empty()).then_some(a.verify_at),
                ..Default::default()
            };
            let settings = config::counterexample_settings(a.config.as_deref(), &flags, &a.common.overrides())
                .map_err(|e| e.to_string())?;
            run::run_counterexample(&settings, &meta)
        }
        Command::Report { dir } => {
            let (text, code) = report::render(&dir)?;
            print!("{text}");
            return Ok(code);
        }
    };
    let report = outcome.map_err(|e| e.to_string())?;
    print_report(&report);
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR as u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_ERROR as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    let meta = RunMeta {
        threads: rayon::current_num_threads(),
        argv: std::env::args().collect(),
    };
    match dispatch(cli, meta) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
