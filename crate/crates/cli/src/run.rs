//! Subcommand runners: each writes its artifacts and returns a [`RunReport`].

use std::path::PathBuf;
use std::time::Instant;

use opinion_lab::counterexample::{self, ReportConfig, RhsVerification};
use opinion_lab::diagnostics::checks::{evaluate_check, CheckContext, CheckResult};
use opinion_lab::diagnostics::{self, moment};
use opinion_lab::ensemble::{integrate_partial, rhs};
use opinion_lab::picard::{self, PicardRun};
use opinion_lab::{Kernel, Trajectory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{
    write_summary, write_trajectory, ArtifactDir, ArtifactError, SummaryRow, REPORT, RUN_META, SUMMARY, TRAJECTORY,
};
use crate::catalog::{self, Mode};
use crate::config::{CounterexampleSettings, ScenarioConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// The cycling run flips order tens of thousands of times; list only the first few.
const MAX_LISTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: &'static str,
    /// True iff every enabled check passed.
    pub pass: bool,
    pub wall_time_s: f64,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub details: Value,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.pass) {
            (Some(_), _) => EXIT_ERROR,
            (None, true) => EXIT_PASS,
            (None, false) => EXIT_CHECK_FAILED,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Artifact(ArtifactError),
    /// The run stopped; whatever was produced sits in `dir` as `.partial` files.
    Failed { dir: PathBuf, message: String },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Artifact(e) => e.fmt(f),
            Self::Failed { dir, message } => {
                write!(f, "{message} (partial artifacts in {})", dir.display())
            }
        }
    }
}

impl std::error::Error for RunError {}

impl From<ArtifactError> for RunError {
    fn from(e: ArtifactError) -> Self {
        Self::Artifact(e)
    }
}

/// Process-level facts recorded in `run_meta.json`.
#[derive(Debug, Clone, Default)]
pub struct RunMeta {
    pub threads: usize,
    pub argv: Vec<String>,
}

fn write_meta<T: Serialize>(
    out: &mut ArtifactDir,
    meta: &RunMeta,
    name: &str,
    command: &str,
    seed: u64,
    config: &T,
) -> Result<(), ArtifactError> {
    out.write_json(
        RUN_META,
        &json!({
            "scenario": name,
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "threads": meta.threads,
            "argv": meta.argv,
            "config": config,
        }),
    )
}

struct Run {
    out: ArtifactDir,
    scenario: String,
    command: &'static str,
    start: Instant,
}

impl Run {
    fn begin<T: Serialize>(
        dir: &std::path::Path,
        meta: &RunMeta,
        scenario: &str,
        command: &'static str,
        seed: u64,
        config: &T,
    ) -> Result<Self, RunError> {
        let mut out = ArtifactDir::create(dir)?;
        write_meta(&mut out, meta, scenario, command, seed, config)?;
        Ok(Self {
            out,
            scenario: scenario.to_string(),
            command,
            start: Instant::now(),
        })
    }

    fn report(&self, checks: Vec<CheckResult>, error: Option<String>, details: Value) -> RunReport {
        let mut artifacts = self.out.final_paths();
        artifacts.push(self.out.path().join(REPORT));
        RunReport {
            scenario: self.scenario.clone(),
            command: self.command,
            pass: error.is_none() && checks.iter().all(|c| c.pass),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            checks,
            artifacts,
            error,
            details,
        }
    }

    /// Record the failure and leave every file as `.partial`.
    fn fail(mut self, message: String, details: Value) -> RunError {
        let report = self.report(Vec::new(), Some(message.clone()), details);
        if let Err(e) = self.out.write_json(REPORT, &report) {
            return RunError::Artifact(e);
        }
        RunError::Failed {
            dir: self.out.path().to_path_buf(),
            message,
        }
    }

    fn finish(mut self, checks: Vec<CheckResult>, details: Value) -> Result<RunReport, RunError> {
        let report = self.report(checks, None, details);
        self.out.write_json(REPORT, &report)?;
        self.out.commit()?;
        Ok(report)
    }
}

/// Per-snapshot observables for `summary.csv`.
pub fn summarize(traj: &Trajectory, kernel: &Kernel) -> Vec<SummaryRow> {
    let w1 = diagnostics::w1_to_final(traj);
    traj.snapshots
        .par_iter()
        .zip(w1.par_iter())
        .map(|(snap, &w1_to_final)| {
            let mut moments = [0.0; 6];
            for (k, m) in moments.iter_mut().enumerate() {
                *m = moment(snap, k as u32 + 1);
            }
            let max_velocity = rhs(snap, kernel).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            SummaryRow {
                t: snap.time(),
                moments,
                dissipation: diagnostics::dissipation(snap, kernel),
                w1_to_final,
                max_velocity,
            }
        })
        .collect()
}

pub fn run_simulation(cfg: &ScenarioConfig, meta: &RunMeta) -> Result<RunReport, RunError> {
    let mut run = Run::begin(&cfg.output_dir, meta, &cfg.name, "simulate", cfg.rng_seed, &cfg.source)?;
    let (traj, failure) = match integrate_partial(&cfg.initial, &cfg.kernel, &cfg.integrator) {
        Ok(r) => r,
        Err(e) => return Err(run.fail(e.to_string(), Value::Null)),
    };
    run.out.write_with(TRAJECTORY, |w| write_trajectory(w, &traj))?;
    let rows = summarize(&traj, &cfg.kernel);
    run.out.write_with(SUMMARY, |w| write_summary(w, &rows))?;
    let details = json!({
        "n": cfg.n,
        "kernel": cfg.kernel.name(),
        "w_bound": cfg.kernel.w_bound(),
        "lipschitz": cfg.kernel.lipschitz(),
        "symmetric": cfg.kernel.is_symmetric(),
        "snapshots": traj.snapshots.len(),
        "final_time": traj.last().time(),
        "stopped_early": traj.stopped_early,
    });
    if let Some(e) = failure {
        return Err(run.fail(e.to_string(), details));
    }

    let ctx = CheckContext {
        trajectory: &traj,
        kernel: &cfg.kernel,
        seed: cfg.rng_seed,
    };
    let mut results = Vec::with_capacity(cfg.checks.len());
    for (name, tol) in &cfg.checks {
        match evaluate_check(name, *tol, &ctx) {
            Ok(r) => results.push(r),
            Err(e) => return Err(run.fail(e.to_string(), details)),
        }
    }
    run.finish(results, details)
}

fn extra_result(mode: Mode, name: &str, tolerance: f64, worst: f64, pass: bool) -> CheckResult {
    let spec = catalog::lookup_extra(mode, name).expect("names are validated at load");
    CheckResult {
        name: name.to_string(),
        pass,
        worst_violation: worst,
        tolerance,
        theory_ref: spec.theory_ref.to_string(),
    }
}

fn extra_tolerance(mode: Mode, name: &str, given: Option<f64>, fallback: f64) -> f64 {
    given
        .or_else(|| catalog::lookup_extra(mode, name).and_then(|c| c.default_tolerance))
        .unwrap_or(fallback)
}

pub fn run_counterexample(s: &CounterexampleSettings, meta: &RunMeta) -> Result<RunReport, RunError> {
    let mut run = Run::begin(&s.output_dir, meta, &s.name, "counterexample", s.rng_seed, &s.source)?;
    let cfg = ReportConfig {
        t_start: s.t_start,
        t_end: s.t_end,
        sample_dt: s.sample_dt,
        tracked_agents: s.tracked_agents,
        pair_budget: s.pair_budget,
        seed: s.rng_seed,
    };
    let (report, traj) = match counterexample::run_counterexample_report(&s.params, &cfg) {
        Ok(r) => r,
        Err(e) => return Err(run.fail(e.to_string(), Value::Null)),
    };
    run.out.write_with(TRAJECTORY, |w| write_trajectory(w, &traj))?;
    let verifications: Result<Vec<RhsVerification>, _> = s
        .verify_at
        .iter()
        .map(|&t| counterexample::verify_rhs(&s.params, t, s.params.n_interval, s.delta))
        .collect();
    let verifications = match verifications {
        Ok(v) => v,
        Err(e) => return Err(run.fail(e.to_string(), json!({ "report": report }))),
    };

    let mode = Mode::Counterexample;
    let mut results = Vec::with_capacity(s.checks.len());
    for (name, given) in &s.checks {
        let tol = extra_tolerance(mode, name, *given, 10.0 / s.params.n_interval as f64);
        let result = match name.as_str() {
            "stationary_law" => {
                let worst = report.max_w1_to_uniform.max(report.max_w1_to_start);
                extra_result(mode, name, tol, worst, worst < tol)
            }
            "fold_crossings" => {
                let deficit = report
                    .tracked
                    .iter()
                    .map(|a| a.analytic_crossings as f64 - a.reversals as f64)
                    .fold(0.0, f64::max);
                extra_result(mode, name, tol, deficit, deficit <= tol)
            }
            "cluster_gap" => {
                let shortfall = (report.cluster_gap_bound - report.min_cluster_gap).max(0.0);
                let pass = shortfall <= tol && report.cluster_gap_bound > 0.0 && report.cluster_right_decreasing;
                extra_result(mode, name, tol, shortfall, pass)
            }
            "mirror_symmetry" => extra_result(mode, name, tol, report.max_mirror_error, report.max_mirror_error <= tol),
            "rhs_identity" => {
                let worst = verifications.iter().map(|v| v.max_abs_error).fold(0.0, f64::max);
                extra_result(mode, name, tol, worst, worst <= tol)
            }
            other => unreachable!("unvalidated check {other}"),
        };
        results.push(result);
    }
    let mut report_json = json!(report);
    let audit = &mut report_json["order_audit"];
    if let Some(list) = audit["violations"].as_array_mut() {
        list.truncate(MAX_LISTED_VIOLATIONS);
        audit["violations_listed"] = json!(list.len());
    }
    run.finish(results, json!({ "report": report_json, "rhs_verification": verifications }))
}

fn window_summary(run: &PicardRun) -> Value {
    run.windows
        .iter()
        .map(|w| {
            json!({
                "t_start": w.t_start,
                "b": w.b,
                "iterations": w.iterations,
                "residuals": w.residuals,
                "residual_ratios": w.ratios,
                "max_ratio": w.max_ratio(),
                "ratio_bound": w.ratio_bound,
                "fixed_point_residual": w.fixed_point_residual,
                "max_iterate_norm": w.max_iterate_norm,
                "max_time_lipschitz": w.max_time_lipschitz,
            })
        })
        .collect()
}

pub fn run_picard(cfg: &ScenarioConfig, meta: &RunMeta) -> Result<RunReport, RunError> {
    let mut run = Run::begin(&cfg.output_dir, meta, &cfg.name, "picard-check", cfg.rng_seed, &cfg.source)?;
    let solved = picard::picard_solve(&cfg.kernel, &cfg.initial, cfg.integrator.t_end, &cfg.picard);
    let solved = match solved {
        Ok(r) => r,
        Err(e) => return Err(run.fail(e.to_string(), Value::Null)),
    };
    run.out.write_with(TRAJECTORY, |w| write_trajectory(w, &solved.trajectory))?;
    let windows = window_summary(&solved);
    let distance = match picard::cross_validate(&cfg.kernel, &solved, cfg.picard_substeps) {
        Ok(d) => d,
        Err(e) => return Err(run.fail(e.to_string(), json!({ "windows": windows }))),
    };
    let bound = picard::window_bound(&cfg.kernel).ok();

    let mode = Mode::Picard;
    let results = cfg
        .checks
        .iter()
        .map(|(name, given)| {
            let tol = extra_tolerance(mode, name, *given, 0.0);
            match name.as_str() {
                "picard_contraction" => {
                    let worst = solved.windows.iter().map(|w| w.max_ratio()).fold(0.0, f64::max);
                    extra_result(mode, name, tol, worst, worst <= tol)
                }
                "picard_rk4_agreement" => extra_result(mode, name, tol, distance, distance <= tol),
                other => unreachable!("unvalidated check {other}"),
            }
        })
        .collect();
    run.finish(
        results,
        json!({
            "window_bound": bound,
            "windows": windows,
            "cross_validation_distance": distance,
            "rk4_substeps": cfg.picard_substeps,
        }),
    )
}
