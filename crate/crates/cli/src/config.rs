//! Scenario files.
//!
//! A scenario is one TOML document:
//!
//! ```toml
//! name = "hk_baseline"
//! n = 200
//! rng_seed = 7                 # optional, default 0
//! output_dir = "runs/hk"       # optional, default runs/<name>
//!
//! [kernel]
//! family = "hegselmann_krause"
//! r = 0.2
//!
//! [initial_profile]            # optional, default uniform: x(alpha) = alpha
//! kind = "expression"
//! expr = "0.5 + 0.4 * math::sin(6 * alpha)"
//!
//! [integrator]
//! method = "rk4"
//! dt = 0.01
//! t_end = 30.0
//!
//! [[diagnostics]]
//! name = "moment_monotone_k2"
//! tolerance = 1e-6             # optional
//! ```
//!
//! Loading validates everything and reports every problem at once.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use opinion_lab::counterexample::CounterexampleParams;
use opinion_lab::ensemble::{uniform_ensemble, Ensemble, IntegratorConfig, Method};
use opinion_lab::kernels::{CustomRule, Kernel, Schedule, ScheduleSegment, StepProfile};
use opinion_lab::picard::PicardConfig;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, Mode};
use crate::expr::Expression;

/// Agent-indexed parameter: a number or a step profile over `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamProfile {
    Constant(f64),
    Steps { breaks: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: f64,
    /// `blocks` rows of `blocks` entries.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    HegselmannKrause {
        r: f64,
    },
    BoundedConfidence {
        radius: ParamProfile,
    },
    BoundedInfluence {
        radius: ParamProfile,
    },
    GaussianDecay {
        sigma: ParamProfile,
    },
    RingSensing {
        r_min: f64,
        r_max: f64,
    },
    TypedConfidence {
        r: f64,
        r_index: f64,
    },
    Constant {
        c: f64,
    },
    Zero,
    FiniteConsensus {
        blocks: usize,
        #[serde(default)]
        cyclic: bool,
        segments: Vec<SegmentSpec>,
    },
    AlternatingThreeBlock,
    Counterexample {
        p: Option<f64>,
        c0: Option<f64>,
        n_cluster: Option<usize>,
    },
    /// `expr` over `t, a, b, xa, xb`.
    Custom {
        expr: String,
        w_bound: f64,
        lipschitz: Option<f64>,
        #[serde(default)]
        symmetric: bool,
        #[serde(default)]
        position_only: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `x(alpha) = alpha`.
    #[default]
    Uniform,
    Constant {
        value: f64,
    },
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `expr` over `alpha`.
    Expression {
        expr: String,
    },
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_true")]
    pub clamp_to_box: bool,
    #[serde(default = "default_one")]
    pub record_every: usize,
    pub stop_velocity: Option<f64>,
}

/// A check name, optionally with a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckEntry {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

impl CheckEntry {
    pub fn name(&self) -> &str {
        match self {
            Self::Name(n) | Self::Full { name: n, .. } => n,
        }
    }

    pub fn tolerance(&self) -> Option<f64> {
        match self {
            Self::Name(_) => None,
            Self::Full { tolerance, .. } => *tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    pub grid_points: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// Window length; default `0.9 * b_max`.
    pub window: Option<f64>,
    /// RK4 steps per grid interval in the cross-check.
    pub substeps: Option<usize>,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub rng_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub initial_profile: ProfileSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub diagnostics: Vec<CheckEntry>,
    pub picard: Option<PicardSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub p: Option<f64>,
    pub c0: Option<f64>,
    pub n_interval: Option<usize>,
    pub n_cluster: Option<usize>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub sample_dt: Option<f64>,
    /// Fold exclusion radius for the right-hand-side check.
    pub delta: Option<f64>,
    /// Times of the right-hand-side check; default `t_end`.
    pub verify_at: Option<Vec<f64>>,
    pub tracked_agents: Option<usize>,
    pub pair_budget: Option<usize>,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
}

/// Config file for the `counterexample` subcommand. Other tables are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CounterexampleFile {
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub counterexample: CounterexampleSpec,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub checks: Vec<(String, f64)>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub kernel: Kernel,
    pub initial: Ensemble,
    pub integrator: IntegratorConfig,
    /// Enabled checks in order, with explicit tolerances where given.
    pub checks: Vec<(String, Option<f64>)>,
    pub picard: PicardConfig,
    pub picard_substeps: usize,
    /// The document after overrides, for the run record.
    pub source: ScenarioFile,
}

#[derive(Debug, Clone)]
pub struct CounterexampleSettings {
    pub name: String,
    pub output_dir: PathBuf,
    pub rng_seed: u64,
    pub params: CounterexampleParams,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub delta: f64,
    pub verify_at: Vec<f64>,
    pub tracked_agents: usize,
    pub pair_budget: usize,
    pub checks: Vec<(String, Option<f64>)>,
    pub source: CounterexampleSpec,
}

#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, source: io::Error },
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    Invalid { path: PathBuf, errors: Vec<String> },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Read { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            Self::Parse { path, line, column, message } => {
                write!(f, "{}:{line}:{column}: {message}", path.display())
            }
            Self::Invalid { path, errors } => {
                write!(f, "invalid scenario {}:", path.display())?;
                for e in errors {
                    write!(f, "\n  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    /// Validation messages, empty for read and parse errors.
    pub fn errors(&self) -> &[String] {
        match self {
            Self::Invalid { errors, .. } => errors,
            _ => &[],
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Load and validate a scenario for `simulate`.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    load_config_with(path, Mode::Simulate, &Overrides::default())
}

/// Load a scenario, apply overrides and validate it for `mode`.
pub fn load_config_with(path: &Path, mode: Mode, overrides: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let text = read(path)?;
    parse_scenario(path, &text, mode, overrides)
}

/// Validate scenario text; `path` only labels errors.
pub fn parse_scenario(path: &Path, text: &str, mode: Mode, overrides: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let mut file: ScenarioFile = parse_toml(path, text)?;
    if let Some(out) = &overrides.output {
        file.output_dir = Some(out.clone());
    }
    if let Some(seed) = overrides.seed {
        file.rng_seed = seed;
    }
    let entries = match mode {
        Mode::Picard => &mut file.picard.get_or_insert_with(PicardSpec::default).checks,
        _ => &mut file.diagnostics,
    };
    merge_checks(entries, &overrides.checks);
    validate(path, file, mode)
}

fn merge_checks(entries: &mut Vec<CheckEntry>, extra: &[(String, f64)]) {
    for (name, tol) in extra {
        let entry = CheckEntry::Full {
            name: name.clone(),
            tolerance: Some(*tol),
        };
        match entries.iter_mut().find(|e| e.name() == name) {
            Some(slot) => *slot = entry,
            None => entries.push(entry),
        }
    }
}

fn validate(path: &Path, file: ScenarioFile, mode: Mode) -> Result<ScenarioConfig, ConfigError> {
    let mut errors = Vec::new();

    if file.name.trim().is_empty() {
        errors.push("name must not be empty".to_string());
    }
    if file.n < 2 {
        errors.push(format!("n must be at least 2 (got {})", file.n));
    }

    let kernel = build_kernel(&file.kernel, &mut errors);
    let initial = build_initial(&file.initial_profile, file.n, &mut errors);

    let spec = &file.integrator;
    let integrator = IntegratorConfig {
        method: spec.method,
        dt: spec.dt,
        t_end: spec.t_end,
        clamp_to_box: spec.clamp_to_box,
        record_every: spec.record_every,
        stop_velocity: spec.stop_velocity,
    };
    if let Some(v) = spec.stop_velocity {
        if !(v > 0.0) {
            errors.push(format!("integrator: stop_velocity must be positive (got {v})"));
        }
    }
    if let Err(e) = integrator.validate(kernel.as_ref().map_or(0.0, Kernel::w_bound), 0.0) {
        errors.push(format!("integrator: {e}"));
    }

    let entries = match mode {
        Mode::Picard => file.picard.as_ref().map(|p| p.checks.as_slice()).unwrap_or(&[]),
        _ => &file.diagnostics,
    };
    let mut checks = validate_checks(entries, mode, &mut errors);
    if mode == Mode::Picard && checks.is_empty() {
        checks = catalog::PICARD_CHECKS.iter().map(|c| (c.name.to_string(), None)).collect();
    }
    if let Some(k) = &kernel {
        if checks.iter().any(|(c, _)| c == "cluster_separation") && k.interaction_radius().is_none() {
            errors.push(format!(
                "check `cluster_separation` needs a kernel with a confidence radius, not `{}`",
                k.name()
            ));
        }
        if mode == Mode::Picard && k.lipschitz().is_none() {
            errors.push(format!(
                "picard: kernel `{}` has no Lipschitz constant; declare one (custom) or use a smooth family",
                k.name()
            ));
        }
    }

    let pspec = file.picard.clone().unwrap_or_default();
    let defaults = PicardConfig::default();
    let picard = PicardConfig {
        grid_points: pspec.grid_points.unwrap_or(defaults.grid_points),
        tol: pspec.tol.unwrap_or(defaults.tol),
        max_iters: pspec.max_iters.unwrap_or(defaults.max_iters),
        window: pspec.window,
        keep_iterates: false,
    };
    let picard_substeps = pspec.substeps.unwrap_or(8);
    if picard.grid_points < 2 {
        errors.push(format!("picard: grid_points must be at least 2 (got {})", picard.grid_points));
    }
    if !(picard.tol > 0.0) {
        errors.push(format!("picard: tol must be positive (got {})", picard.tol));
    }
    if picard.max_iters == 0 {
        errors.push("picard: max_iters must be at least 1".to_string());
    }
    if let Some(b) = picard.window {
        if !(b > 0.0 && b.is_finite()) {
            errors.push(format!("picard: window must be positive (got {b})"));
        }
    }
    if picard_substeps == 0 {
        errors.push("picard: substeps must be at least 1".to_string());
    }

    let output_dir = file
        .output_dir
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(&file.name));
    if let Err(e) = ensure_writable(&output_dir) {
        errors.push(e);
    }

    match (kernel, initial) {
        (Some(kernel), Some(initial)) if errors.is_empty() => Ok(ScenarioConfig {
            name: file.name.clone(),
            n: file.n,
            rng_seed: file.rng_seed,
            output_dir,
            kernel,
            initial,
            integrator,
            checks,
            picard,
            picard_substeps,
            source: file,
        }),
        _ => Err(ConfigError::Invalid {
            path: path.to_path_buf(),
            errors,
        }),
    }
}

fn validate_checks(entries: &[CheckEntry], mode: Mode, errors: &mut Vec<String>) -> Vec<(String, Option<f64>)> {
    let mut out: Vec<(String, Option<f64>)> = Vec::new();
    for entry in entries {
        let name = entry.name();
        if !catalog::is_known(mode, name) {
            errors.push(format!(
                "unknown check `{name}`; known checks: {}",
                catalog::known(mode).join(", ")
            ));
            continue;
        }
        if let Some(t) = entry.tolerance() {
            if !(t >= 0.0 && t.is_finite()) {
                errors.push(format!("check `{name}`: tolerance must be a finite non-negative number (got {t})"));
                continue;
            }
        }
        if out.iter().any(|(n, _)| n == name) {
            errors.push(format!("check `{name}` is listed twice"));
            continue;
        }
        out.push((name.to_string(), entry.tolerance()));
    }
    out
}

fn step_profile(p: &ParamProfile) -> Result<StepProfile, String> {
    match p {
        ParamProfile::Constant(v) => Ok(StepProfile::constant(*v)),
        ParamProfile::Steps { breaks, values } => {
            StepProfile::new(breaks.clone(), values.clone()).map_err(|e| e.to_string())
        }
    }
}

const KERNEL_VARS: &[&str] = &["t", "a", "b", "xa", "xb"];
const PROFILE_VARS: &[&str] = &["alpha"];

fn build_kernel(spec: &KernelSpec, errors: &mut Vec<String>) -> Option<Kernel> {
    let built = match spec {
        KernelSpec::HegselmannKrause { r } => Kernel::hegselmann_krause(*r).map_err(|e| e.to_string()),
        KernelSpec::BoundedConfidence { radius } => {
            step_profile(radius).and_then(|p| Kernel::bounded_confidence(p).map_err(|e| e.to_string()))
        }
        KernelSpec::BoundedInfluence { radius } => {
            step_profile(radius).and_then(|p| Kernel::bounded_influence(p).map_err(|e| e.to_string()))
        }
        KernelSpec::GaussianDecay { sigma } => {
            step_profile(sigma).and_then(|p| Kernel::gaussian_decay(p).map_err(|e| e.to_string()))
        }
        KernelSpec::RingSensing { r_min, r_max } => Kernel::ring_sensing(*r_min, *r_max).map_err(|e| e.to_string()),
        KernelSpec::TypedConfidence { r, r_index } => {
            Kernel::typed_confidence(*r, *r_index).map_err(|e| e.to_string())
        }
        KernelSpec::Constant { c } => Kernel::constant(*c).map_err(|e| e.to_string()),
        KernelSpec::Zero => Ok(Kernel::zero()),
        KernelSpec::FiniteConsensus { blocks, cyclic, segments } => {
            let mut segs = Vec::with_capacity(segments.len());
            let mut bad = None;
            for (s, seg) in segments.iter().enumerate() {
                if seg.weights.len() != *blocks || seg.weights.iter().any(|row| row.len() != *blocks) {
                    bad = Some(format!("segment {s}: weights must be {blocks} rows of {blocks} entries"));
                    break;
                }
                segs.push(ScheduleSegment {
                    duration: seg.duration,
                    weights: seg.weights.concat(),
                });
            }
            match bad {
                Some(msg) => Err(msg),
                None => Schedule::new(*blocks, segs, *cyclic)
                    .map(opinion_lab::finite_consensus_embed)
                    .map_err(|e| e.to_string()),
            }
        }
        KernelSpec::AlternatingThreeBlock => Ok(opinion_lab::finite_consensus_embed(Schedule::alternating_three_block())),
        KernelSpec::Counterexample { p, c0, n_cluster } => {
            let d = CounterexampleParams::default();
            CounterexampleParams::new(
                p.unwrap_or(d.exponent),
                c0.unwrap_or(d.c0),
                d.n_interval,
                n_cluster.unwrap_or(d.n_cluster),
            )
            .map(Kernel::counterexample)
            .map_err(|e| e.to_string())
        }
        KernelSpec::Custom {
            expr,
            w_bound,
            lipschitz,
            symmetric,
            position_only,
        } => Expression::parse(expr, KERNEL_VARS, &[0.0, 0.5, 0.5, 0.5, 0.5]).and_then(|e| {
            let e = Arc::new(e);
            let rule = CustomRule::new("custom", move |t, a, b, xa, xb| e.eval_or_nan(&[t, a, b, xa, xb]));
            Kernel::custom(rule, *w_bound, *lipschitz, *symmetric, *position_only).map_err(|e| e.to_string())
        }),
    };
    built.map_err(|e| errors.push(format!("kernel: {e}"))).ok()
}

fn build_initial(spec: &ProfileSpec, n: usize, errors: &mut Vec<String>) -> Option<Ensemble> {
    let profile: Box<dyn Fn(f64) -> f64> = match spec {
        ProfileSpec::Uniform => Box::new(|a| a),
        ProfileSpec::Constant { value } => {
            let v = *value;
            Box::new(move |_| v)
        }
        ProfileSpec::Piecewise { breaks, values } => match StepProfile::new(breaks.clone(), values.clone()) {
            Ok(p) => Box::new(move |a| p.value_at(a)),
            Err(e) => {
                errors.push(format!("initial_profile: {e}"));
                return None;
            }
        },
        ProfileSpec::Expression { expr } => match Expression::parse(expr, PROFILE_VARS, &[0.5]) {
            Ok(e) => Box::new(move |a| e.eval_or_nan(&[a])),
            Err(e) => {
                errors.push(format!("initial_profile: {e}"));
                return None;
            }
        },
    };
    if n < 2 {
        return None;
    }
    let ens = match uniform_ensemble(n, profile) {
        Ok(e) => e,
        Err(e) => {
            errors.push(format!("initial_profile: {e}"));
            return None;
        }
    };
    if let Some((i, x)) = ens.opinions().iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
        errors.push(format!(
            "initial_profile: opinion {x} at node {i} (alpha = {}) is outside [0, 1]",
            ens.indices()[i]
        ));
        return None;
    }
    Some(ens)
}

/// Create `dir` if needed and make sure a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<(), String> {
    let fail = |e: io::Error| format!("output_dir {} is not writable: {e}", dir.display());
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".opinion-lab-write-probe");
    fs::write(&probe, b"").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)
}

/// Settings for `counterexample`: flags over the optional file over defaults.
pub fn counterexample_settings(
    path: Option<&Path>,
    flags: &CounterexampleSpec,
    overrides: &Overrides,
) -> Result<CounterexampleSettings, ConfigError> {
    let label = path.map_or_else(|| PathBuf::from("<flags>"), Path::to_path_buf);
    let file: CounterexampleFile = match path {
        Some(p) => parse_toml(p, &read(p)?)?,
        None => CounterexampleFile::default(),
    };
    let f = &file.counterexample;
    let mut spec = CounterexampleSpec {
        p: flags.p.or(f.p),
        c0: flags.c0.or(f.c0),
        n_interval: flags.n_interval.or(f.n_interval),
        n_cluster: flags.n_cluster.or(f.n_cluster),
        t_start: flags.t_start.or(f.t_start),
        t_end: flags.t_end.or(f.t_end),
        sample_dt: flags.sample_dt.or(f.sample_dt),
        delta: flags.delta.or(f.delta),
        verify_at: flags.verify_at.clone().or_else(|| f.verify_at.clone()),
        tracked_agents: flags.tracked_agents.or(f.tracked_agents),
        pair_budget: flags.pair_budget.or(f.pair_budget),
        checks: f.checks.clone(),
    };
    merge_checks(&mut spec.checks, &overrides.checks);

    let mut errors = Vec::new();
    let d = CounterexampleParams::default();
    let params = CounterexampleParams::new(
        spec.p.unwrap_or(d.exponent),
        spec.c0.unwrap_or(d.c0),
        spec.n_interval.unwrap_or(d.n_interval),
        spec.n_cluster.unwrap_or(d.n_cluster),
    )
    .map_err(|e| errors.push(format!("counterexample: {e}")))
    .ok();
    let t_start = spec.t_start.unwrap_or(1.0);
    let t_end = spec.t_end.unwrap_or(80.0);
    let sample_dt = spec.sample_dt.unwrap_or(0.05);
    let delta = spec.delta.unwrap_or(0.01);
    let verify_at = spec.verify_at.clone().unwrap_or_else(|| vec![t_end]);
    if !(t_start >= 0.0 && t_start.is_finite()) {
        errors.push(format!("counterexample: t_start must be non-negative (got {t_start})"));
    }
    if !(t_end > t_start && t_end.is_finite()) {
        errors.push(format!("counterexample: t_end = {t_end} must exceed t_start = {t_start}"));
    }
    if !(sample_dt > 0.0) {
        errors.push(format!("counterexample: sample_dt must be positive (got {sample_dt})"));
    }
    if !(0.0..0.5).contains(&delta) {
        errors.push(format!("counterexample: delta must lie in [0, 0.5) (got {delta})"));
    }
    if let Some(t) = verify_at.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        errors.push(format!("counterexample: verify_at times must be non-negative (got {t})"));
    }
    let checks = validate_checks(&spec.checks, Mode::Counterexample, &mut errors);
    let checks = if checks.is_empty() && spec.checks.is_empty() {
        catalog::COUNTEREXAMPLE_CHECKS.iter().map(|c| (c.name.to_string(), None)).collect()
    } else {
        checks
    };
    let name = file.name.clone().unwrap_or_else(|| "counterexample".to_string());
    let output_dir = overrides
        .output
        .clone()
        .or_else(|| file.output_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(&name));
    if let Err(e) = ensure_writable(&output_dir) {
        errors.push(e);
    }
    match params {
        Some(params) if errors.is_empty() => Ok(CounterexampleSettings {
            name,
            output_dir,
            rng_seed: overrides.seed.or(file.rng_seed).unwrap_or(0),
            params,
            t_start,
            t_end,
            sample_dt,
            delta,
            verify_at,
            tracked_agents: spec.tracked_agents.unwrap_or(8),
            pair_budget: spec.pair_budget.unwrap_or(10_000),
            checks,
            source: spec,
        }),
        _ => Err(ConfigError::Invalid { path: label, errors }),
    }
}
