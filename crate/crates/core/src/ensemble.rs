//! Quadrature discretization of the agent continuum and time integration of
//! `x_i' = sum_j m_j w(t, a_i, a_j, x_i, x_j) (x_j - x_i)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EnsembleError;
use crate::kernels::{Kernel, KernelAt};
use crate::sum::CompensatedSum;

const MASS_TOLERANCE: f64 = 1e-12;
/// Below this node count the rayon fan-out costs more than it saves.
const PARALLEL_MIN_NODES: usize = 64;

/// One quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub index: f64,
    pub opinion: f64,
    pub mass: f64,
}

/// A snapshot of `x_t` on quadrature nodes. Index and mass arrays are shared
/// between snapshots of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    t: f64,
    index: Arc<[f64]>,
    opinion: Vec<f64>,
    mass: Arc<[f64]>,
}

impl Ensemble {
    pub fn new(
        t: f64,
        index: Vec<f64>,
        opinion: Vec<f64>,
        mass: Vec<f64>,
    ) -> Result<Self, EnsembleError> {
        if index.len() != opinion.len() || index.len() != mass.len() {
            return Err(EnsembleError::LengthMismatch);
        }
        if index.is_empty() {
            return Err(EnsembleError::TooFewNodes { min: 1, got: 0 });
        }
        for (i, &a) in index.iter().enumerate() {
            let ordered = i == 0 || a > index[i - 1];
            if !((0.0..=1.0).contains(&a) && ordered) {
                return Err(EnsembleError::BadIndex(i));
            }
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(EnsembleError::BadMass(i));
            }
        }
        for (node, &value) in opinion.iter().enumerate() {
            if !value.is_finite() {
                return Err(EnsembleError::NonFiniteOpinion { node, value });
            }
        }
        let total: f64 = crate::sum::compensated_sum(mass.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(EnsembleError::MassNotNormalized(total));
        }
        Ok(Self {
            t,
            index: index.into(),
            opinion,
            mass: mass.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.opinion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinion.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn indices(&self) -> &[f64] {
        &self.index
    }

    pub fn opinions(&self) -> &[f64] {
        &self.opinion
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.len()).map(|i| Node {
            index: self.index[i],
            opinion: self.opinion[i],
            mass: self.mass[i],
        })
    }

    /// Same nodes, new time and opinions.
    ///
    /// # Panics
    /// If `opinions` has a different length.
    pub fn with_opinions(&self, t: f64, opinions: Vec<f64>) -> Self {
        assert_eq!(opinions.len(), self.len(), "opinion count must match node count");
        Self {
            t,
            index: Arc::clone(&self.index),
            opinion: opinions,
            mass: Arc::clone(&self.mass),
        }
    }

    /// Largest distance of any opinion outside `[0, 1]`.
    pub fn box_excursion(&self) -> f64 {
        self.opinion
            .iter()
            .map(|&x| (-x).max(x - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Midpoint nodes `a_i = (i - 1/2) / n` with mass `1/n`.
pub fn uniform_ensemble<F: Fn(f64) -> f64>(n: usize, profile: F) -> Result<Ensemble, EnsembleError> {
    if n < 2 {
        return Err(EnsembleError::TooFewNodes { min: 2, got: n });
    }
    let index: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let mut opinion = Vec::with_capacity(n);
    for &a in &index {
        let x = profile(a);
        if !(0.0..=1.0).contains(&x) {
            return Err(EnsembleError::ProfileOutOfRange { agent: a, value: x });
        }
        opinion.push(x);
    }
    Ensemble::new(0.0, index, opinion, vec![1.0 / n as f64; n])
}

/// Velocities at the ensemble's own time.
pub fn rhs(ensemble: &Ensemble, kernel: &Kernel) -> Vec<f64> {
    velocities(&kernel.at(ensemble.time()), ensemble.indices(), ensemble.opinions(), ensemble.masses())
}

/// `v_i = sum_j m_j w_ij (x_j - x_i)`, compensated and in node order.
/// Rows run in parallel; each row is a sequential sum, so the result does not
/// depend on the thread count.
pub(crate) fn velocities(kernel: &KernelAt<'_>, index: &[f64], opinion: &[f64], mass: &[f64]) -> Vec<f64> {
    let row = |i: usize| {
        let (a, x) = (index[i], opinion[i]);
        let mut acc = CompensatedSum::new();
        for j in 0..opinion.len() {
            let w = kernel.weight(a, index[j], x, opinion[j]);
            if w != 0.0 {
                acc.add(mass[j] * w * (opinion[j] - x));
            }
        }
        acc.value()
    };
    if opinion.len() < PARALLEL_MIN_NODES {
        (0..opinion.len()).map(row).collect()
    } else {
        (0..opinion.len()).into_par_iter().map(row).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    /// Absolute end time.
    pub t_end: f64,
    /// Clamp back into `[0, 1]` after each step. The excursion is checked
    /// against the box tolerance either way.
    pub clamp_to_box: bool,
    pub record_every: usize,
    /// Stop once `max |v|` falls below this.
    pub stop_velocity: Option<f64>,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, t_end: f64) -> Self {
        Self {
            method,
            dt,
            t_end,
            clamp_to_box: true,
            record_every: 1,
            stop_velocity: None,
        }
    }

    pub fn validate(&self, w_bound: f64, t0: f64) -> Result<(), EnsembleError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EnsembleError::BadConfig(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.t_end > t0 && self.t_end.is_finite()) {
            return Err(EnsembleError::BadConfig(format!(
                "t_end = {} must exceed the start time {t0}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(EnsembleError::BadConfig("record_every must be at least 1".into()));
        }
        if w_bound > 0.0 {
            let limit = 0.5 / w_bound;
            if self.dt > limit {
                return Err(EnsembleError::StepTooLarge {
                    dt: self.dt,
                    w_bound,
                    limit,
                });
            }
        }
        Ok(())
    }

    /// Allowed excursion outside `[0, 1]` before clamping: `10 dt^2 W^2`.
    pub fn box_tolerance(&self, w_bound: f64) -> f64 {
        (10.0 * self.dt * self.dt * w_bound * w_bound).max(1e-15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    /// `max |v|` at the start of the step.
    pub max_velocity: f64,
    /// Largest per-node displacement over the step.
    pub max_displacement: f64,
    /// Largest distance moved by clamping.
    pub clamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Ensemble>,
    pub steps: Vec<StepRecord>,
    /// `W` of the kernel that produced the trajectory.
    pub w_bound: f64,
    pub stopped_early: bool,
}

impl Trajectory {
    /// A trajectory assembled from snapshots computed elsewhere.
    pub fn from_snapshots(snapshots: Vec<Ensemble>, w_bound: f64) -> Self {
        Self {
            snapshots,
            steps: Vec::new(),
            w_bound,
            stopped_early: false,
        }
    }

    pub fn first(&self) -> &Ensemble {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Ensemble {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Ensemble::time).collect()
    }

    /// `max over steps of max_displacement / (W dt)`; at most 1 up to rounding.
    pub fn time_lipschitz_ratio(&self) -> f64 {
        if self.w_bound == 0.0 {
            let moved = self.steps.iter().any(|s| s.max_displacement > 0.0);
            return if moved { f64::INFINITY } else { 0.0 };
        }
        self.steps
            .iter()
            .map(|s| s.max_displacement / (self.w_bound * s.dt))
            .fold(0.0, f64::max)
    }
}

/// Step times from `t0` to `t_end`: multiples of `dt`, every kernel
/// breakpoint, and `t_end`. The flag marks breakpoints.
fn time_grid(t0: f64, cfg: &IntegratorConfig, kernel: &Kernel) -> Vec<(f64, bool)> {
    let span = cfg.t_end - t0;
    let steps = ((span / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<(f64, bool)> = (0..steps).map(|k| (t0 + k as f64 * cfg.dt, false)).collect();
    grid.push((cfg.t_end, false));
    let eps = 1e-12 * cfg.t_end.abs().max(1.0);
    // a switch at t_end itself still needs the left limit in the last step
    grid.extend(kernel.breakpoints_in(t0, cfg.t_end + eps).into_iter().map(|b| (b, true)));
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(grid.len());
    for (t, bp) in grid {
        match out.last_mut() {
            Some(last) if t - last.0 <= eps => {
                if bp {
                    if last.0 != cfg.t_end {
                        last.0 = t;
                    }
                    last.1 = true;
                }
            }
            _ => out.push((t, bp)),
        }
    }
    out.retain(|p| p.0 <= cfg.t_end);
    // t0 itself must survive merging with a nearby breakpoint
    out[0].0 = t0;
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_finite(v: &[f64], t: f64) -> Result<(), EnsembleError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(node) => Err(EnsembleError::NonFiniteVelocity { node, t }),
        None => Ok(()),
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + h * ki).collect()
}

struct Stepper<'a> {
    kernel: &'a Kernel,
    index: &'a [f64],
    mass: &'a [f64],
}

impl Stepper<'_> {
    fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, EnsembleError> {
        let v = velocities(&self.kernel.at(t), self.index, x, self.mass);
        check_finite(&v, t)?;
        Ok(v)
    }

    /// One step from `t0` to `t1`, given `k1 = f(t0, x)`. When `t1` is a
    /// kernel breakpoint the last stage uses the left limit there.
    fn step(
        &self,
        method: Method,
        t0: f64,
        t1: f64,
        t1_is_break: bool,
        x: &[f64],
        k1: &[f64],
    ) -> Result<Vec<f64>, EnsembleError> {
        let h = t1 - t0;
        match method {
            Method::ExplicitEuler => Ok(axpy(x, h, k1)),
            Method::Rk4 => {
                let tm = t0 + 0.5 * h;
                let t_last = if t1_is_break { t1.next_down() } else { t1 };
                let k2 = self.eval(tm, &axpy(x, 0.5 * h, k1))?;
                let k3 = self.eval(tm, &axpy(x, 0.5 * h, &k2))?;
                let k4 = self.eval(t_last, &axpy(x, h, &k3))?;
                Ok((0..x.len())
                    .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect())
            }
        }
    }
}

/// Integrate from `initial.time()` to `config.t_end`.
pub fn integrate(initial: &Ensemble, kernel: &Kernel, config: &IntegratorConfig) -> Result<Trajectory, EnsembleError> {
    let (traj, err) = integrate_partial(initial, kernel, config)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`integrate`], but a failure mid-run returns the trajectory so far
/// together with the error. Validation errors are returned directly.
#[allow(clippy::type_complexity)]
pub fn integrate_partial(
    initial: &Ensemble,
    kernel: &Kernel,
    config: &IntegratorConfig,
) -> Result<(Trajectory, Option<EnsembleError>), EnsembleError> {
    let w = kernel.w_bound();
    let t0 = initial.time();
    config.validate(w, t0)?;
    if let Some((node, &value)) = initial
        .opinions()
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..=1.0).contains(*x))
    {
        return Err(EnsembleError::InitialOutOfBox { node, value });
    }

    let mut traj = Trajectory {
        snapshots: vec![initial.clone()],
        steps: Vec::new(),
        w_bound: w,
        stopped_early: false,
    };
    let stepper = Stepper {
        kernel,
        index: initial.indices(),
        mass: initial.masses(),
    };
    let tol_box = config.box_tolerance(w);
    let grid = time_grid(t0, config, kernel);
    let mut x = initial.opinions().to_vec();

    for (k, pair) in grid.windows(2).enumerate() {
        let ((ta, _), (tb, tb_break)) = (pair[0], pair[1]);
        let k1 = match stepper.eval(ta, &x) {
            Ok(v) => v,
            Err(e) => return Ok((traj, Some(e))),
        };
        let vmax = max_abs(&k1);
        if config.stop_velocity.is_some_and(|s| vmax < s) {
            if traj.last().time() != ta {
                traj.snapshots.push(initial.with_opinions(ta, x));
            }
            traj.stopped_early = true;
            return Ok((traj, None));
        }
        let mut next = match stepper.step(config.method, ta, tb, tb_break, &x, &k1) {
            Ok(v) => v,
            Err(e) => return Ok((traj, Some(e))),
        };
        let excursion = next.iter().map(|&y| (-y).max(y - 1.0).max(0.0)).fold(0.0, f64::max);
        if excursion > tol_box {
            return Ok((
                traj,
                Some(EnsembleError::BoxViolation {
                    t: tb,
                    excursion,
                    tolerance: tol_box,
                }),
            ));
        }
        if config.clamp_to_box {
            for y in &mut next {
                *y = y.clamp(0.0, 1.0);
            }
        }
        let disp = x.iter().zip(&next).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        traj.steps.push(StepRecord {
            t: tb,
            dt: tb - ta,
            max_velocity: vmax,
            max_displacement: disp,
            clamp: if config.clamp_to_box { excursion } else { 0.0 },
        });
        x = next;
        let last = k + 2 == grid.len();
        if (k + 1) % config.record_every == 0 || last {
            traj.snapshots.push(initial.with_opinions(tb, x.clone()));
        }
    }
    Ok((traj, None))
}
