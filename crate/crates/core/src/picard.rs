//! Existence by contraction: the integral operator
//! `[P y]_t(a) = x0(a) + int_0^t sum_j m_j w(s, a, b_j, y_s(a), y_s(b_j)) (y_s(b_j) - y_s(a)) ds`
//! iterated on short windows `b < min(1/(4W), 1/(2(W + 4L)))`, then chained.
//!
//! Window functions live on a uniform time grid and the time integral uses
//! the trapezoid rule, so the fixed point is the trapezoid (Crank-Nicolson)
//! discretization of the flow.

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{self, Ensemble, IntegratorConfig, Method, Trajectory};
use crate::error::{EnsembleError, PicardError};
use crate::kernels::Kernel;

/// Iterates must stay in the ball `||y|| <= 2`.
const ITERATE_BALL: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    /// Grid points per window, both ends included.
    pub grid_points: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Window length; `None` uses `0.9 * b_max`.
    pub window: Option<f64>,
    /// Keep every iterate in the window record.
    pub keep_iterates: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            grid_points: 64,
            tol: 1e-9,
            max_iters: 500,
            window: None,
            keep_iterates: false,
        }
    }
}

/// `min(1/(4W), 1/(2(W + 4L)))`, infinite for the zero kernel.
pub fn window_bound(kernel: &Kernel) -> Result<f64, PicardError> {
    let l = kernel.lipschitz().ok_or(PicardError::MissingLipschitz)?;
    let w = kernel.w_bound();
    Ok((1.0 / (4.0 * w)).min(1.0 / (2.0 * (w + 4.0 * l))))
}

/// A function of time on a window, sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowFunction {
    pub times: Vec<f64>,
    /// `values[k][i]`: node `i` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl WindowFunction {
    /// Uniform grid of `points` times on `[t_start, t_start + b]`, constant in time.
    pub fn constant(t_start: f64, b: f64, points: usize, x: &[f64]) -> Self {
        let m = (points - 1) as f64;
        let times = (0..points)
            .map(|k| if k + 1 == points { t_start + b } else { t_start + b * k as f64 / m })
            .collect();
        Self {
            times,
            values: vec![x.to_vec(); points],
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|row| row.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `|y_{k+1}(a) - y_k(a)| / (t_{k+1} - t_k)`.
    pub fn time_lipschitz(&self) -> f64 {
        self.values
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(v, t)| {
                let h = t[1] - t[0];
                v[0].iter().zip(&v[1]).map(|(a, b)| (b - a).abs() / h).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn final_values(&self) -> &[f64] {
        self.values.last().expect("window has grid points")
    }
}

/// One application of `P` with `x0` as the value at the window start.
pub fn picard_operator_apply(kernel: &Kernel, x0: &Ensemble, y: &WindowFunction) -> Result<WindowFunction, PicardError> {
    kernel.lipschitz().ok_or(PicardError::MissingLipschitz)?;
    if y.times.len() < 2 || y.values.len() != y.times.len() || y.values.iter().any(|r| r.len() != x0.len()) {
        return Err(PicardError::ShapeMismatch);
    }
    let norm = y.sup_norm();
    if !(norm <= ITERATE_BALL) {
        return Err(PicardError::IterateTooLarge(norm));
    }
    let (idx, mass) = (x0.indices(), x0.masses());
    let f: Vec<Vec<f64>> = y
        .times
        .par_iter()
        .zip(y.values.par_iter())
        .map(|(&t, v)| ensemble::velocities(&kernel.at(t), idx, v, mass))
        .collect();

    let mut values = Vec::with_capacity(y.times.len());
    values.push(x0.opinions().to_vec());
    for k in 1..y.times.len() {
        let h = y.times[k] - y.times[k - 1];
        let prev: &Vec<f64> = &values[k - 1];
        let next = (0..x0.len())
            .map(|i| prev[i] + 0.5 * h * (f[k - 1][i] + f[k][i]))
            .collect();
        values.push(next);
    }
    Ok(WindowFunction {
        times: y.times.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardWindow {
    pub t_start: f64,
    pub b: f64,
    pub iterations: usize,
    /// `||y_{k+1} - y_k||` for each iteration.
    pub residuals: Vec<f64>,
    /// `residuals[k] / residuals[k - 1]` for `k >= 1`.
    pub ratios: Vec<f64>,
    /// The theoretical contraction factor `2 b (W + 4L)`.
    pub ratio_bound: f64,
    pub converged: bool,
    pub max_iterate_norm: f64,
    pub max_time_lipschitz: f64,
    /// `||P y* - y*||` for the returned fixed point.
    pub fixed_point_residual: f64,
    pub solution: WindowFunction,
    #[serde(skip)]
    pub iterates: Vec<WindowFunction>,
}

impl PicardWindow {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

fn check_window(kernel: &Kernel, t_start: f64, b: f64) -> Result<f64, PicardError> {
    let bound = window_bound(kernel)?;
    if !(b > 0.0 && b < bound) {
        return Err(PicardError::WindowTooLong { b, bound });
    }
    if let Some(&bp) = kernel.breakpoints_in(t_start, t_start + b).first() {
        return Err(PicardError::BreakpointInWindow {
            t_start,
            t_end: t_start + b,
            breakpoint: bp,
        });
    }
    Ok(bound)
}

/// Iterate `P` from the constant initial guess on `[t_start, t_start + b]`.
pub fn picard_window_solve(
    kernel: &Kernel,
    x0: &Ensemble,
    t_start: f64,
    b: f64,
    config: &PicardConfig,
) -> Result<PicardWindow, PicardError> {
    if config.grid_points < 2 {
        return Err(PicardError::BadConfig("grid_points must be at least 2".into()));
    }
    let guess = WindowFunction::constant(t_start, b, config.grid_points, x0.opinions());
    picard_window_solve_from(kernel, x0, b, config, guess)
}

/// Iterate `P` from an explicit initial guess, whose grid fixes the window.
pub fn picard_window_solve_from(
    kernel: &Kernel,
    x0: &Ensemble,
    b: f64,
    config: &PicardConfig,
    guess: WindowFunction,
) -> Result<PicardWindow, PicardError> {
    if !(config.tol > 0.0) || config.max_iters == 0 {
        return Err(PicardError::BadConfig("tol must be positive and max_iters at least 1".into()));
    }
    let t_start = guess.times[0];
    check_window(kernel, t_start, b)?;
    let l = kernel.lipschitz().unwrap_or(0.0);
    let mut window = PicardWindow {
        t_start,
        b,
        iterations: 0,
        residuals: Vec::new(),
        ratios: Vec::new(),
        ratio_bound: 2.0 * b * (kernel.w_bound() + 4.0 * l),
        converged: false,
        max_iterate_norm: guess.sup_norm(),
        max_time_lipschitz: 0.0,
        fixed_point_residual: f64::NAN,
        solution: guess.clone(),
        iterates: Vec::new(),
    };
    if config.keep_iterates {
        window.iterates.push(guess.clone());
    }
    let mut y = guess;
    while window.iterations < config.max_iters {
        let next = picard_operator_apply(kernel, x0, &y)?;
        window.iterations += 1;
        let r = next.distance(&y);
        if let Some(&prev) = window.residuals.last() {
            if prev > 0.0 {
                window.ratios.push(r / prev);
            }
        }
        window.residuals.push(r);
        window.max_iterate_norm = window.max_iterate_norm.max(next.sup_norm());
        window.max_time_lipschitz = window.max_time_lipschitz.max(next.time_lipschitz());
        if config.keep_iterates {
            window.iterates.push(next.clone());
        }
        y = next;
        if r < config.tol {
            window.converged = true;
            break;
        }
    }
    if !window.converged {
        return Err(PicardError::NotConverged {
            t_start,
            iterations: window.iterations,
            residual: window.residuals.last().copied().unwrap_or(f64::NAN),
            ratio: window.ratios.last().copied().unwrap_or(f64::NAN),
        });
    }
    window.fixed_point_residual = picard_operator_apply(kernel, x0, &y)?.distance(&y);
    window.solution = y;
    Ok(window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardRun {
    pub windows: Vec<PicardWindow>,
    /// Every grid time of every window, window joins counted once.
    pub trajectory: Trajectory,
}

/// Chain windows from `x0.time()` to `t_end`. Windows are shortened at
/// `t_end` and at kernel time breakpoints.
pub fn picard_solve(kernel: &Kernel, x0: &Ensemble, t_end: f64, config: &PicardConfig) -> Result<PicardRun, PicardError> {
    let bound = window_bound(kernel)?;
    let b = match config.window {
        Some(b) => b,
        None if bound.is_finite() => 0.9 * bound,
        None => t_end - x0.time(),
    };
    if !(b > 0.0) || !(t_end > x0.time()) {
        return Err(PicardError::BadConfig(format!(
            "need a positive window and t_end > {} (window {b}, t_end {t_end})",
            x0.time()
        )));
    }
    let eps = 1e-12 * t_end.abs().max(1.0);
    let mut windows = Vec::new();
    let mut snapshots = vec![x0.clone()];
    let mut current = x0.clone();
    while t_end - current.time() > eps {
        let t = current.time();
        let mut len = b.min(t_end - t);
        if let Some(&bp) = kernel.breakpoints_in(t, t + len).first() {
            len = bp - t;
        }
        let win = picard_window_solve(kernel, &current, t, len, config).map_err(|e| PicardError::Window {
            t_start: t,
            source: Box::new(e),
        })?;
        for (&tk, v) in win.solution.times.iter().zip(&win.solution.values).skip(1) {
            snapshots.push(x0.with_opinions(tk, v.clone()));
        }
        current = snapshots.last().expect("window adds snapshots").clone();
        windows.push(win);
    }
    Ok(PicardRun {
        windows,
        trajectory: Trajectory::from_snapshots(snapshots, kernel.w_bound()),
    })
}

/// Fixed points from the constant guess and from `guess + shift` differ by at most this.
pub fn uniqueness_probe(
    kernel: &Kernel,
    x0: &Ensemble,
    t_start: f64,
    b: f64,
    shift: f64,
    config: &PicardConfig,
) -> Result<f64, PicardError> {
    let base = picard_window_solve(kernel, x0, t_start, b, config)?;
    let guess = WindowFunction::constant(t_start, b, config.grid_points, x0.opinions()).map_values(|x| x + shift);
    let other = picard_window_solve_from(kernel, x0, b, config, guess)?;
    Ok(base.solution.distance(&other.solution))
}

/// Sup-norm distance between a Picard trajectory and RK4 run through the
/// same snapshot times with `substeps` steps per grid interval.
pub fn cross_validate(kernel: &Kernel, run: &PicardRun, substeps: usize) -> Result<f64, EnsembleError> {
    let snaps = &run.trajectory.snapshots;
    let mut x = snaps[0].clone();
    let mut worst: f64 = 0.0;
    for target in &snaps[1..] {
        let span = target.time() - x.time();
        let mut cfg = IntegratorConfig::new(Method::Rk4, span / substeps as f64, target.time());
        cfg.record_every = substeps;
        cfg.clamp_to_box = false;
        let step = ensemble::integrate(&x, kernel, &cfg)?;
        x = step.last().clone();
        let d = x
            .opinions()
            .iter()
            .zip(target.opinions())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok(worst)
}
