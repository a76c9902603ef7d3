//! The cycling construction: an exact solution whose opinion distribution is
//! stationary while a positive mass of agents keeps moving forever.
//!
//! Three populations are involved. The interval `I = [0, 2]` follows the fold
//! map `x_t(a) = S(a + Phi(t))`, sweeping `[-1/2, 1/2]` at speed
//! `v(t) = (1 + t)^-p`. Two clusters `C_L`, `C_R` sit beyond `-1/2` and `1/2`
//! and turn agents around at the ends, drifting inward at
//! `(2 sqrt 2 / 3) v^{3/2}`, which is integrable, so they stay clear.
//!
//! The raw construction has total mass 4. [`to_ensemble`] rescales it onto the
//! unit agent domain: `I` occupies `[0, 1/2)`, `C_L` `[1/2, 3/4)` and `C_R`
//! `[3/4, 1]`, masses are divided by 4 and weights multiplied by 4.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{self, OrderAuditConfig, OrderAuditReport};
use crate::ensemble::{self, Ensemble, Trajectory};
use crate::error::CounterexampleError;
use crate::kernels::Kernel;

/// Cluster drift coefficient `2 sqrt(2) / 3`.
pub const DRIFT: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleParams {
    /// Speed exponent `p` in `v(t) = (1 + t)^-p`.
    pub exponent: f64,
    /// Initial distance of `C_R` from the origin.
    pub c0: f64,
    pub n_interval: usize,
    pub n_cluster: usize,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        Self {
            exponent: 0.75,
            c0: 8.05,
            n_interval: 2000,
            n_cluster: 16,
        }
    }
}

impl CounterexampleParams {
    pub fn new(
        exponent: f64,
        c0: f64,
        n_interval: usize,
        n_cluster: usize,
    ) -> Result<Self, CounterexampleError> {
        let params = Self {
            exponent,
            c0,
            n_interval,
            n_cluster,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CounterexampleError> {
        let p = self.exponent;
        if !(p > 2.0 / 3.0 && p < 1.0) {
            return Err(CounterexampleError::BadExponent(p));
        }
        let bound = self.c0_bound();
        if !(self.c0 > bound) {
            return Err(CounterexampleError::ClusterTooClose {
                c0: self.c0,
                bound,
            });
        }
        if self.n_interval < 2 || self.n_cluster < 1 {
            return Err(CounterexampleError::TooFewNodes);
        }
        Ok(())
    }

    pub fn with_n_interval(self, n_interval: usize) -> Self {
        Self { n_interval, ..self }
    }

    /// `v(t) = (1 + t)^-p`.
    pub fn speed(&self, t: f64) -> f64 {
        (1.0 + t).powf(-self.exponent)
    }

    /// `Phi(t) = int_0^t v`.
    pub fn phase(&self, t: f64) -> f64 {
        let q = 1.0 - self.exponent;
        ((1.0 + t).powf(q) - 1.0) / q
    }

    /// `eps(t) = sqrt(2 v(t))`, the width of the interaction windows.
    pub fn epsilon(&self, t: f64) -> f64 {
        (2.0 * self.speed(t)).sqrt()
    }

    /// `int_0^t v^{3/2}`.
    pub fn drift_integral(&self, t: f64) -> f64 {
        let q = 1.5 * self.exponent - 1.0;
        (1.0 - (1.0 + t).powf(-q)) / q
    }

    /// Total inward travel of each cluster over `[0, inf)`.
    pub fn total_drift(&self) -> f64 {
        DRIFT / (1.5 * self.exponent - 1.0)
    }

    /// `c0` must exceed `1/2 + total_drift`.
    pub fn c0_bound(&self) -> f64 {
        0.5 + self.total_drift()
    }

    pub fn cluster_right(&self, t: f64) -> f64 {
        self.c0 - DRIFT * self.drift_integral(t)
    }

    pub fn cluster_left(&self, t: f64) -> f64 {
        -self.cluster_right(t)
    }

    /// Lower bound on `x(C_R) - 1/2` over all time.
    pub fn min_cluster_gap(&self) -> f64 {
        self.c0 - self.c0_bound()
    }
}

/// Uniform bound on the normalized weights.
pub(crate) fn normalized_weight_bound(params: &CounterexampleParams) -> f64 {
    4.0 * (1.0 / params.min_cluster_gap()).max(1.0)
}

/// Triangle wave `S(s) = -1/2 + |1 - (s mod 2)|`.
pub fn fold_map(s: f64) -> f64 {
    -0.5 + (1.0 - s.rem_euclid(2.0)).abs()
}

/// An agent of the raw construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agent {
    /// Index in `[0, 2]`.
    Interval(f64),
    ClusterLeft,
    ClusterRight,
}

impl Agent {
    /// Inverse of the unit-domain layout used by [`to_ensemble`].
    pub fn from_unit(alpha: f64) -> Self {
        if alpha < 0.5 {
            Agent::Interval(4.0 * alpha)
        } else if alpha < 0.75 {
            Agent::ClusterLeft
        } else {
            Agent::ClusterRight
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    Right,
    Left,
}

#[inline]
fn heading(alpha: f64, phase: f64) -> Heading {
    if ((alpha + phase).floor() as i64).rem_euclid(2) == 1 {
        Heading::Right
    } else {
        Heading::Left
    }
}

/// Time-dependent quantities of the construction frozen at one `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instant {
    pub t: f64,
    pub phase: f64,
    pub speed: f64,
    pub epsilon: f64,
    pub cluster_right: f64,
}

impl Instant {
    pub fn new(params: &CounterexampleParams, t: f64) -> Self {
        Self {
            t,
            phase: params.phase(t),
            speed: params.speed(t),
            epsilon: params.epsilon(t),
            cluster_right: params.cluster_right(t),
        }
    }

    /// Symmetric weight between two raw agents.
    ///
    /// Right-movers interact with left-movers ahead of them within `eps`.
    /// Near `1/2` a right-mover also couples to `C_R` with weight
    /// `(eps^2 - (1/2 - x)^2) / (2 (x(C_R) - x))`; `-1/2` and `C_L` mirror this.
    /// Cluster positions are the analytic ones, which keeps the weight bounded.
    pub fn raw_weight(&self, a: Agent, b: Agent, xa: f64, xb: f64) -> f64 {
        use Agent::*;
        let eps = self.epsilon;
        match (a, b) {
            (Interval(aa), Interval(bb)) => {
                match (heading(aa, self.phase), heading(bb, self.phase)) {
                    (Heading::Right, Heading::Left) => window(xb - xa, eps),
                    (Heading::Left, Heading::Right) => window(xa - xb, eps),
                    _ => 0.0,
                }
            }
            (Interval(aa), ClusterRight) if heading(aa, self.phase) == Heading::Right => {
                self.corner_right(xa)
            }
            (ClusterRight, Interval(bb)) if heading(bb, self.phase) == Heading::Right => {
                self.corner_right(xb)
            }
            (Interval(aa), ClusterLeft) if heading(aa, self.phase) == Heading::Left => {
                self.corner_left(xa)
            }
            (ClusterLeft, Interval(bb)) if heading(bb, self.phase) == Heading::Left => {
                self.corner_left(xb)
            }
            _ => 0.0,
        }
    }

    /// Weight on the unit agent domain: raw weight times 4.
    #[inline]
    pub fn normalized_weight(&self, a: f64, b: f64, xa: f64, xb: f64) -> f64 {
        4.0 * self.raw_weight(Agent::from_unit(a), Agent::from_unit(b), xa, xb)
    }

    fn corner_right(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        if x >= 0.5 - eps && x <= 0.5 {
            let u = 0.5 - x;
            ((eps * eps - u * u) / (2.0 * (self.cluster_right - x))).max(0.0)
        } else {
            0.0
        }
    }

    fn corner_left(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        if x <= -0.5 + eps && x >= -0.5 {
            let u = 0.5 + x;
            ((eps * eps - u * u) / (2.0 * (x + self.cluster_right))).max(0.0)
        } else {
            0.0
        }
    }
}

#[inline]
fn window(d: f64, eps: f64) -> f64 {
    if d > 0.0 && d < eps {
        1.0
    } else {
        0.0
    }
}

/// Weight between two tagged agents at time `t`.
pub fn counterexample_weight(
    params: &CounterexampleParams,
    t: f64,
    a: Agent,
    b: Agent,
    xa: f64,
    xb: f64,
) -> f64 {
    Instant::new(params, t).raw_weight(a, b, xa, xb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleState {
    pub t: f64,
    pub phase: f64,
    /// Opinions of the interval nodes `a_i = 2 (i - 1/2) / n_interval`.
    pub interval_positions: Vec<f64>,
    pub cluster_left: f64,
    pub cluster_right: f64,
}

/// Midpoint nodes on `I = [0, 2]`.
pub fn interval_nodes(n_interval: usize) -> impl Iterator<Item = f64> {
    let n = n_interval as f64;
    (0..n_interval).map(move |i| 2.0 * (i as f64 + 0.5) / n)
}

pub fn analytic_position(params: &CounterexampleParams, t: f64, agent: Agent) -> f64 {
    match agent {
        Agent::Interval(a) => fold_map(a + params.phase(t)),
        Agent::ClusterLeft => params.cluster_left(t),
        Agent::ClusterRight => params.cluster_right(t),
    }
}

pub fn analytic_state(
    params: &CounterexampleParams,
    t: f64,
) -> Result<CounterexampleState, CounterexampleError> {
    if !(t >= 0.0) {
        return Err(CounterexampleError::NegativeTime(t));
    }
    let phase = params.phase(t);
    Ok(CounterexampleState {
        t,
        phase,
        interval_positions: interval_nodes(params.n_interval)
            .map(|a| fold_map(a + phase))
            .collect(),
        cluster_left: params.cluster_left(t),
        cluster_right: params.cluster_right(t),
    })
}

pub fn analytic_velocity(
    params: &CounterexampleParams,
    t: f64,
    agent: Agent,
) -> Result<f64, CounterexampleError> {
    if !(t >= 0.0) {
        return Err(CounterexampleError::NegativeTime(t));
    }
    let v = params.speed(t);
    match agent {
        Agent::Interval(alpha) => {
            if !(0.0..=2.0).contains(&alpha) {
                return Err(CounterexampleError::BadAgent(alpha));
            }
            let s = alpha + params.phase(t);
            if s == s.floor() {
                return Err(CounterexampleError::FoldPoint { alpha, t });
            }
            Ok(match heading(alpha, params.phase(t)) {
                Heading::Right => v,
                Heading::Left => -v,
            })
        }
        Agent::ClusterRight => Ok(-DRIFT * v.powf(1.5)),
        Agent::ClusterLeft => Ok(DRIFT * v.powf(1.5)),
    }
}

/// The analytic state at `t` laid out on the unit agent domain.
pub fn to_ensemble(params: &CounterexampleParams, t: f64) -> Result<Ensemble, CounterexampleError> {
    let state = analytic_state(params, t)?;
    let (ni, nc) = (params.n_interval, params.n_cluster);
    let len = ni + 2 * nc;
    let mut index = Vec::with_capacity(len);
    let mut opinion = Vec::with_capacity(len);
    let mut mass = Vec::with_capacity(len);
    for (a, &x) in interval_nodes(ni).zip(&state.interval_positions) {
        index.push(a / 4.0);
        opinion.push(x);
        mass.push(0.5 / ni as f64);
    }
    for (offset, x) in [(0.5, state.cluster_left), (0.75, state.cluster_right)] {
        for k in 0..nc {
            index.push(offset + (k as f64 + 0.5) / (4.0 * nc as f64));
            opinion.push(x);
            mass.push(0.25 / nc as f64);
        }
    }
    Ok(Ensemble::new(t, index, opinion, mass).expect("construction layout is a valid ensemble"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsVerification {
    pub t: f64,
    pub n_interval: usize,
    pub exclusion_radius: f64,
    pub max_abs_error: f64,
    pub interval_max_error: f64,
    pub cluster_max_error: f64,
    pub checked: usize,
    pub excluded: usize,
}

/// Evaluate the discretized right-hand side on the analytic state and compare
/// with the analytic velocities. Interval agents within `delta` of a fold
/// (where `a + Phi(t)` is an integer) are skipped.
pub fn verify_rhs(
    params: &CounterexampleParams,
    t: f64,
    n_interval: usize,
    delta: f64,
) -> Result<RhsVerification, CounterexampleError> {
    let params = params.with_n_interval(n_interval);
    params.validate()?;
    let ens = to_ensemble(&params, t)?;
    let kernel = Kernel::counterexample(params);
    let velocity = ensemble::rhs(&ens, &kernel);
    let phase = params.phase(t);

    let errors: Vec<Option<(bool, f64)>> = ens
        .indices()
        .par_iter()
        .zip(velocity.par_iter())
        .map(|(&a, &v)| {
            let agent = Agent::from_unit(a);
            if let Agent::Interval(alpha) = agent {
                let s = alpha + phase;
                if (s - s.round()).abs() < delta {
                    return None;
                }
            }
            let exact = analytic_velocity(&params, t, agent).ok()?;
            Some((matches!(agent, Agent::Interval(_)), (v - exact).abs()))
        })
        .collect();

    let mut report = RhsVerification {
        t,
        n_interval,
        exclusion_radius: delta,
        max_abs_error: 0.0,
        interval_max_error: 0.0,
        cluster_max_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    for e in errors {
        match e {
            None => report.excluded += 1,
            Some((interval, err)) => {
                report.checked += 1;
                if interval {
                    report.interval_max_error = report.interval_max_error.max(err);
                } else {
                    report.cluster_max_error = report.cluster_max_error.max(err);
                }
            }
        }
    }
    report.max_abs_error = report.interval_max_error.max(report.cluster_max_error);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub tracked_agents: usize,
    pub pair_budget: usize,
    pub seed: u64,
}

impl ReportConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_start: 1.0,
            t_end,
            sample_dt: 0.05,
            tracked_agents: 8,
            pair_budget: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackedAgent {
    pub alpha: f64,
    pub total_variation: f64,
    /// Direction reversals seen in the sampled path.
    pub reversals: usize,
    /// Fold crossings predicted by the phase: integers in `(a + Phi(t0), a + Phi(t1)]`.
    pub analytic_crossings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub params: CounterexampleParams,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub phase_end: f64,
    /// Largest W1 distance of the interval population to the uniform law on `[-1/2, 1/2]`.
    pub max_w1_to_uniform: f64,
    /// Largest W1 distance between the interval population at a sample and at `t_start`.
    pub max_w1_to_start: f64,
    pub tracked: Vec<TrackedAgent>,
    pub min_reversals: usize,
    pub min_cluster_gap: f64,
    /// `c0 - 1/2 - DRIFT * int_0^{t_end} v^{3/2}`.
    pub cluster_gap_bound: f64,
    pub max_mirror_error: f64,
    pub cluster_right_decreasing: bool,
    pub order_audit: OrderAuditReport,
}

fn sample_times(cfg: &ReportConfig) -> Vec<f64> {
    let steps = ((cfg.t_end - cfg.t_start) / cfg.sample_dt - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps)
        .map(|k| cfg.t_start + k as f64 * cfg.sample_dt)
        .collect();
    times.push(cfg.t_end);
    times
}

/// Stationary distribution versus perpetual motion over `[t_start, t_end]`.
pub fn run_counterexample_report(
    params: &CounterexampleParams,
    cfg: &ReportConfig,
) -> Result<(CounterexampleReport, Trajectory), CounterexampleError> {
    params.validate()?;
    if !(cfg.t_start >= 0.0) {
        return Err(CounterexampleError::NegativeTime(cfg.t_start));
    }
    let times = sample_times(cfg);
    let ni = params.n_interval;
    let unit_mass = vec![1.0 / ni as f64; ni];

    let snapshots: Vec<Ensemble> = times
        .par_iter()
        .map(|&t| to_ensemble(params, t))
        .collect::<Result<_, _>>()?;

    let start_positions = &snapshots[0].opinions()[..ni];
    let (max_w1_to_uniform, max_w1_to_start) = snapshots
        .par_iter()
        .map(|s| {
            let x = &s.opinions()[..ni];
            (
                diagnostics::wasserstein1_to_uniform(x, &unit_mass, -0.5, 0.5),
                diagnostics::wasserstein1_weighted(x, &unit_mass, start_positions, &unit_mass),
            )
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

    let k = cfg.tracked_agents.clamp(1, ni);
    let tracked: Vec<TrackedAgent> = (0..k)
        .map(|j| {
            let i = (j * ni + ni / 2) / k;
            let alpha = 2.0 * (i as f64 + 0.5) / ni as f64;
            let mut tv = 0.0;
            let mut reversals = 0;
            let mut last_dir = 0.0;
            for w in snapshots.windows(2) {
                let dx = w[1].opinions()[i] - w[0].opinions()[i];
                tv += dx.abs();
                if dx != 0.0 {
                    let dir = dx.signum();
                    if last_dir != 0.0 && dir != last_dir {
                        reversals += 1;
                    }
                    last_dir = dir;
                }
            }
            let s0 = alpha + params.phase(cfg.t_start);
            let s1 = alpha + params.phase(cfg.t_end);
            TrackedAgent {
                alpha,
                total_variation: tv,
                reversals,
                analytic_crossings: (s1.floor() - s0.floor()).max(0.0) as u64,
            }
        })
        .collect();

    let mut min_cluster_gap = f64::INFINITY;
    let mut max_mirror_error: f64 = 0.0;
    let mut decreasing = true;
    let mut prev_right = f64::INFINITY;
    for s in &snapshots {
        let x = s.opinions();
        let (left, right) = (x[ni], x[x.len() - 1]);
        min_cluster_gap = min_cluster_gap.min(right - 0.5);
        max_mirror_error = max_mirror_error.max((left + right).abs());
        decreasing &= right < prev_right;
        prev_right = right;
    }

    let traj = Trajectory::from_snapshots(snapshots, normalized_weight_bound(params));
    let audit = audit_interval_pairs(&traj, ni, cfg.pair_budget, cfg.seed);

    let report = CounterexampleReport {
        params: *params,
        t_start: cfg.t_start,
        t_end: cfg.t_end,
        samples: times.len(),
        phase_end: params.phase(cfg.t_end),
        max_w1_to_uniform,
        max_w1_to_start,
        min_reversals: tracked.iter().map(|a| a.reversals).min().unwrap_or(0),
        tracked,
        min_cluster_gap,
        cluster_gap_bound: params.c0 - 0.5 - DRIFT * params.drift_integral(cfg.t_end),
        max_mirror_error,
        cluster_right_decreasing: decreasing,
        order_audit: audit,
    };
    Ok((report, traj))
}

fn audit_interval_pairs(traj: &Trajectory, ni: usize, budget: usize, seed: u64) -> OrderAuditReport {
    let total = ni * (ni - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= budget {
        (0..ni)
            .flat_map(|i| (i + 1..ni).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool: Vec<usize> = (0..ni).collect();
        (0..budget)
            .map(|_| {
                let two: Vec<&usize> = pool.choose_multiple(&mut rng, 2).collect();
                (*two[0].min(two[1]), *two[0].max(two[1]))
            })
            .collect()
    };
    diagnostics::order_audit_pairs(traj, &pairs, &OrderAuditConfig::default())
}
