//! Interaction kernels `w(t, a, b, x_a, x_b)` and their structural probes.
//!
//! A [`Kernel`] pairs a weight rule with the constants the theory needs:
//! the uniform bound `W`, an optional Lipschitz constant `L` in the two
//! opinion arguments, and whether the rule is symmetric under exchanging
//! the two agents. Built-in families set these from their formulas; custom
//! rules declare them and [`probe_kernel`] checks the declaration.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counterexample::{self, CounterexampleParams};
use crate::error::KernelError;

/// Piecewise-constant function of the agent index on `[0, 1]`.
///
/// `values[k]` holds on `[breaks[k-1], breaks[k])`, with the first and last
/// pieces extending to 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProfile {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepProfile {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if values.len() != breaks.len() + 1 {
            return Err(KernelError::ProfileShape {
                breaks: breaks.len(),
                values: values.len(),
            });
        }
        let inside = breaks.iter().all(|&b| b > 0.0 && b < 1.0);
        let increasing = breaks.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(KernelError::BadProfileBreaks);
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breaks: Vec::new(),
            values: vec![value],
        }
    }

    #[inline]
    pub fn value_at(&self, alpha: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= alpha);
        self.values[k]
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }
}

/// One constant piece of a block interaction schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleSegment {
    pub duration: f64,
    /// Row-major `blocks x blocks` matrix of `w_ij`.
    pub weights: Vec<f64>,
}

/// Piecewise-constant-in-time weight matrix for a finite consensus system.
///
/// Segments run back to back from `t = 0`. A cyclic schedule repeats
/// forever; otherwise the last segment persists past its duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    blocks: usize,
    segments: Vec<ScheduleSegment>,
    starts: Vec<f64>,
    period: f64,
    cyclic: bool,
}

impl Schedule {
    pub fn new(
        blocks: usize,
        segments: Vec<ScheduleSegment>,
        cyclic: bool,
    ) -> Result<Self, KernelError> {
        if blocks == 0 || segments.is_empty() {
            return Err(KernelError::EmptySchedule);
        }
        let expected = blocks * blocks;
        let mut starts = Vec::with_capacity(segments.len());
        let mut clock = 0.0;
        for (s, seg) in segments.iter().enumerate() {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return Err(KernelError::BadSegmentDuration {
                    segment: s,
                    duration: seg.duration,
                });
            }
            if seg.weights.len() != expected {
                return Err(KernelError::ScheduleShape {
                    segment: s,
                    got: seg.weights.len(),
                    expected,
                });
            }
            for (k, &w) in seg.weights.iter().enumerate() {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(KernelError::NegativeScheduleEntry {
                        segment: s,
                        row: k / blocks,
                        col: k % blocks,
                        value: w,
                    });
                }
            }
            starts.push(clock);
            clock += seg.duration;
        }
        Ok(Self {
            blocks,
            segments,
            starts,
            period: clock,
            cyclic,
        })
    }

    /// A single time-invariant matrix.
    pub fn constant(blocks: usize, weights: Vec<f64>) -> Result<Self, KernelError> {
        Self::new(
            blocks,
            vec![ScheduleSegment {
                duration: 1.0,
                weights,
            }],
            false,
        )
    }

    /// Three agents; the middle one is pulled toward agent 1 on `[2k, 2k+1)`
    /// and toward agent 3 on `[2k+1, 2k+2)`, the outer two never move.
    pub fn alternating_three_block() -> Self {
        let mut toward_first = vec![0.0; 9];
        toward_first[3] = 1.0;
        let mut toward_third = vec![0.0; 9];
        toward_third[5] = 1.0;
        Self::new(
            3,
            vec![
                ScheduleSegment {
                    duration: 1.0,
                    weights: toward_first,
                },
                ScheduleSegment {
                    duration: 1.0,
                    weights: toward_third,
                },
            ],
            true,
        )
        .expect("static schedule is valid")
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn segment_at(&self, t: f64) -> usize {
        let local = if self.cyclic {
            t.rem_euclid(self.period)
        } else {
            t
        };
        self.starts.partition_point(|&s| s <= local).saturating_sub(1)
    }

    #[inline]
    pub fn weights_at(&self, t: f64) -> &[f64] {
        &self.segments[self.segment_at(t)].weights
    }

    /// Switching times strictly inside `(from, to)`.
    pub fn breakpoints_in(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.segments.len() == 1 && !self.cyclic {
            return out;
        }
        if !self.cyclic {
            out.extend(
                self.starts[1..]
                    .iter()
                    .copied()
                    .filter(|&s| s > from && s < to),
            );
            return out;
        }
        let first_cycle = (from / self.period).floor().max(0.0) as u64;
        let mut cycle = first_cycle;
        loop {
            let base = cycle as f64 * self.period;
            if base >= to {
                break;
            }
            for &s in &self.starts {
                let b = base + s;
                if b > from && b < to {
                    out.push(b);
                }
            }
            cycle += 1;
        }
        out
    }

    pub fn max_weight(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.weights.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.blocks;
        self.segments.iter().all(|s| {
            (0..n).all(|i| (0..n).all(|j| s.weights[i * n + j] == s.weights[j * n + i]))
        })
    }

    #[inline]
    fn block_of(&self, alpha: f64) -> usize {
        ((alpha * self.blocks as f64).floor().max(0.0) as usize).min(self.blocks - 1)
    }
}

type RuleFn = dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync;

/// User-supplied weight rule `(t, a, b, x_a, x_b) -> w`.
#[derive(Clone)]
pub struct CustomRule {
    name: String,
    rule: Arc<RuleFn>,
}

impl CustomRule {
    pub fn new<F>(name: impl Into<String>, rule: F) -> Self
    where
        F: Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    /// `1{|x_b - x_a| < r}`.
    HegselmannKrause { r: f64 },
    /// `1{|x_b - x_a| < r(a)}`: each agent listens within its own radius.
    BoundedConfidence { radius: StepProfile },
    /// `1{|x_b - x_a| < r(b)}`: each agent broadcasts within its own radius.
    BoundedInfluence { radius: StepProfile },
    /// `exp(-(x_a - x_b)^2 / sigma(a)^2)`.
    GaussianDecay { sigma: StepProfile },
    /// `1{R_min <= |x_a - x_b| <= R_max}`.
    RingSensing { r_min: f64, r_max: f64 },
    /// `1{|a - b| < r_index} * 1{|x_a - x_b| < r}`.
    TypedConfidence { r: f64, r_index: f64 },
    /// `n * w_ij(t)` for `a` in block `i`, `b` in block `j`.
    FiniteConsensusEmbed { schedule: Schedule },
    /// Symmetric weights of the cycling construction, normalized to unit mass.
    Counterexample { params: CounterexampleParams },
    Constant { c: f64 },
    Custom(CustomRule),
}

/// An interaction kernel with its declared constants.
#[derive(Debug, Clone)]
pub struct Kernel {
    family: KernelFamily,
    w_bound: f64,
    lipschitz: Option<f64>,
    symmetric: bool,
    position_only: bool,
}

fn positive(r: f64) -> Result<f64, KernelError> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(KernelError::NonPositiveRadius(r))
    }
}

impl Kernel {
    pub fn hegselmann_krause(r: f64) -> Result<Self, KernelError> {
        Ok(Self {
            family: KernelFamily::HegselmannKrause { r: positive(r)? },
            w_bound: 1.0,
            lipschitz: None,
            symmetric: true,
            position_only: true,
        })
    }

    pub fn bounded_confidence(radius: StepProfile) -> Result<Self, KernelError> {
        for &r in radius.values() {
            positive(r)?;
        }
        let uniform = radius.is_constant();
        Ok(Self {
            family: KernelFamily::BoundedConfidence { radius },
            w_bound: 1.0,
            lipschitz: None,
            symmetric: uniform,
            position_only: uniform,
        })
    }

    pub fn bounded_influence(radius: StepProfile) -> Result<Self, KernelError> {
        for &r in radius.values() {
            positive(r)?;
        }
        let uniform = radius.is_constant();
        Ok(Self {
            family: KernelFamily::BoundedInfluence { radius },
            w_bound: 1.0,
            lipschitz: None,
            symmetric: uniform,
            position_only: uniform,
        })
    }

    /// Gaussian decay. The declared Lipschitz constant is `1 / sigma_min`,
    /// which rounds up the exact slope bound `sqrt(2) e^{-1/2} / sigma_min`.
    pub fn gaussian_decay(sigma: StepProfile) -> Result<Self, KernelError> {
        for &s in sigma.values() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(KernelError::NonPositiveWidth(s));
            }
        }
        let uniform = sigma.is_constant();
        let lipschitz = 1.0 / sigma.min();
        Ok(Self {
            family: KernelFamily::GaussianDecay { sigma },
            w_bound: 1.0,
            lipschitz: Some(lipschitz),
            symmetric: uniform,
            position_only: uniform,
        })
    }

    pub fn ring_sensing(r_min: f64, r_max: f64) -> Result<Self, KernelError> {
        if !(r_min >= 0.0 && r_max >= r_min && r_max.is_finite()) {
            return Err(KernelError::BadRing { r_min, r_max });
        }
        Ok(Self {
            family: KernelFamily::RingSensing { r_min, r_max },
            w_bound: 1.0,
            lipschitz: None,
            symmetric: true,
            position_only: true,
        })
    }

    pub fn typed_confidence(r: f64, r_index: f64) -> Result<Self, KernelError> {
        Ok(Self {
            family: KernelFamily::TypedConfidence {
                r: positive(r)?,
                r_index: positive(r_index)?,
            },
            w_bound: 1.0,
            lipschitz: None,
            symmetric: true,
            position_only: false,
        })
    }

    pub fn constant(c: f64) -> Result<Self, KernelError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(KernelError::BadConstant(c));
        }
        Ok(Self {
            family: KernelFamily::Constant { c },
            w_bound: c,
            lipschitz: Some(0.0),
            symmetric: true,
            position_only: true,
        })
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero is a valid constant")
    }

    /// Weights of the cycling construction on the unit agent domain.
    pub fn counterexample(params: CounterexampleParams) -> Self {
        Self {
            w_bound: counterexample::normalized_weight_bound(&params),
            family: KernelFamily::Counterexample { params },
            lipschitz: None,
            symmetric: true,
            position_only: false,
        }
    }

    /// Custom rule with declared constants. `position_only` asserts the rule
    /// ignores the agent indices.
    pub fn custom(
        rule: CustomRule,
        w_bound: f64,
        lipschitz: Option<f64>,
        symmetric: bool,
        position_only: bool,
    ) -> Result<Self, KernelError> {
        if !(w_bound >= 0.0 && w_bound.is_finite()) {
            return Err(KernelError::BadBound(w_bound));
        }
        if let Some(l) = lipschitz {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(KernelError::BadBound(l));
            }
        }
        Ok(Self {
            family: KernelFamily::Custom(rule),
            w_bound,
            lipschitz,
            symmetric,
            position_only,
        })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn w_bound(&self) -> f64 {
        self.w_bound
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// True when the weight depends only on time and the two opinions.
    pub fn is_position_only(&self) -> bool {
        self.position_only
    }

    /// Confidence radius `r` such that the kernel lies in `Gamma(r, 1)`.
    pub fn interaction_radius(&self) -> Option<f64> {
        match self.family {
            KernelFamily::HegselmannKrause { r } => Some(r),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match &self.family {
            KernelFamily::HegselmannKrause { .. } => "hegselmann_krause",
            KernelFamily::BoundedConfidence { .. } => "bounded_confidence",
            KernelFamily::BoundedInfluence { .. } => "bounded_influence",
            KernelFamily::GaussianDecay { .. } => "gaussian_decay",
            KernelFamily::RingSensing { .. } => "ring_sensing",
            KernelFamily::TypedConfidence { .. } => "typed_confidence",
            KernelFamily::FiniteConsensusEmbed { .. } => "finite_consensus",
            KernelFamily::Counterexample { .. } => "counterexample",
            KernelFamily::Constant { .. } => "constant",
            KernelFamily::Custom(rule) => rule.name(),
        }
    }

    /// Times in `(from, to)` where the kernel jumps in `t`.
    pub fn breakpoints_in(&self, from: f64, to: f64) -> Vec<f64> {
        match &self.family {
            KernelFamily::FiniteConsensusEmbed { schedule } => schedule.breakpoints_in(from, to),
            _ => Vec::new(),
        }
    }

    /// Resolve the time dependence once; use the result for many pairs.
    pub fn at(&self, t: f64) -> KernelAt<'_> {
        let frozen = match &self.family {
            KernelFamily::FiniteConsensusEmbed { schedule } => {
                Frozen::Blocks(schedule.weights_at(t))
            }
            KernelFamily::Counterexample { params } => {
                Frozen::Counterexample(counterexample::Instant::new(params, t))
            }
            _ => Frozen::Static,
        };
        KernelAt {
            kernel: self,
            t,
            frozen,
        }
    }

    /// `w(t, a, b, x_a, x_b)`.
    pub fn evaluate(&self, t: f64, a: f64, b: f64, xa: f64, xb: f64) -> f64 {
        self.at(t).weight(a, b, xa, xb)
    }
}

/// Finite consensus dynamics `z_i' = sum_j w_ij(t) (z_j - z_i)` embedded on
/// the continuum: block `i` is `[(i-1)/n, i/n]` and the weight is `n w_ij`.
pub fn finite_consensus_embed(schedule: Schedule) -> Kernel {
    let n = schedule.blocks() as f64;
    Kernel {
        w_bound: n * schedule.max_weight(),
        lipschitz: Some(0.0),
        symmetric: schedule.is_symmetric(),
        position_only: false,
        family: KernelFamily::FiniteConsensusEmbed { schedule },
    }
}

enum Frozen<'a> {
    Static,
    Blocks(&'a [f64]),
    Counterexample(counterexample::Instant),
}

/// A kernel with its time argument fixed.
pub struct KernelAt<'a> {
    kernel: &'a Kernel,
    t: f64,
    frozen: Frozen<'a>,
}

impl KernelAt<'_> {
    pub fn time(&self) -> f64 {
        self.t
    }

    #[inline]
    pub fn weight(&self, a: f64, b: f64, xa: f64, xb: f64) -> f64 {
        let w = match (&self.kernel.family, &self.frozen) {
            (KernelFamily::HegselmannKrause { r }, _) => indicator((xb - xa).abs() < *r),
            (KernelFamily::BoundedConfidence { radius }, _) => {
                indicator((xb - xa).abs() < radius.value_at(a))
            }
            (KernelFamily::BoundedInfluence { radius }, _) => {
                indicator((xb - xa).abs() < radius.value_at(b))
            }
            (KernelFamily::GaussianDecay { sigma }, _) => {
                let s = sigma.value_at(a);
                let d = xa - xb;
                (-(d * d) / (s * s)).exp()
            }
            (KernelFamily::RingSensing { r_min, r_max }, _) => {
                let d = (xa - xb).abs();
                indicator(d >= *r_min && d <= *r_max)
            }
            (KernelFamily::TypedConfidence { r, r_index }, _) => {
                indicator((a - b).abs() < *r_index && (xa - xb).abs() < *r)
            }
            (KernelFamily::FiniteConsensusEmbed { schedule }, Frozen::Blocks(m)) => {
                let n = schedule.blocks();
                n as f64 * m[schedule.block_of(a) * n + schedule.block_of(b)]
            }
            (KernelFamily::Counterexample { .. }, Frozen::Counterexample(inst)) => {
                inst.normalized_weight(a, b, xa, xb)
            }
            (KernelFamily::Constant { c }, _) => *c,
            (KernelFamily::Custom(rule), _) => (rule.rule)(self.t, a, b, xa, xb),
            _ => unreachable!("time-dependent family evaluated without its frozen state"),
        };
        debug_assert!(
            matches!(self.kernel.family, KernelFamily::Custom(_))
                || (w >= 0.0 && w <= self.kernel.w_bound * (1.0 + 1e-12)),
            "{} produced weight {w} outside [0, {}]",
            self.kernel.name(),
            self.kernel.w_bound
        );
        w
    }
}

#[inline]
fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Sampling setup for [`probe_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
    /// `Gamma(r, delta)` membership to test; `(0, 0)` holds trivially.
    pub gamma_r: f64,
    pub gamma_delta: f64,
    pub t_max: f64,
    pub opinion_range: (f64, f64),
    /// Half-width of the central differences behind the Lipschitz estimate.
    pub fd_step: f64,
}

impl ProbeConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            gamma_r: 0.0,
            gamma_delta: 0.0,
            t_max: 10.0,
            opinion_range: (0.0, 1.0),
            fd_step: 1e-5,
        }
    }

    pub fn with_gamma(mut self, r: f64, delta: f64) -> Self {
        self.gamma_r = r;
        self.gamma_delta = delta;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelProbeReport {
    pub samples_tested: usize,
    pub max_symmetry_violation: f64,
    pub gamma_r: f64,
    pub gamma_delta: f64,
    pub gamma_holds: bool,
    /// Largest central-difference slope seen; a lower bound on the true `L`.
    pub lipschitz_estimate: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Samples whose weight was negative, above `W`, or not finite.
    pub bound_violations: usize,
}

impl KernelProbeReport {
    /// Declared `L` is consistent with the sampled slopes.
    pub fn lipschitz_consistent(&self, kernel: &Kernel, slack: f64) -> bool {
        match kernel.lipschitz() {
            Some(l) => self.lipschitz_estimate <= l * (1.0 + slack) + slack,
            None => true,
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

const HALTON_BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Probe declared kernel properties on a randomly shifted Halton sequence
/// over `(t, a, b, x_a, x_b)`.
pub fn probe_kernel(kernel: &Kernel, config: &ProbeConfig) -> Result<KernelProbeReport, KernelError> {
    if config.samples == 0 {
        return Err(KernelError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shift: [f64; 6] = std::array::from_fn(|_| rng.gen::<f64>());
    let (lo, hi) = config.opinion_range;
    let h = config.fd_step;

    let mut report = KernelProbeReport {
        samples_tested: config.samples,
        max_symmetry_violation: 0.0,
        gamma_r: config.gamma_r,
        gamma_delta: config.gamma_delta,
        gamma_holds: true,
        lipschitz_estimate: 0.0,
        min_weight: f64::INFINITY,
        max_weight: f64::NEG_INFINITY,
        bound_violations: 0,
    };

    for i in 0..config.samples {
        let u: [f64; 6] = std::array::from_fn(|d| {
            (radical_inverse(i as u64 + 1, HALTON_BASES[d]) + shift[d]).fract()
        });
        let t = u[0] * config.t_max;
        let (a, b) = (u[1], u[2]);
        let xa = lo + u[3] * (hi - lo);
        let xb = lo + u[4] * (hi - lo);
        let at = kernel.at(t);

        let w = at.weight(a, b, xa, xb);
        if !(w.is_finite() && w >= 0.0 && w <= kernel.w_bound() * (1.0 + 1e-12)) {
            report.bound_violations += 1;
        }
        report.min_weight = report.min_weight.min(w);
        report.max_weight = report.max_weight.max(w);

        let swapped = at.weight(b, a, xb, xa);
        report.max_symmetry_violation = report.max_symmetry_violation.max((w - swapped).abs());

        // A random pair plus a pair forced inside the confidence radius.
        if (xa - xb).abs() <= config.gamma_r && w < config.gamma_delta {
            report.gamma_holds = false;
        }
        if config.gamma_r > 0.0 {
            let xg = (xa + (2.0 * u[5] - 1.0) * config.gamma_r).clamp(lo, hi);
            if (xa - xg).abs() <= config.gamma_r && at.weight(a, b, xa, xg) < config.gamma_delta {
                report.gamma_holds = false;
            }
        }

        let slope_b = (at.weight(a, b, xa, xb + h) - at.weight(a, b, xa, xb - h)).abs() / (2.0 * h);
        let slope_a = (at.weight(a, b, xa + h, xb) - at.weight(a, b, xa - h, xb)).abs() / (2.0 * h);
        report.lipschitz_estimate = report.lipschitz_estimate.max(slope_a).max(slope_b);
    }
    Ok(report)
}
