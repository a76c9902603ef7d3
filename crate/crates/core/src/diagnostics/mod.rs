//! Observables of ensembles and trajectories: moments, convex Lyapunov
//! functionals, dissipation, Wasserstein distances, clusters and pairwise
//! order. Everything here is a pure function of immutable snapshots.

pub mod checks;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{Ensemble, Trajectory};
use crate::kernels::Kernel;
use crate::sum::{compensated_sum, CompensatedSum};

/// `m(k) = sum_i m_i x_i^k`.
pub fn moment(ensemble: &Ensemble, k: u32) -> f64 {
    assert!(k >= 1, "moment order starts at 1");
    lyapunov(ensemble, |x| x.powi(k as i32))
}

/// `V_f = sum_i m_i f(x_i)`.
pub fn lyapunov<F: Fn(f64) -> f64>(ensemble: &Ensemble, f: F) -> f64 {
    compensated_sum(ensemble.nodes().map(|n| n.mass * f(n.opinion)))
}

/// Convex test functions for the Lyapunov monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexFn {
    Identity,
    Negation,
    Square,
    Quartic,
    Exp,
    NegExp,
    /// Huber-smoothed `|x - center|`.
    Huber { center: f64, delta: f64 },
    /// `max_k (slope_k x + intercept_k)`.
    MaxAffine { slopes: Vec<f64>, intercepts: Vec<f64> },
}

impl ConvexFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ConvexFn::Identity => x,
            ConvexFn::Negation => -x,
            ConvexFn::Square => x * x,
            ConvexFn::Quartic => x.powi(4),
            ConvexFn::Exp => x.exp(),
            ConvexFn::NegExp => (-x).exp(),
            ConvexFn::Huber { center, delta } => {
                let y = (x - center).abs();
                if y <= *delta {
                    y * y / (2.0 * delta)
                } else {
                    y - delta / 2.0
                }
            }
            ConvexFn::MaxAffine { slopes, intercepts } => slopes
                .iter()
                .zip(intercepts)
                .map(|(s, c)| s * x + c)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConvexFn::Identity => "x".into(),
            ConvexFn::Negation => "-x".into(),
            ConvexFn::Square => "x^2".into(),
            ConvexFn::Quartic => "x^4".into(),
            ConvexFn::Exp => "exp(x)".into(),
            ConvexFn::NegExp => "exp(-x)".into(),
            ConvexFn::Huber { center, .. } => format!("huber(x - {center})"),
            ConvexFn::MaxAffine { slopes, .. } => format!("max_affine[{}]", slopes.len()),
        }
    }

    /// Random piecewise-linear convex function with `pieces` affine parts.
    pub fn random_max_affine<R: Rng>(rng: &mut R, pieces: usize) -> Self {
        ConvexFn::MaxAffine {
            slopes: (0..pieces).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            intercepts: (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }
}

/// The fixed dictionary: `x, -x, x^2, x^4, e^x, e^-x` and smoothed
/// `|x - c|` for `c` in `{1/4, 1/2, 3/4}`.
pub fn lyapunov_dictionary() -> Vec<ConvexFn> {
    let mut out = vec![
        ConvexFn::Identity,
        ConvexFn::Negation,
        ConvexFn::Square,
        ConvexFn::Quartic,
        ConvexFn::Exp,
        ConvexFn::NegExp,
    ];
    out.extend([0.25, 0.5, 0.75].map(|center| ConvexFn::Huber { center, delta: 0.01 }));
    out
}

/// `D = sum_i sum_j m_i m_j w_ij (x_j - x_i)^2`.
pub fn dissipation(ensemble: &Ensemble, kernel: &Kernel) -> f64 {
    let at = kernel.at(ensemble.time());
    let (a, x, m) = (ensemble.indices(), ensemble.opinions(), ensemble.masses());
    let rows: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for j in 0..x.len() {
                let w = at.weight(a[i], a[j], x[i], x[j]);
                if w != 0.0 {
                    let d = x[j] - x[i];
                    acc.add(m[j] * w * d * d);
                }
            }
            m[i] * acc.value()
        })
        .collect();
    compensated_sum(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
}

/// Both sides of `sum_ij m_i m_j (a_i - a_j)^2 = 2 M sum_i m_i (a_i - mean)^2`.
pub fn variance_identity_check(values: &[f64], masses: &[f64]) -> VarianceIdentity {
    assert_eq!(values.len(), masses.len());
    let lhs = compensated_sum(values.iter().zip(masses).map(|(&ai, &mi)| {
        mi * compensated_sum(values.iter().zip(masses).map(|(&aj, &mj)| {
            let d = ai - aj;
            mj * d * d
        }))
    }));
    let total = compensated_sum(masses.iter().copied());
    let mean = compensated_sum(values.iter().zip(masses).map(|(a, m)| a * m)) / total;
    let spread = compensated_sum(values.iter().zip(masses).map(|(a, m)| {
        let d = a - mean;
        m * d * d
    }));
    let rhs = 2.0 * total * spread;
    VarianceIdentity {
        lhs,
        rhs,
        abs_error: (lhs - rhs).abs(),
    }
}

fn sorted_measure(points: &[f64], masses: &[f64]) -> (Vec<(f64, f64)>, f64) {
    let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(masses.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = compensated_sum(masses.iter().copied());
    (pairs, total)
}

/// W1 between two weighted point sets, each normalized to unit mass:
/// the L1 distance of their quantile functions.
pub fn wasserstein1_weighted(xa: &[f64], ma: &[f64], xb: &[f64], mb: &[f64]) -> f64 {
    let (pa, ta) = sorted_measure(xa, ma);
    let (pb, tb) = sorted_measure(xb, mb);
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (pa[0].1 / ta, pb[0].1 / tb);
    let mut u = 0.0;
    let mut acc = CompensatedSum::new();
    loop {
        let next = ca.min(cb);
        acc.add((next - u) * (pa[i].0 - pb[j].0).abs());
        u = next;
        let (last_a, last_b) = (i + 1 == pa.len(), j + 1 == pb.len());
        if ca <= cb {
            if last_a {
                break;
            }
            i += 1;
            ca += pa[i].1 / ta;
        } else {
            if last_b {
                break;
            }
            j += 1;
            cb += pb[j].1 / tb;
        }
    }
    // rounding can leave a sliver of quantile range unmatched
    let tail = (1.0 - u).max(0.0);
    acc.add(tail * (pa[pa.len() - 1].0 - pb[pb.len() - 1].0).abs());
    acc.value()
}

pub fn wasserstein1(a: &Ensemble, b: &Ensemble) -> f64 {
    wasserstein1_weighted(a.opinions(), a.masses(), b.opinions(), b.masses())
}

/// `int_l^h |c - u| du`.
fn abs_integral(c: f64, l: f64, h: f64) -> f64 {
    if c <= l {
        ((h - c).powi(2) - (l - c).powi(2)) / 2.0
    } else if c >= h {
        ((c - l).powi(2) - (c - h).powi(2)) / 2.0
    } else {
        ((c - l).powi(2) + (h - c).powi(2)) / 2.0
    }
}

/// Exact W1 between a weighted point set and the uniform law on `[lo, hi]`.
pub fn wasserstein1_to_uniform(points: &[f64], masses: &[f64], lo: f64, hi: f64) -> f64 {
    let (pairs, total) = sorted_measure(points, masses);
    let width = hi - lo;
    let mut acc = CompensatedSum::new();
    let mut u = 0.0;
    for (x, m) in pairs {
        let next = u + m / total;
        // the uniform quantile is lo + width * u
        acc.add(width * abs_integral((x - lo) / width, u, next.min(1.0)));
        u = next;
    }
    acc.value()
}

/// W1 from every snapshot to the final one.
pub fn w1_to_final(traj: &Trajectory) -> Vec<f64> {
    let last = traj.last();
    traj.snapshots.par_iter().map(|s| wasserstein1(s, last)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSet {
    pub centers: Vec<f64>,
    pub masses: Vec<f64>,
    pub spreads: Vec<f64>,
    pub residual_mass: f64,
}

impl ClusterSet {
    /// Smallest distance between consecutive centers, `None` with fewer than two.
    pub fn min_separation(&self) -> Option<f64> {
        self.centers.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }
}

/// Split sorted opinions wherever consecutive values differ by more than
/// `gap_threshold`. Groups lighter than `mass_floor` count as residual.
pub fn detect_clusters(ensemble: &Ensemble, gap_threshold: f64, mass_floor: f64) -> ClusterSet {
    let mut nodes: Vec<(f64, f64)> = ensemble.nodes().map(|n| (n.opinion, n.mass)).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut set = ClusterSet {
        centers: Vec::new(),
        masses: Vec::new(),
        spreads: Vec::new(),
        residual_mass: 0.0,
    };
    let mut start = 0;
    for k in 1..=nodes.len() {
        if k < nodes.len() && nodes[k].0 - nodes[k - 1].0 <= gap_threshold {
            continue;
        }
        let group = &nodes[start..k];
        let mass = compensated_sum(group.iter().map(|n| n.1));
        if mass < mass_floor {
            set.residual_mass += mass;
        } else {
            set.centers.push(compensated_sum(group.iter().map(|n| n.0 * n.1)) / mass);
            set.masses.push(mass);
            set.spreads.push(group[group.len() - 1].0 - group[0].0);
        }
        start = k;
    }
    set
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderAuditConfig {
    pub pair_budget: usize,
    pub seed: u64,
    /// Decay rate `L + W` for the exponential gap bound, if it applies.
    pub rate_bound: Option<f64>,
    pub rate_slack: f64,
}

impl Default for OrderAuditConfig {
    fn default() -> Self {
        Self {
            pair_budget: 10_000,
            seed: 0,
            rate_bound: None,
            rate_slack: 0.05,
        }
    }
}

impl OrderAuditConfig {
    /// Enables the gap bound when the kernel is Lipschitz and position-only.
    pub fn for_kernel(kernel: &Kernel) -> Self {
        let rate_bound = match kernel.lipschitz() {
            Some(l) if kernel.is_position_only() => Some(l + kernel.w_bound()),
            _ => None,
        };
        Self {
            rate_bound,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderViolation {
    pub i: usize,
    pub j: usize,
    pub t_flip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderAuditReport {
    pub pairs_checked: usize,
    pub full_audit: bool,
    /// First snapshot at which each violating pair left its initial order.
    pub violations: Vec<OrderViolation>,
    /// Sign changes between consecutive snapshots, summed over pairs.
    pub total_flips: usize,
    pub rate_violations: usize,
    /// `min ln(|d(t)| / |d(0)|) / t` over pairs and snapshots.
    pub min_gap_ratio_log: Option<f64>,
}

/// Check that `sign(x_i - x_j)` never changes, on all pairs for small
/// ensembles and on `pair_budget` sampled pairs otherwise.
pub fn order_audit(traj: &Trajectory, config: &OrderAuditConfig) -> OrderAuditReport {
    let n = traj.first().len();
    let total = n * n.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if n < 200 || total <= config.pair_budget {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        (0..config.pair_budget)
            .map(|_| {
                let two = sample(&mut rng, n, 2);
                let (a, b) = (two.index(0), two.index(1));
                (a.min(b), a.max(b))
            })
            .collect()
    };
    let mut report = order_audit_pairs(traj, &pairs, config);
    report.full_audit = pairs.len() == total;
    report
}

struct PairOutcome {
    first_flip: Option<f64>,
    flips: usize,
    rate_violated: bool,
    min_log_rate: Option<f64>,
}

fn sign(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// Order audit over an explicit pair list.
pub fn order_audit_pairs(traj: &Trajectory, pairs: &[(usize, usize)], config: &OrderAuditConfig) -> OrderAuditReport {
    let t0 = traj.first().time();
    let outcomes: Vec<PairOutcome> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let diff = |s: &Ensemble| s.opinions()[i] - s.opinions()[j];
            let d0 = diff(traj.first());
            let s0 = sign(d0);
            let mut out = PairOutcome {
                first_flip: None,
                flips: 0,
                rate_violated: false,
                min_log_rate: None,
            };
            let mut last_sign = s0;
            for snap in &traj.snapshots[1..] {
                let d = diff(snap);
                let s = sign(d);
                if s != s0 && out.first_flip.is_none() {
                    out.first_flip = Some(snap.time());
                }
                if s != 0 {
                    if last_sign != 0 && s != last_sign {
                        out.flips += 1;
                    }
                    last_sign = s;
                }
                let dt = snap.time() - t0;
                if d0 != 0.0 && dt > 0.0 {
                    if let Some(rate) = config.rate_bound {
                        let floor = d0.abs() * (-rate * dt).exp() * (1.0 - config.rate_slack);
                        out.rate_violated |= d.abs() < floor;
                    }
                    if d != 0.0 {
                        let r = (d.abs() / d0.abs()).ln() / dt;
                        out.min_log_rate = Some(out.min_log_rate.map_or(r, |m: f64| m.min(r)));
                    }
                }
            }
            out
        })
        .collect();

    let mut report = OrderAuditReport {
        pairs_checked: pairs.len(),
        full_audit: false,
        violations: Vec::new(),
        total_flips: 0,
        rate_violations: 0,
        min_gap_ratio_log: None,
    };
    for (&(i, j), o) in pairs.iter().zip(outcomes) {
        if let Some(t_flip) = o.first_flip {
            report.violations.push(OrderViolation { i, j, t_flip });
        }
        report.total_flips += o.flips;
        report.rate_violations += usize::from(o.rate_violated);
        if let Some(r) = o.min_log_rate {
            report.min_gap_ratio_log = Some(report.min_gap_ratio_log.map_or(r, |m| m.min(r)));
        }
    }
    report
}

/// `m(k)` for `k = 1..=max_order` at every snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// `values[k - 1][s]` is `m(k)` at snapshot `s`.
    pub values: Vec<Vec<f64>>,
}

impl MomentSeries {
    pub fn from_trajectory(traj: &Trajectory, max_order: u32) -> Self {
        let per_snapshot: Vec<Vec<f64>> = traj
            .snapshots
            .par_iter()
            .map(|s| (1..=max_order).map(|k| moment(s, k)).collect())
            .collect();
        Self {
            times: traj.times(),
            values: (0..max_order as usize)
                .map(|k| per_snapshot.iter().map(|row| row[k]).collect())
                .collect(),
        }
    }

    pub fn order(&self, k: u32) -> &[f64] {
        &self.values[k as usize - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// Largest increase between consecutive values, 0 if none.
    pub worst_uptick: f64,
    /// Position of the larger value of the worst pair.
    pub worst_index: Option<usize>,
}

pub fn monotonicity_report(series: &[f64], tolerance: f64) -> MonotonicityReport {
    let mut report = MonotonicityReport {
        pass: true,
        worst_uptick: 0.0,
        worst_index: None,
    };
    for (k, w) in series.windows(2).enumerate() {
        let up = w[1] - w[0];
        if up > report.worst_uptick {
            report.worst_uptick = up;
            report.worst_index = Some(k + 1);
        }
    }
    report.pass = report.worst_uptick <= tolerance;
    report
}

/// Whether any pair weight differs between two snapshots.
fn switching_between(a: &Ensemble, b: &Ensemble, kernel: &Kernel) -> bool {
    let (wa, wb) = (kernel.at(a.time()), kernel.at(b.time()));
    let idx = a.indices();
    let (xa, xb) = (a.opinions(), b.opinions());
    (0..idx.len()).into_par_iter().any(|i| {
        (0..idx.len()).any(|j| wa.weight(idx[i], idx[j], xa[i], xa[j]) != wb.weight(idx[i], idx[j], xb[i], xb[j]))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `max |dm2/dt + (D(t) + D(t + dt)) / 2|` over checked intervals.
    pub worst_residual: f64,
    /// Same with the left-point pairing `|dm2/dt + D(t)|`, for reference.
    pub worst_forward_residual: f64,
    pub checked_intervals: usize,
    pub skipped_intervals: usize,
    /// Trapezoid integral of `D` over the trajectory.
    pub dissipated: f64,
    /// `m2(0) - m2(t_end)`.
    pub m2_drop: f64,
    pub budget_gap: f64,
}

/// Compare the decay of `m2` with the dissipation between recorded snapshots.
/// For discontinuous kernels, intervals across which any pair weight changes
/// are left out of the pointwise residual.
pub fn dissipation_identity(traj: &Trajectory, kernel: &Kernel) -> DissipationReport {
    let snaps = &traj.snapshots;
    let m2: Vec<f64> = snaps.par_iter().map(|s| moment(s, 2)).collect();
    let d: Vec<f64> = snaps.par_iter().map(|s| dissipation(s, kernel)).collect();
    let skip_switching = kernel.lipschitz().is_none();

    let mut report = DissipationReport {
        worst_residual: 0.0,
        worst_forward_residual: 0.0,
        checked_intervals: 0,
        skipped_intervals: 0,
        dissipated: 0.0,
        m2_drop: m2[0] - m2[m2.len() - 1],
        budget_gap: 0.0,
    };
    let mut integral = CompensatedSum::new();
    for k in 0..snaps.len().saturating_sub(1) {
        let h = snaps[k + 1].time() - snaps[k].time();
        let mid = 0.5 * (d[k] + d[k + 1]);
        integral.add(mid * h);
        if skip_switching && switching_between(&snaps[k], &snaps[k + 1], kernel) {
            report.skipped_intervals += 1;
            continue;
        }
        let slope = (m2[k + 1] - m2[k]) / h;
        report.worst_residual = report.worst_residual.max((slope + mid).abs());
        report.worst_forward_residual = report.worst_forward_residual.max((slope + d[k]).abs());
        report.checked_intervals += 1;
    }
    report.dissipated = integral.value();
    report.budget_gap = (report.dissipated - report.m2_drop).abs();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{uniform_ensemble, Ensemble};

    fn two(x0: f64, x1: f64) -> Ensemble {
        Ensemble::new(0.0, vec![0.25, 0.75], vec![x0, x1], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn moments_of_extremes_and_pair() {
        let zeros = uniform_ensemble(5, |_| 0.0).unwrap();
        let ones = uniform_ensemble(5, |_| 1.0).unwrap();
        for k in 1..=6 {
            assert_eq!(moment(&zeros, k), 0.0);
            assert!((moment(&ones, k) - 1.0).abs() < 1e-15);
        }
        assert!((moment(&two(0.2, 0.4), 2) - 0.10).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        let e = two(0.0, 1.0);
        assert!((lyapunov(&e, f64::exp) - (1.0 + std::f64::consts::E) / 2.0).abs() < 1e-15);
        let half = uniform_ensemble(7, |_| 0.5).unwrap();
        let huber = ConvexFn::Huber { center: 0.5, delta: 0.01 };
        assert_eq!(lyapunov(&half, |x| huber.eval(x)), 0.0);
        let sq = lyapunov(&e, |x| ConvexFn::Square.eval(x));
        assert_eq!(sq, moment(&e, 2));
    }

    #[test]
    fn max_affine_is_convex_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = ConvexFn::random_max_affine(&mut rng, 5);
        for k in 1..100 {
            let (a, b, c) = ((k - 1) as f64 / 100.0, k as f64 / 100.0, (k + 1) as f64 / 100.0);
            assert!(f.eval(b) <= 0.5 * (f.eval(a) + f.eval(c)) + 1e-12);
        }
    }

    #[test]
    fn dissipation_examples() {
        let e = two(0.0, 1.0);
        assert_eq!(dissipation(&e, &Kernel::constant(1.0).unwrap()), 0.5);
        assert_eq!(dissipation(&two(0.0, 0.5), &Kernel::hegselmann_krause(0.2).unwrap()), 0.0);
        let same = uniform_ensemble(4, |_| 0.3).unwrap();
        assert_eq!(dissipation(&same, &Kernel::constant(1.0).unwrap()), 0.0);
    }

    #[test]
    fn variance_identity_examples() {
        let v = variance_identity_check(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!((v.lhs, v.rhs), (0.5, 0.5));
        let c = variance_identity_check(&[0.3; 5], &[0.2; 5]);
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    }

    #[test]
    fn wasserstein_examples() {
        let zero = Ensemble::new(0.0, vec![0.5], vec![0.0], vec![1.0]).unwrap();
        let one = Ensemble::new(0.0, vec![0.5], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(wasserstein1(&zero, &one), 1.0);
        assert_eq!(wasserstein1(&two(0.0, 1.0), &two(0.5, 0.5)), 0.5);
        assert_eq!(wasserstein1(&two(0.1, 0.7), &two(0.1, 0.7)), 0.0);
    }

    #[test]
    fn wasserstein_unequal_atoms() {
        // {0 w.p. 1/3, 1 w.p. 2/3} against {0.5}
        let w = wasserstein1_weighted(&[0.0, 1.0], &[1.0, 2.0], &[0.5], &[7.0]);
        assert!((w - 0.5).abs() < 1e-15);
        // {0, 1} halves against thirds {0, 0, 1}: mass 1/6 moves by 1
        let w = wasserstein1_weighted(&[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]);
        assert!((w - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_to_uniform() {
        // one atom at the middle of [0, 1]: int |1/2 - u| = 1/4
        assert!((wasserstein1_to_uniform(&[0.5], &[1.0], 0.0, 1.0) - 0.25).abs() < 1e-15);
        // midpoints of n cells: 1 / (4n)
        let n = 10;
        let pts: Vec<f64> = (0..n).map(|i| -0.5 + (i as f64 + 0.5) / n as f64).collect();
        let w = wasserstein1_to_uniform(&pts, &vec![1.0; n], -0.5, 0.5);
        assert!((w - 0.025).abs() < 1e-15);
    }

    #[test]
    fn clusters_by_gap() {
        let e = Ensemble::new(0.0, vec![0.1, 0.3, 0.6, 0.9], vec![0.1, 0.1, 0.9, 0.9], vec![0.25; 4]).unwrap();
        let c = detect_clusters(&e, 0.3, 0.0);
        assert_eq!(c.centers, vec![0.1, 0.9]);
        assert_eq!(c.masses, vec![0.5, 0.5]);
        assert_eq!(c.residual_mass, 0.0);
        let one = detect_clusters(&uniform_ensemble(6, |_| 0.4).unwrap(), 0.05, 0.0);
        assert_eq!(one.centers.len(), 1);
        assert!((one.masses[0] - 1.0).abs() < 1e-15);
        let floored = detect_clusters(&e, 0.3, 0.6);
        assert!(floored.centers.is_empty());
        assert!((floored.residual_mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_examples() {
        let r = monotonicity_report(&[0.5; 4], 1e-6);
        assert!(r.pass);
        assert_eq!(r.worst_uptick, 0.0);
        assert!(monotonicity_report(&[0.9, 0.5, 0.1], 0.0).pass);
        let r = monotonicity_report(&[0.5, 0.4, 0.41, 0.3], 1e-6);
        assert!(!r.pass);
        assert!((r.worst_uptick - 0.01).abs() < 1e-12);
        assert_eq!(r.worst_index, Some(2));
    }

    #[test]
    fn order_audit_sees_swap() {
        let a = Ensemble::new(0.0, vec![0.25, 0.75], vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let b = a.with_opinions(1.0, vec![0.8, 0.2]);
        let c = a.with_opinions(2.0, vec![0.2, 0.8]);
        let traj = Trajectory::from_snapshots(vec![a, b, c], 1.0);
        let rep = order_audit(&traj, &OrderAuditConfig::default());
        assert!(rep.full_audit);
        assert_eq!(rep.violations, vec![OrderViolation { i: 0, j: 1, t_flip: 1.0 }]);
        assert_eq!(rep.total_flips, 2);
    }
}
