//! Named pass/fail checks evaluated on a finished trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::{
    detect_clusters, dissipation_identity, lyapunov, lyapunov_dictionary, monotonicity_report, order_audit,
    w1_to_final, ConvexFn, MomentSeries, OrderAuditConfig,
};
use crate::ensemble::{rhs, Trajectory};
use crate::kernels::Kernel;

/// How a check picks its tolerance when the caller gives none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefaultTolerance {
    Fixed(f64),
    /// A quarter of the kernel's confidence radius.
    QuarterRadius,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSpec {
    pub name: &'static str,
    pub default_tolerance: DefaultTolerance,
    /// The property the check tests.
    pub theory_ref: &'static str,
}

const MOMENT_REF: &str = "moments m(k) of the opinion distribution are nonincreasing in time for each k under a symmetric kernel";

pub const CATALOG: &[CheckSpec] = &[
    CheckSpec { name: "moment_monotone_k1", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec { name: "moment_monotone_k2", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec { name: "moment_monotone_k3", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec { name: "moment_monotone_k4", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec { name: "moment_monotone_k5", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec { name: "moment_monotone_k6", default_tolerance: DefaultTolerance::Fixed(1e-6), theory_ref: MOMENT_REF },
    CheckSpec {
        name: "mean_conserved",
        default_tolerance: DefaultTolerance::Fixed(1e-8),
        theory_ref: "the mean opinion is conserved under a symmetric kernel (x and -x are both convex)",
    },
    CheckSpec {
        name: "box_invariant",
        default_tolerance: DefaultTolerance::Fixed(1e-6),
        theory_ref: "opinions starting in [0, 1] stay in [0, 1]",
    },
    CheckSpec {
        name: "time_lipschitz",
        default_tolerance: DefaultTolerance::Fixed(1e-9),
        theory_ref: "each agent moves at speed at most W: |x_t - x_s| <= W |t - s|",
    },
    CheckSpec {
        name: "lyapunov_dictionary",
        default_tolerance: DefaultTolerance::Fixed(1e-6),
        theory_ref: "V_f = int f(x_t) is nonincreasing for every convex f under a symmetric kernel",
    },
    CheckSpec {
        name: "dissipation_identity",
        default_tolerance: DefaultTolerance::Fixed(1e-4),
        theory_ref: "dm2/dt = -D(t), D = double integral of w (x_b - x_a)^2, under a symmetric kernel",
    },
    CheckSpec {
        name: "dissipation_budget",
        default_tolerance: DefaultTolerance::Fixed(1e-5),
        theory_ref: "the time integral of D is finite and equals the total decrease of m2",
    },
    CheckSpec {
        name: "cluster_separation",
        default_tolerance: DefaultTolerance::QuarterRadius,
        theory_ref: "limit clusters of a symmetric Gamma(r, delta) kernel are pairwise at least r apart",
    },
    CheckSpec {
        name: "order_preserved",
        default_tolerance: DefaultTolerance::Fixed(0.05),
        theory_ref: "a Lipschitz kernel depending only on opinions preserves the order of agents, gaps decaying at rate at most L + W",
    },
    CheckSpec {
        name: "convergence_w1",
        default_tolerance: DefaultTolerance::Fixed(0.05),
        theory_ref: "under a symmetric kernel the opinion distribution converges (W1 to the final snapshot tends to 0)",
    },
    CheckSpec {
        name: "steady_state",
        default_tolerance: DefaultTolerance::Fixed(1e-8),
        theory_ref: "the run has reached rest: max |velocity| at the final snapshot",
    },
];

pub fn known_checks() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|c| c.name)
}

pub fn lookup(name: &str) -> Option<&'static CheckSpec> {
    CATALOG.iter().find(|c| c.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("unknown check `{name}`; known checks: {}", known_checks().collect::<Vec<_>>().join(", "))]
    Unknown { name: String },
    #[error("check `{0}` needs a kernel with a confidence radius")]
    NeedsRadius(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub theory_ref: String,
}

/// Everything a check may look at.
pub struct CheckContext<'a> {
    pub trajectory: &'a Trajectory,
    pub kernel: &'a Kernel,
    pub seed: u64,
}

/// Resolve a tolerance for `spec` against `kernel`.
pub fn resolve_tolerance(spec: &CheckSpec, kernel: &Kernel, given: Option<f64>) -> Result<f64, CheckError> {
    if let Some(t) = given {
        return Ok(t);
    }
    match spec.default_tolerance {
        DefaultTolerance::Fixed(t) => Ok(t),
        DefaultTolerance::QuarterRadius => kernel
            .interaction_radius()
            .map(|r| r / 4.0)
            .ok_or_else(|| CheckError::NeedsRadius(spec.name.to_string())),
    }
}

/// Run one named check. `tolerance` falls back to the catalog default.
///
/// `worst_violation` is the quantity compared with the tolerance, except for
/// `order_preserved`, where it counts offending pairs and the tolerance is
/// the slack on the exponential gap bound, and `cluster_separation`, where
/// the tolerance is the gap threshold `g` and the violation is the shortfall
/// below `r - 2 g`.
pub fn evaluate_check(name: &str, tolerance: Option<f64>, ctx: &CheckContext<'_>) -> Result<CheckResult, CheckError> {
    let spec = lookup(name).ok_or_else(|| CheckError::Unknown { name: name.to_string() })?;
    let tol = resolve_tolerance(spec, ctx.kernel, tolerance)?;
    let traj = ctx.trajectory;

    let (worst, pass) = if let Some(k) = name.strip_prefix("moment_monotone_k") {
        let k: u32 = k.parse().expect("catalog names carry an order");
        let series = MomentSeries::from_trajectory(traj, k);
        let r = monotonicity_report(series.order(k), tol);
        (r.worst_uptick, r.pass)
    } else {
        match name {
            "mean_conserved" => {
                let series = MomentSeries::from_trajectory(traj, 1);
                let m = series.order(1);
                let drift = m.iter().map(|v| (v - m[0]).abs()).fold(0.0, f64::max);
                (drift, drift <= tol)
            }
            "box_invariant" => {
                let snap = traj.snapshots.iter().map(|s| s.box_excursion()).fold(0.0, f64::max);
                let clamp = traj.steps.iter().map(|s| s.clamp).fold(0.0, f64::max);
                let worst = snap.max(clamp);
                (worst, worst <= tol)
            }
            "time_lipschitz" => {
                let excess = (traj.time_lipschitz_ratio() - 1.0).max(0.0);
                (excess, excess <= tol)
            }
            "lyapunov_dictionary" => {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                let mut fns = lyapunov_dictionary();
                fns.extend((0..8).map(|_| ConvexFn::random_max_affine(&mut rng, 6)));
                let worst = fns
                    .iter()
                    .map(|f| {
                        let series: Vec<f64> = traj.snapshots.iter().map(|s| lyapunov(s, |x| f.eval(x))).collect();
                        monotonicity_report(&series, tol).worst_uptick
                    })
                    .fold(0.0, f64::max);
                (worst, worst <= tol)
            }
            "dissipation_identity" => {
                let r = dissipation_identity(traj, ctx.kernel);
                (r.worst_residual, r.worst_residual <= tol)
            }
            "dissipation_budget" => {
                let r = dissipation_identity(traj, ctx.kernel);
                (r.budget_gap, r.budget_gap <= tol)
            }
            "cluster_separation" => {
                let r = ctx
                    .kernel
                    .interaction_radius()
                    .ok_or_else(|| CheckError::NeedsRadius(name.to_string()))?;
                let clusters = detect_clusters(traj.last(), tol, 0.0);
                let shortfall = clusters
                    .min_separation()
                    .map_or(0.0, |sep| (r - 2.0 * tol - sep).max(0.0));
                (shortfall, shortfall == 0.0)
            }
            "order_preserved" => {
                let mut cfg = OrderAuditConfig::for_kernel(ctx.kernel);
                cfg.rate_slack = tol;
                cfg.seed = ctx.seed;
                let r = order_audit(traj, &cfg);
                let bad = (r.violations.len() + r.rate_violations) as f64;
                (bad, bad == 0.0)
            }
            "convergence_w1" => {
                let w1 = w1_to_final(traj);
                let t_mid = 0.5 * (traj.first().time() + traj.last().time());
                let worst = traj
                    .snapshots
                    .iter()
                    .zip(&w1)
                    .filter(|(s, _)| s.time() >= t_mid)
                    .map(|(_, &w)| w)
                    .fold(0.0, f64::max);
                (worst, worst < tol)
            }
            "steady_state" => {
                let v = rhs(traj.last(), ctx.kernel);
                let worst = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
                (worst, worst < tol)
            }
            _ => unreachable!("every catalog entry is handled"),
        }
    };
    Ok(CheckResult {
        name: name.to_string(),
        pass,
        worst_violation: worst,
        tolerance: tol,
        theory_ref: spec.theory_ref.to_string(),
    })
}
