//! Check names per subcommand.
//!
//! `simulate` uses the trajectory checks of the core library; the analytic
//! `counterexample` report and `picard-check` have their own.

use opinion_lab::diagnostics::checks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Counterexample,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraCheck {
    pub name: &'static str,
    /// `None` when the default depends on the run (see the check).
    pub default_tolerance: Option<f64>,
    pub theory_ref: &'static str,
}

pub const COUNTEREXAMPLE_CHECKS: &[ExtraCheck] = &[
    ExtraCheck {
        name: "stationary_law",
        // 10 / n_interval
        default_tolerance: None,
        theory_ref: "the interval population keeps the uniform law of density 2 on [-1/2, 1/2] at every time",
    },
    ExtraCheck {
        name: "fold_crossings",
        default_tolerance: Some(1.0),
        theory_ref: "interval agents never settle: each predicted fold crossing shows up as a direction reversal",
    },
    ExtraCheck {
        name: "cluster_gap",
        default_tolerance: Some(0.0),
        theory_ref: "the clusters drift toward +-1/2 but stay at least C0 - 1/2 - (2 sqrt 2 / 3) int v^{3/2} away",
    },
    ExtraCheck {
        name: "mirror_symmetry",
        default_tolerance: Some(1e-12),
        theory_ref: "the construction is symmetric about 0: the left cluster mirrors the right one",
    },
    ExtraCheck {
        name: "rhs_identity",
        default_tolerance: Some(0.02),
        theory_ref: "the analytic motion solves the equation: the discretized right-hand side matches the analytic velocity",
    },
];

pub const PICARD_CHECKS: &[ExtraCheck] = &[
    ExtraCheck {
        name: "picard_contraction",
        default_tolerance: Some(0.95),
        theory_ref: "on windows b < min(1/(4W), 1/(2(W + 4L))) the Picard operator is a contraction",
    },
    ExtraCheck {
        name: "picard_rk4_agreement",
        default_tolerance: Some(1e-6),
        theory_ref: "the solution is unique: the Picard fixed point agrees with an independent RK4 integration",
    },
];

pub fn extra_checks(mode: Mode) -> &'static [ExtraCheck] {
    match mode {
        Mode::Simulate => &[],
        Mode::Counterexample => COUNTEREXAMPLE_CHECKS,
        Mode::Picard => PICARD_CHECKS,
    }
}

pub fn known(mode: Mode) -> Vec<&'static str> {
    match mode {
        Mode::Simulate => checks::known_checks().collect(),
        _ => extra_checks(mode).iter().map(|c| c.name).collect(),
    }
}

pub fn is_known(mode: Mode, name: &str) -> bool {
    known(mode).contains(&name)
}

pub fn lookup_extra(mode: Mode, name: &str) -> Option<&'static ExtraCheck> {
    extra_checks(mode).iter().find(|c| c.name == name)
}

/// Every check name with its theory reference, for docs and `report`.
pub fn traceability() -> Vec<(&'static str, &'static str)> {
    checks::CATALOG
        .iter()
        .map(|c| (c.name, c.theory_ref))
        .chain(COUNTEREXAMPLE_CHECKS.iter().chain(PICARD_CHECKS).map(|c| (c.name, c.theory_ref)))
        .collect()
}
