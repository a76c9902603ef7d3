//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured numbers, then asserts.
//!
//! Run with `cargo test -p opinion-lab-core --test acceptance`.

use std::io::Write;
use std::time::Instant;

use opinion_lab::counterexample::{self, CounterexampleParams, ReportConfig};
use opinion_lab::diagnostics::{
    self, detect_clusters, dissipation_identity, monotonicity_report, order_audit, variance_identity_check,
    MomentSeries, OrderAuditConfig,
};
use opinion_lab::ensemble::{integrate, rhs, uniform_ensemble, Ensemble, IntegratorConfig, Method};
use opinion_lab::kernels::{finite_consensus_embed, CustomRule, Kernel, Schedule, ScheduleSegment, StepProfile};
use opinion_lab::picard::{self, PicardConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // straight to the stream, so the line shows up even when output is captured
    let line = format!("criterion {n} [{name}]: {verdict} ({detail})\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

#[test]
fn criterion_01_moment_monotonicity() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let traj = pool.install(|| {
        let x0 = uniform_ensemble(200, |a| a).unwrap();
        let kernel = Kernel::hegselmann_krause(0.2).unwrap();
        integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.01, 30.0)).unwrap()
    });
    let elapsed = start.elapsed().as_secs_f64();

    let series = MomentSeries::from_trajectory(&traj, 6);
    let worst = (1..=6)
        .map(|k| monotonicity_report(series.order(k), 1e-6).worst_uptick)
        .fold(0.0, f64::max);
    let m1 = series.order(1);
    let drift = m1.iter().map(|v| (v - m1[0]).abs()).fold(0.0, f64::max);

    let pass = worst <= 1e-6 && drift <= 1e-8 && elapsed < 10.0;
    report(
        1,
        "moment monotonicity",
        pass,
        format!("worst uptick {worst:.3e} <= 1e-6, mean drift {drift:.3e} <= 1e-8, {elapsed:.2} s < 10 s on 1 thread"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_dissipation_identity() {
    let x0 = uniform_ensemble(100, |a| a).unwrap();
    let kernel = Kernel::gaussian_decay(StepProfile::constant(1.0)).unwrap();
    let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.005, 5.0)).unwrap();
    let r = dissipation_identity(&traj, &kernel);

    let pass = r.worst_residual <= 1e-4 && r.budget_gap <= 1e-5 && r.skipped_intervals == 0;
    report(
        2,
        "dissipation identity",
        pass,
        format!(
            "max |dm2/dt + D| {:.3e} <= 1e-4 over {} steps, |int D - (m2(0) - m2(T))| {:.3e} <= 1e-5",
            r.worst_residual, r.checked_intervals, r.budget_gap
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_variance_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=500);
        let values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0)).collect();
        worst = worst.max(variance_identity_check(&values, &masses).abs_error);
    }
    let pass = worst < 1e-10;
    report(3, "variance identity", pass, format!("max abs error {worst:.3e} < 1e-10 over 1000 instances"));
    assert!(pass);
}

/// Piecewise-linear profile through random knots, values in `[0, 1]`.
fn random_profile(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let knots = rng.gen_range(2..=6);
    let mut xs: Vec<f64> = (0..knots).map(|_| rng.gen::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    xs[0] = 0.0;
    xs[knots - 1] = 1.0;
    let ys: Vec<f64> = (0..knots).map(|_| rng.gen::<f64>()).collect();
    move |a: f64| {
        let k = xs.partition_point(|&x| x <= a).clamp(1, xs.len() - 1);
        let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
        if x1 == x0 {
            y1
        } else {
            (y0 + (y1 - y0) * (a - x0) / (x1 - x0)).clamp(0.0, 1.0)
        }
    }
}

#[test]
fn criterion_04_cluster_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for run in 0..20 {
        let r = [0.1, 0.2, 0.3][run % 3];
        let x0 = uniform_ensemble(100, random_profile(&mut rng)).unwrap();
        let kernel = Kernel::hegselmann_krause(r).unwrap();
        let mut cfg = IntegratorConfig::new(Method::ExplicitEuler, 0.25, 5000.0);
        cfg.stop_velocity = Some(1e-8);
        cfg.record_every = 1000;
        let traj = integrate(&x0, &kernel, &cfg).unwrap();
        let gap = r / 4.0;
        let clusters = detect_clusters(traj.last(), gap, 0.0);
        let sep = clusters.min_separation().unwrap_or(f64::INFINITY);
        min_margin = min_margin.min(sep - (r - 2.0 * gap));
        if !traj.stopped_early || sep < r - 2.0 * gap {
            failures.push((run, r, traj.stopped_early, sep));
        }
    }
    let pass = failures.is_empty();
    report(
        4,
        "cluster separation",
        pass,
        format!("20 HK runs, failures {failures:?}, smallest margin over r - 2g {min_margin:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_order_preservation() {
    let mut flips = 0;
    let mut rate_violations = 0;
    let mut min_rate = f64::INFINITY;
    for sigma in [0.2, 0.5, 1.0] {
        let x0 = uniform_ensemble(100, |a| 0.5 + 0.4 * (6.0 * a).sin()).unwrap();
        let kernel = Kernel::gaussian_decay(StepProfile::constant(sigma)).unwrap();
        let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.01, 10.0)).unwrap();
        let cfg = OrderAuditConfig::for_kernel(&kernel);
        assert_eq!(cfg.rate_bound, Some(1.0 / sigma + 1.0));
        let r = order_audit(&traj, &cfg);
        assert!(r.full_audit);
        flips += r.violations.len();
        rate_violations += r.rate_violations;
        min_rate = min_rate.min(r.min_gap_ratio_log.unwrap_or(0.0) / (1.0 / sigma + 1.0));
    }
    let pass = flips == 0 && rate_violations == 0;
    report(
        5,
        "order preservation",
        pass,
        format!(
            "sign flips {flips}, gap-bound violations {rate_violations} (5% slack), slowest decay at {:.3} of L + W",
            -min_rate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_counterexample_validity() {
    let params = CounterexampleParams::default();
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for t in [0.5, 5.0, 50.0] {
        let coarse = counterexample::verify_rhs(&params, t, 2000, 0.01).unwrap();
        let fine = counterexample::verify_rhs(&params, t, 4000, 0.01).unwrap();
        let ratio = coarse.max_abs_error / fine.max_abs_error;
        let ok = coarse.max_abs_error <= 0.02 && (1.6..=2.4).contains(&ratio);
        pass &= ok;
        lines.push(format!(
            "t={t}: err {:.4} (interval {:.4}, cluster {:.4}), halving ratio {ratio:.2}",
            coarse.max_abs_error, coarse.interval_max_error, coarse.cluster_max_error
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 30.0;
    report(
        6,
        "counterexample validity",
        pass,
        format!("{}; limits err <= 0.02, ratio 2 +-20%; {elapsed:.2} s < 30 s", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_07_counterexample_dichotomy() {
    let params = CounterexampleParams::default();
    let (r, _) = counterexample::run_counterexample_report(&params, &ReportConfig::new(80.0)).unwrap();
    let tol = 10.0 / params.n_interval as f64;
    let crossings = r.tracked.iter().map(|a| a.analytic_crossings).min().unwrap_or(0);
    let pass = r.max_w1_to_uniform < tol
        && r.max_w1_to_start < tol
        && r.min_reversals >= 4
        && crossings >= 4
        && r.min_cluster_gap >= 0.007
        && r.order_audit.total_flips >= 1;
    report(
        7,
        "counterexample dichotomy",
        pass,
        format!(
            "W1 to uniform {:.2e}, W1 to t=1 {:.2e} (< {tol:.0e}); Phi(80) = {}; min reversals {} (>= 4); cluster gap {:.5} (>= 0.007); order flips {}",
            r.max_w1_to_uniform, r.max_w1_to_start, r.phase_end, r.min_reversals, r.min_cluster_gap, r.order_audit.total_flips
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_picard_contraction() {
    let start = Instant::now();
    let x0 = uniform_ensemble(50, |a| 0.5 + 0.4 * (6.0 * a).sin()).unwrap();
    let kernel = Kernel::gaussian_decay(StepProfile::constant(1.0)).unwrap();
    let cfg = PicardConfig {
        window: Some(0.09),
        ..PicardConfig::default()
    };
    let run = picard::picard_solve(&kernel, &x0, 1.0, &cfg).unwrap();
    let worst_ratio = run.windows.iter().map(|w| w.max_ratio()).fold(0.0, f64::max);
    let distance = picard::cross_validate(&kernel, &run, 8).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_ratio <= 0.95 && distance <= 1e-6 && elapsed < 60.0;
    report(
        8,
        "picard contraction",
        pass,
        format!(
            "{} windows, worst residual ratio {worst_ratio:.3} <= 0.95, sup distance to rk4 {distance:.3e} <= 1e-6, {elapsed:.2} s < 60 s",
            run.windows.len()
        ),
    );
    assert!(pass);
}

/// Reference Neumaier sum, written out separately from the library.
fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

type Weight = Box<dyn Fn(f64, f64, f64, f64, f64) -> f64>;

/// Built-in kernels paired with weight formulas written independently
/// where the formula is short.
fn oracle_kernels() -> Vec<(&'static str, Kernel, Weight)> {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let radius = StepProfile::new(vec![0.4], vec![0.15, 0.35]).unwrap();
    let r_of = |a: f64| if a < 0.4 { 0.15 } else { 0.35 };
    let sigma = StepProfile::new(vec![0.3, 0.7], vec![0.2, 0.5, 1.0]).unwrap();
    let s_of = |a: f64| if a < 0.3 { 0.2 } else if a < 0.7 { 0.5 } else { 1.0 };
    let sched = Schedule::new(
        2,
        vec![
            ScheduleSegment { duration: 1.5, weights: vec![0.0, 1.0, 0.5, 0.0] },
            ScheduleSegment { duration: 2.0, weights: vec![0.2, 0.0, 2.0, 0.3] },
        ],
        true,
    )
    .unwrap();
    let embed_w = |t: f64, a: f64, b: f64| {
        let seg = if t.rem_euclid(3.5) < 1.5 { [0.0, 1.0, 0.5, 0.0] } else { [0.2, 0.0, 2.0, 0.3] };
        let (i, j) = (usize::from(a >= 0.5), usize::from(b >= 0.5));
        2.0 * seg[i * 2 + j]
    };
    let cparams = CounterexampleParams::default();
    let ckernel = Kernel::counterexample(cparams);
    let ck = ckernel.clone();
    let custom = Kernel::custom(
        CustomRule::new("mix", |t, a, b, xa, xb| (1.0 + (t * a * b).sin()) * (-(xa - xb).abs()).exp() / 2.0),
        1.0,
        None,
        false,
        false,
    )
    .unwrap();
    vec![
        ("hk", Kernel::hegselmann_krause(0.3).unwrap(), Box::new(move |_, _, _, xa, xb| ind((xb - xa).abs() < 0.3))),
        (
            "bounded_confidence",
            Kernel::bounded_confidence(radius.clone()).unwrap(),
            Box::new(move |_, a, _, xa, xb| ind((xb - xa).abs() < r_of(a))),
        ),
        (
            "bounded_influence",
            Kernel::bounded_influence(radius).unwrap(),
            Box::new(move |_, _, b, xa, xb| ind((xb - xa).abs() < r_of(b))),
        ),
        (
            "gaussian",
            Kernel::gaussian_decay(sigma).unwrap(),
            Box::new(move |_, a, _, xa, xb| (-((xa - xb) * (xa - xb)) / (s_of(a) * s_of(a))).exp()),
        ),
        (
            "ring",
            Kernel::ring_sensing(0.1, 0.3).unwrap(),
            Box::new(move |_, _, _, xa, xb| ind((xa - xb).abs() >= 0.1 && (xa - xb).abs() <= 0.3)),
        ),
        (
            "typed",
            Kernel::typed_confidence(0.4, 0.3).unwrap(),
            Box::new(move |_, a, b, xa, xb| ind((a - b).abs() < 0.3) * ind((xa - xb).abs() < 0.4)),
        ),
        ("embed", finite_consensus_embed(sched), Box::new(move |t, a, b, _, _| embed_w(t, a, b))),
        ("counterexample", ckernel, Box::new(move |t, a, b, xa, xb| ck.evaluate(t, a, b, xa, xb))),
        ("constant", Kernel::constant(0.7).unwrap(), Box::new(|_, _, _, _, _| 0.7)),
        ("custom", custom.clone(), Box::new(move |t, a, b, xa, xb| custom.evaluate(t, a, b, xa, xb))),
    ]
}

#[test]
fn criterion_09_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = Vec::new();
    let kernels = oracle_kernels();
    for (name, kernel, weight) in &kernels {
        for _ in 0..100 {
            let n = rng.gen_range(2..=8);
            let t = rng.gen_range(0.0..10.0);
            let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let e = uniform_ensemble(n, |_| 0.0).unwrap().with_opinions(t, x.clone());
            let (a, m) = (e.indices(), e.masses());
            let reference: Vec<f64> = (0..n)
                .map(|i| neumaier((0..n).map(|j| m[j] * weight(t, a[i], a[j], x[i], x[j]) * (x[j] - x[i]))))
                .collect();
            let got = rhs(&e, kernel);
            if got.iter().zip(&reference).any(|(g, r)| g.to_bits() != r.to_bits()) {
                mismatches.push(*name);
            }
        }
    }
    mismatches.dedup();
    let pass = mismatches.is_empty();
    report(
        9,
        "oracle equivalence",
        pass,
        format!("{} kernels x 100 states, bit mismatches in {mismatches:?}", kernels.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_10_asymmetric_non_convergence() {
    let kernel = finite_consensus_embed(Schedule::alternating_three_block());
    let x0 = Ensemble::new(0.0, vec![1.0 / 6.0, 0.5, 5.0 / 6.0], vec![0.0, 0.5, 1.0], vec![1.0 / 3.0; 3]).unwrap();
    let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.01, 20.0)).unwrap();

    let z2: Vec<f64> = traj.snapshots.iter().map(|s| s.opinions()[1]).collect();
    let mut reversals = 0;
    let mut last_dir = 0.0;
    for w in z2.windows(2) {
        let d = w[1] - w[0];
        if d != 0.0 {
            if last_dir != 0.0 && d.signum() != last_dir {
                reversals += 1;
            }
            last_dir = d.signum();
        }
    }
    let w1 = diagnostics::w1_to_final(&traj);
    let tail = traj
        .snapshots
        .iter()
        .zip(&w1)
        .filter(|(s, _)| s.time() >= 10.0)
        .map(|(_, &w)| w)
        .fold(0.0, f64::max);
    let pass = reversals >= 5 && tail >= 0.05;
    report(
        10,
        "asymmetric non-convergence",
        pass,
        format!("block 2 reversals {reversals} (>= 5), W1 to final over t >= 10 reaches {tail:.4} (stays >= 0.05)"),
    );
    assert!(pass);
}
