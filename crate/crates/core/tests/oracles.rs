//! Library results against independent closed forms and reference solvers.

use opinion_lab::counterexample::{self, Agent, CounterexampleParams};
use opinion_lab::diagnostics::{detect_clusters, order_audit, OrderAuditConfig};
use opinion_lab::ensemble::{integrate, rhs, uniform_ensemble, Ensemble, IntegratorConfig, Method};
use opinion_lab::kernels::{finite_consensus_embed, probe_kernel, Kernel, ProbeConfig, Schedule, StepProfile};
use opinion_lab::picard::{self, PicardConfig};

/// Plain RK4 for `z_i' = sum_j w_ij(t) (z_j - z_i)` with the alternating schedule.
fn three_block_reference(z0: [f64; 3], t_end: f64, dt: f64) -> Vec<(f64, [f64; 3])> {
    let f = |t: f64, z: [f64; 3]| -> [f64; 3] {
        let toward = if t.rem_euclid(2.0) < 1.0 { z[0] } else { z[2] };
        [0.0, toward - z[1], 0.0]
    };
    let mut out = vec![(0.0, z0)];
    let mut z = z0;
    // integer switching times line up with the step grid
    let steps = (t_end / dt).round() as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let seg_t = t + 0.5 * dt; // every stage of this step sees one segment
        let add = |z: [f64; 3], h: f64, k: [f64; 3]| [z[0] + h * k[0], z[1] + h * k[1], z[2] + h * k[2]];
        let k1 = f(seg_t, z);
        let k2 = f(seg_t, add(z, dt / 2.0, k1));
        let k3 = f(seg_t, add(z, dt / 2.0, k2));
        let k4 = f(seg_t, add(z, dt, k3));
        for i in 0..3 {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(((k + 1) as f64 * dt, z));
    }
    out
}

#[test]
fn embedded_blocks_follow_finite_system() {
    let kernel = finite_consensus_embed(Schedule::alternating_three_block());
    let per_block = 4;
    let z0 = [0.1, 0.45, 0.9];
    let x0 = uniform_ensemble(3 * per_block, |a| z0[((a * 3.0) as usize).min(2)]).unwrap();
    let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.01, 6.0)).unwrap();
    let reference = three_block_reference(z0, 6.0, 0.01);
    assert_eq!(traj.snapshots.len(), reference.len());
    for (snap, (t, z)) in traj.snapshots.iter().zip(&reference) {
        assert!((snap.time() - t).abs() < 1e-9);
        for (i, x) in snap.opinions().iter().enumerate() {
            assert!((x - z[i / per_block]).abs() < 1e-9, "t={t} node {i}");
        }
    }
}

#[test]
fn three_block_limit_cycle_matches_closed_form() {
    // z2 alternates between 1 / (1 + e) and e / (1 + e)
    let kernel = finite_consensus_embed(Schedule::alternating_three_block());
    let x0 = Ensemble::new(0.0, vec![1.0 / 6.0, 0.5, 5.0 / 6.0], vec![0.0, 0.5, 1.0], vec![1.0 / 3.0; 3]).unwrap();
    let mut cfg = IntegratorConfig::new(Method::Rk4, 0.01, 40.0);
    cfg.record_every = 100;
    let traj = integrate(&x0, &kernel, &cfg).unwrap();
    let e = std::f64::consts::E;
    let low = 1.0 / (1.0 + e);
    let high = e / (1.0 + e);
    let at = |t: f64| traj.snapshots.iter().find(|s| (s.time() - t).abs() < 1e-9).unwrap().opinions()[1];
    assert!((at(39.0) - low).abs() < 1e-8);
    assert!((at(40.0) - high).abs() < 1e-8);
}

#[test]
fn zero_schedule_freezes_everything() {
    let kernel = finite_consensus_embed(Schedule::constant(2, vec![0.0; 4]).unwrap());
    let x0 = uniform_ensemble(6, |a| a).unwrap();
    let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.1, 3.0)).unwrap();
    assert_eq!(traj.last().opinions(), x0.opinions());
}

#[test]
fn zero_kernel_is_identity_for_any_horizon() {
    let x0 = uniform_ensemble(9, |a| a * a).unwrap();
    for t_end in [0.5, 7.0, 123.0] {
        let traj = integrate(&x0, &Kernel::zero(), &IntegratorConfig::new(Method::ExplicitEuler, 0.5, t_end)).unwrap();
        assert_eq!(traj.last().opinions(), x0.opinions());
    }
}

#[test]
fn hk_four_node_rhs_by_hand() {
    // pairs within 0.3: (1,2) and (3,4)
    let x = [0.0, 0.1, 0.5, 0.6];
    let e = uniform_ensemble(4, |_| 0.0).unwrap().with_opinions(0.0, x.to_vec());
    let v = rhs(&e, &Kernel::hegselmann_krause(0.3).unwrap());
    let expect = [0.025, -0.025, 0.025, -0.025];
    for (a, b) in v.iter().zip(expect) {
        assert!((a - b).abs() < 1e-16);
    }
}

#[test]
fn hk_two_hundred_nodes_separate_clusters() {
    let x0 = uniform_ensemble(200, |a| a).unwrap();
    let kernel = Kernel::hegselmann_krause(0.2).unwrap();
    let mut cfg = IntegratorConfig::new(Method::Rk4, 0.01, 30.0);
    cfg.record_every = 100;
    let traj = integrate(&x0, &kernel, &cfg).unwrap();
    let g = 0.05;
    let clusters = detect_clusters(traj.last(), g, 0.0);
    assert!(clusters.centers.len() >= 2);
    assert!(clusters.min_separation().unwrap() >= 0.2 - 2.0 * g);
    let total: f64 = clusters.masses.iter().sum::<f64>() + clusters.residual_mass;
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn gaussian_order_audit_zero_violations() {
    let x0 = uniform_ensemble(100, |a| 0.5 + 0.45 * (9.0 * a).cos()).unwrap();
    let kernel = Kernel::gaussian_decay(StepProfile::constant(0.3)).unwrap();
    let traj = integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.01, 10.0)).unwrap();
    let rep = order_audit(&traj, &OrderAuditConfig::for_kernel(&kernel));
    assert!(rep.full_audit);
    assert!(rep.violations.is_empty());
    assert_eq!(rep.rate_violations, 0);
}

#[test]
fn hk_without_lipschitz_skips_rate_bound() {
    assert_eq!(OrderAuditConfig::for_kernel(&Kernel::hegselmann_krause(0.2).unwrap()).rate_bound, None);
    let typed = Kernel::typed_confidence(0.2, 0.2).unwrap();
    assert_eq!(OrderAuditConfig::for_kernel(&typed).rate_bound, None);
}

#[test]
fn gaussian_lipschitz_declaration_covers_probe() {
    for sigma in [0.1, 0.5, 2.0] {
        let k = Kernel::gaussian_decay(StepProfile::constant(sigma)).unwrap();
        let rep = probe_kernel(&k, &ProbeConfig::new(20_000, 5)).unwrap();
        // exact slope bound is sqrt(2) e^{-1/2} / sigma
        let exact = std::f64::consts::SQRT_2 * (-0.5f64).exp() / sigma;
        assert!(rep.lipschitz_estimate <= exact * (1.0 + 1e-3));
        assert!(rep.lipschitz_estimate > 0.9 * exact);
        assert!(rep.lipschitz_consistent(&k, 0.0));
    }
}

#[test]
fn counterexample_examples() {
    let p = CounterexampleParams::default();
    // int_0^80 (1 + t)^{-9/8} = 8 (1 - 81^{-1/8})
    let partial = 8.0 * (1.0 - 81f64.powf(-0.125));
    assert!((p.drift_integral(80.0) - partial).abs() < 1e-12);
    let gap_bound = 8.05 - 0.5 - counterexample::DRIFT * partial;
    assert!(gap_bound > 0.0);
    assert!((p.cluster_right(80.0) - 0.5 - gap_bound).abs() < 1e-12);
    for t in [0.0, 1.0, 33.3] {
        let s = counterexample::analytic_state(&p, t).unwrap();
        assert_eq!(s.cluster_left, -s.cluster_right);
    }
    assert!(counterexample::analytic_velocity(&p, 2.0, Agent::Interval(2.0 - p.phase(2.0).fract())).is_err());
}

#[test]
fn counterexample_corner_agent_budget() {
    // at t = 5, eps < 1: interval pull plus cluster pull equals v(t)
    let p = CounterexampleParams::default();
    let rep = counterexample::verify_rhs(&p, 5.0, 4000, 0.01).unwrap();
    assert!(rep.interval_max_error < 2e-4, "{rep:?}");
    assert!(rep.cluster_max_error < 2e-4, "{rep:?}");
}

#[test]
fn picard_single_window_constant_kernel() {
    let x0 = uniform_ensemble(12, |a| a * a).unwrap();
    let kernel = Kernel::constant(1.0).unwrap();
    let cfg = PicardConfig::default();
    let w = picard::picard_window_solve(&kernel, &x0, 0.0, 0.09, &cfg).unwrap();
    let mean = x0.opinions().iter().sum::<f64>() / 12.0;
    let mut err: f64 = 0.0;
    for (t, row) in w.solution.times.iter().zip(&w.solution.values) {
        for (x, x0) in row.iter().zip(x0.opinions()) {
            err = err.max((x - (mean + (x0 - mean) * (-t).exp())).abs());
        }
    }
    assert!(err < 10.0 * cfg.tol, "{err}");
    assert!(w.fixed_point_residual <= 5.0 * cfg.tol);
}

#[test]
fn picard_iterates_stay_in_ball_and_contract() {
    let x0 = uniform_ensemble(30, |a| 0.5 + 0.4 * (5.0 * a).sin()).unwrap();
    let kernel = Kernel::gaussian_decay(StepProfile::constant(1.0)).unwrap();
    let cfg = PicardConfig {
        keep_iterates: true,
        ..PicardConfig::default()
    };
    let run = picard::picard_solve(&kernel, &x0, 0.5, &cfg).unwrap();
    for w in &run.windows {
        assert!(w.converged);
        assert!(w.ratios.iter().all(|&r| r <= w.ratio_bound + 0.05));
        assert!(w.max_iterate_norm <= 2.0);
        assert!(w.max_time_lipschitz <= 4.0 * kernel.w_bound() * (1.0 + 1e-9));
        assert!(w.fixed_point_residual <= 5.0 * cfg.tol);
        assert_eq!(w.iterates.len(), w.iterations + 1);
    }
    assert!(run.trajectory.snapshots.iter().all(|s| s.box_excursion() == 0.0));
    assert!(run.trajectory.time_lipschitz_ratio() <= 1.0 + 1e-9);
    let gap = picard::uniqueness_probe(&kernel, &x0, 0.0, run.windows[0].b, 0.5, &cfg).unwrap();
    assert!(gap <= 2.0 * cfg.tol, "{gap}");
}

#[test]
fn picard_refuses_breakpoint_windows_but_chains_around_them() {
    let kernel = finite_consensus_embed(Schedule::alternating_three_block());
    let x0 = Ensemble::new(0.0, vec![1.0 / 6.0, 0.5, 5.0 / 6.0], vec![0.0, 0.5, 1.0], vec![1.0 / 3.0; 3]).unwrap();
    let err = picard::picard_window_solve(&kernel, &x0.with_opinions(0.95, vec![0.0, 0.5, 1.0]), 0.95, 0.06, &PicardConfig::default());
    assert!(matches!(err, Err(opinion_lab::PicardError::BreakpointInWindow { breakpoint, .. }) if breakpoint == 1.0));
    let run = picard::picard_solve(&kernel, &x0, 2.5, &PicardConfig::default()).unwrap();
    assert!(run.windows.iter().any(|w| (w.t_start - 1.0).abs() < 1e-12));
    assert!(run.windows.iter().any(|w| (w.t_start - 2.0).abs() < 1e-12));
}

#[test]
fn picard_rejects_indicator_kernel() {
    let x0 = uniform_ensemble(4, |a| a).unwrap();
    let err = picard::picard_solve(&Kernel::hegselmann_krause(0.2).unwrap(), &x0, 1.0, &PicardConfig::default());
    assert_eq!(err.unwrap_err(), opinion_lab::PicardError::MissingLipschitz);
}

#[test]
fn rhs_is_thread_count_independent() {
    let x0 = uniform_ensemble(300, |a| 0.5 + 0.5 * (13.0 * a).sin() * a).unwrap();
    let kernel = Kernel::gaussian_decay(StepProfile::new(vec![0.5], vec![0.2, 0.6]).unwrap()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| integrate(&x0, &kernel, &IntegratorConfig::new(Method::Rk4, 0.05, 2.0)).unwrap())
    };
    let (one, many) = (run(1), run(4));
    assert_eq!(one, many);
    assert_eq!(run(4), many);
}
