//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `--nocapture`). Tolerances are pinned in the
//! assertions.

use drip_core::equilibrium::{self, Method, Value};
use drip_core::{
    closed_form, concave_envelope, envelope, fd, fixtures, induced_flow_payoff,
    myopic_regular_strategy, persuasion_beliefs, simulate, solve_closed_form, solve_fd,
    verify_value, ModelSpec, PiecewiseFn,
};

fn flow_payoff(spec: &ModelSpec) -> PiecewiseFn {
    let strat = myopic_regular_strategy(spec).unwrap();
    induced_flow_payoff(spec, &strat).unwrap()
}

fn with_r_sigma2(spec: &ModelSpec, rs2: f64) -> ModelSpec {
    let mut m = spec.clone();
    m.r = rs2 / (m.sigma * m.sigma);
    m
}

/// Two-action benchmark: the concave envelope is the diagonal, and
/// static persuasion from 1/2 induces the extreme beliefs.
#[test]
fn criterion_1_static_benchmark() {
    let u = flow_payoff(&fixtures::two_action());
    let cav = concave_envelope(&u);
    let mut worst = 0.0f64;
    for i in 0..=100_000 {
        let p = i as f64 / 100_000.0;
        worst = worst.max((cav.eval_usc(p) - p).abs());
    }
    assert!(worst <= 1e-12, "cav u deviates from p by {worst:.2e}");
    let (pair, value) = persuasion_beliefs(&u, 0.5);
    assert_eq!((pair.lower, pair.upper), (0.0, 1.0));
    assert!((value - 0.5).abs() <= 1e-12);
    println!("criterion 1 (two-action static benchmark): PASS");
}

/// Two-action long-run beliefs in both regimes.
#[test]
fn criterion_2_two_action_regimes() {
    let spec = fixtures::two_action();
    let u = flow_payoff(&spec);

    let impatient = equilibrium::equilibrium_report(&with_r_sigma2(&spec, 4.0), Method::Auto)
        .unwrap();
    assert!((impatient.long_run.lower - 0.0).abs() <= 1e-6, "{impatient:?}");
    assert!((impatient.long_run.upper - 2.0 / 3.0).abs() <= 1e-6, "{impatient:?}");

    let patient_closed = Value::solve(&u, 0.0625, Method::Closed).unwrap();
    let (pair, _) = equilibrium::long_run_beliefs(&patient_closed, &u, 0.5);
    assert_eq!((pair.lower, pair.upper), (0.0, 1.0), "closed-form patient beliefs are exact");

    let patient_fd = Value::solve(&u, 0.0625, Method::Fd { n_points: 4001 }).unwrap();
    let (pair, _) = equilibrium::long_run_beliefs(&patient_fd, &u, 0.5);
    let h = 1.0 / 4000.0;
    assert!(pair.lower <= 2.0 * h, "{pair:?}");
    assert!(pair.upper >= 1.0 - 2.0 * h, "{pair:?}");
    println!("criterion 2 (two-action regimes): PASS");
}

/// Three-action long-run beliefs: less extreme when impatient,
/// persuasion-coincident when patient.
#[test]
fn criterion_3_three_action_regimes() {
    let spec = fixtures::three_action();

    let impatient = equilibrium::equilibrium_report(&with_r_sigma2(&spec, 4.0), Method::Auto)
        .unwrap();
    assert!((impatient.long_run.lower - 0.5).abs() <= 1e-6, "{impatient:?}");
    assert!((impatient.long_run.upper - 0.75).abs() <= 1e-6, "{impatient:?}");

    let patient = equilibrium::equilibrium_report(&with_r_sigma2(&spec, 0.0625), Method::Auto)
        .unwrap();
    assert!((patient.long_run.lower - 0.0).abs() <= 1e-6, "{patient:?}");
    assert!((patient.long_run.upper - 0.75).abs() <= 1e-6, "{patient:?}");
    assert!((patient.persuasion.lower - 0.0).abs() <= 1e-6);
    assert!((patient.persuasion.upper - 0.75).abs() <= 1e-6);
    println!("criterion 3 (three-action regimes): PASS");
}

/// The two solver routes agree, and the gap shrinks under refinement.
#[test]
fn criterion_4_oracle_equivalence() {
    for spec in [fixtures::two_action(), fixtures::three_action()] {
        let u = flow_payoff(&spec);
        for rs2 in [0.0625, 0.25, 1.0, 4.0] {
            let exact = solve_closed_form(&u, rs2).unwrap();
            let sup = |n: usize| -> f64 {
                let gv = solve_fd(&u, rs2, n).unwrap();
                let mut worst = 0.0f64;
                for i in 0..gv.n_points {
                    worst = worst.max((gv.values[i] - exact.eval(gv.grid_point(i))).abs());
                }
                worst
            };
            let coarse = sup(4001);
            let fine = sup(16001);
            assert!(coarse <= 5e-3, "gap {coarse:.2e} at rs2={rs2}");
            assert!(
                coarse >= 3.0 * fine,
                "refinement shrank {coarse:.2e} only to {fine:.2e} at rs2={rs2}"
            );
        }
    }
    println!("criterion 4 (closed form vs finite differences): PASS");
}

/// Monotone comparative statics in r sigma^2 on both solver routes.
#[test]
fn criterion_5_monotone_comparative_statics() {
    let spec = fixtures::two_action();
    let u = flow_payoff(&spec);
    let list: Vec<f64> = (0..9).map(|k| 4.0 / (1u32 << k) as f64).collect();

    let table = equilibrium::sweep(&spec, &list, Method::Closed).unwrap();
    for w in table.rows.windows(2) {
        assert!(w[1].p_minus <= w[0].p_minus + 1e-9);
        assert!(w[1].p_plus >= w[0].p_plus - 1e-9);
        assert!(w[1].sup_gap < w[0].sup_gap, "sup gap must fall strictly");
    }
    let final_gap = table.rows.last().unwrap().sup_gap;
    assert!(final_gap < 0.05, "sup gap at 1/64 is {final_gap:.3}");

    // Pointwise monotonicity of the value itself, both routes.
    let probes: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let mut prev_closed: Option<Vec<f64>> = None;
    let mut prev_grid: Option<Vec<f64>> = None;
    for &rs2 in &list {
        let closed = solve_closed_form(&u, rs2).unwrap();
        let vals: Vec<f64> = probes.iter().map(|&p| closed.eval(p)).collect();
        if let Some(prev) = &prev_closed {
            for (a, b) in prev.iter().zip(&vals) {
                assert!(*b >= a - 1e-9, "closed-form value fell: {a} -> {b}");
            }
        }
        prev_closed = Some(vals);

        let grid = solve_fd(&u, rs2, 4001).unwrap();
        let vals: Vec<f64> = probes.iter().map(|&p| grid.eval(p)).collect();
        if let Some(prev) = &prev_grid {
            for (a, b) in prev.iter().zip(&vals) {
                assert!(*b >= a - 1e-4, "grid value fell: {a} -> {b}");
            }
        }
        prev_grid = Some(vals);
    }
    println!("criterion 5 (monotone comparative statics): PASS");
}

/// Persuasion sandwich on the whole matrix; strict inequalities for the
/// quartic payoff at every tested impatience.
#[test]
fn criterion_6_persuasion_sandwich() {
    let matrix = [
        fixtures::two_action(),
        fixtures::three_action(),
        fixtures::common_payoff_two_action(),
        fixtures::quartic(),
    ];
    for spec in &matrix {
        let u = flow_payoff(spec);
        let (pers, _) = persuasion_beliefs(&u, spec.p0);
        for rs2 in [1.0, 0.25, 0.0625, 1.0 / 64.0] {
            let v = Value::solve(&u, rs2, Method::Fd { n_points: 4001 }).unwrap();
            let (lr, _) = equilibrium::long_run_beliefs(&v, &u, spec.p0);
            assert!(
                pers.lower <= lr.lower + 1e-6
                    && lr.lower <= lr.upper
                    && lr.upper <= pers.upper + 1e-6,
                "sandwich failed on {:?} at rs2={rs2}: {pers:?} vs {lr:?}",
                spec.actions
            );
        }
    }
    // Gradual convergence: the quartic's long-run beliefs stay strictly
    // less extreme than the persuasion beliefs.
    let quartic = fixtures::quartic();
    let u = flow_payoff(&quartic);
    let (pers, _) = persuasion_beliefs(&u, 0.5);
    for rs2 in [1.0, 0.25, 0.0625, 1.0 / 64.0] {
        let v = Value::solve(&u, rs2, Method::Fd { n_points: 4001 }).unwrap();
        let (lr, _) = equilibrium::long_run_beliefs(&v, &u, 0.5);
        assert!(
            pers.lower + 1e-4 < lr.lower,
            "lower margin too small at rs2={rs2}: {pers:?} vs {lr:?}"
        );
        assert!(
            lr.upper + 1e-4 < pers.upper,
            "upper margin too small at rs2={rs2}: {pers:?} vs {lr:?}"
        );
    }
    println!("criterion 6 (persuasion sandwich, strict for the quartic): PASS");
}

/// Full information under a purely belief-based conflict, with the
/// threshold located by bisection; the concave payoff is rejected.
#[test]
fn criterion_7_full_information() {
    let spec = fixtures::common_payoff_two_action();
    let grid = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];
    let report = equilibrium::full_info_check(&spec, &grid, 2001).unwrap();
    assert!(report.applicable);
    let eta = report.eta_estimate.expect("full information must occur on the grid");
    for &(rs2, full) in &report.checked_grid {
        assert_eq!(full, rs2 < eta, "classification at rs2={rs2} vs eta={eta}");
    }
    // For this payoff the threshold is the two-action regime switch 2/9.
    assert!((eta - 2.0 / 9.0).abs() <= 1e-2, "eta = {eta}");

    match equilibrium::full_info_check(&fixtures::concave_common_payoff(), &grid, 1001) {
        Err(drip_core::Error::NotApplicable(msg)) => {
            assert!(msg.contains("convex"), "wrong reason: {msg}")
        }
        other => panic!("expected NotApplicable, got {other:?}"),
    }
    println!("criterion 7 (full information for belief-based conflicts): PASS");
}

/// Simulation consistency on the impatient three-action equilibrium.
#[test]
fn criterion_8_simulation() {
    let spec = with_r_sigma2(&fixtures::three_action(), 4.0);
    let u = flow_payoff(&spec);
    let v = Value::solve(&u, 4.0, Method::Closed).unwrap();
    let policy = equilibrium::best_reply_policy(&v, &u, fd::default_contact_tol(&u));
    let (expected, _) = equilibrium::long_run_beliefs(&v, &u, 0.625);

    let cfg = simulate::SimConfig {
        dt: 1e-4,
        horizon: 50.0 / spec.r,
        n_paths: 20_000,
        seed: 20_240_601,
        store_paths: false,
    };
    let result = simulate::simulate_paths(&u, spec.r, spec.sigma, &policy, 0.625, &cfg).unwrap();
    let n_abs = result.n_absorbed_low + result.n_absorbed_high;
    assert!(n_abs >= 19_900, "nearly all paths must absorb: {result:?}");

    // Fraction absorbed at 3/4 within three standard errors of 1/2.
    let frac_high = result.n_absorbed_high as f64 / n_abs as f64;
    let se = (0.5 * 0.5 / n_abs as f64).sqrt();
    assert!(
        (frac_high - 0.5).abs() <= 3.0 * se,
        "fraction at 3/4 = {frac_high} (se {se:.2e})"
    );
    let z = simulate::absorption_stats(&result, &expected, 0.625);
    assert!(z.z_upper_fraction.abs() <= 3.0, "{z:?}");

    // Martingale mean within three standard errors of the prior.
    assert!(
        (result.mean_terminal - 0.625).abs() <= 3.0 * result.se_terminal,
        "mean terminal {} (se {:.2e})",
        result.mean_terminal,
        result.se_terminal
    );

    // Bit-identical rerun.
    let rerun = simulate::simulate_paths(&u, spec.r, spec.sigma, &policy, 0.625, &cfg).unwrap();
    assert_eq!(result.n_absorbed_low, rerun.n_absorbed_low);
    assert_eq!(result.n_absorbed_high, rerun.n_absorbed_high);
    assert_eq!(result.mean_terminal.to_bits(), rerun.mean_terminal.to_bits());
    assert_eq!(
        result.mean_discounted_payoff.to_bits(),
        rerun.mean_discounted_payoff.to_bits()
    );
    println!("criterion 8 (simulation consistency): PASS");
}

/// Verification reports on every closed-form solution in the matrix,
/// with the kink structure of the two regimes.
#[test]
fn criterion_9_verification_suite() {
    for spec in [
        fixtures::two_action(),
        fixtures::three_action(),
        fixtures::common_payoff_two_action(),
    ] {
        let u = flow_payoff(&spec);
        for rs2 in [4.0, 1.0, 0.25, 0.0625] {
            let v = solve_closed_form(&u, rs2).unwrap();
            let report = verify_value(&v, &u, rs2);
            assert!(report.continuity_gap <= 1e-8, "{report:?}");
            assert!(report.pasting_gap <= 1e-8, "{report:?}");
            assert!(report.ode_residual <= 1e-8, "{report:?}");
            assert!(
                report.passes(closed_form::VERIFY_TOL),
                "verification failed on {:?} at rs2={rs2}: {report:?}",
                spec.actions
            );
        }
    }

    // Impatient two-action: a concave kink at 2/3. Patient: none.
    let u = flow_payoff(&fixtures::two_action());
    let impatient = solve_closed_form(&u, 4.0).unwrap();
    let report = verify_value(&impatient, &u, 4.0);
    assert_eq!(report.kinks.len(), 1, "{report:?}");
    let (at, drop) = report.kinks[0];
    assert!((at - 2.0 / 3.0).abs() <= 1e-9);
    assert!(drop > 0.0, "the kink must be concave");

    let patient = solve_closed_form(&u, 0.0625).unwrap();
    let report = verify_value(&patient, &u, 0.0625);
    assert!(report.kinks.is_empty(), "{report:?}");

    // The envelope contact invariant at the persuasion beliefs.
    for spec in [fixtures::two_action(), fixtures::three_action(), fixtures::quartic()] {
        let u = flow_payoff(&spec);
        let cav = concave_envelope(&u);
        let (pair, _) = persuasion_beliefs(&u, spec.p0);
        for p in [pair.lower, pair.upper] {
            let gap = cav.eval_usc(p) - u.eval_usc(p);
            assert!(gap.abs() <= envelope::CONTACT_TOL, "gap {gap:.2e} at {p}");
        }
    }
    println!("criterion 9 (verification suite): PASS");
}
