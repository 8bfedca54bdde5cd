//! Flow solver verification: stationary anchors, dense-output refinement,
//! self-convergence order, volume conservation and the two-solution
//! contraction rates.

use bergmanflow::geometry::Mode;
use bergmanflow::krf::{flow_solve, second_time_derivative, stationarity_residual, FlowCtrl, FlowTrajectory};
use bergmanflow::ode::StepControl;
use bergmanflow::potential::{laplacian_phi, ma_density, sup_distance, FlowRhsCache};
use bergmanflow::weight_spec::{random_weight, rng_from_seed};
use bergmanflow::{Error, GridP1, MeasureSetting, Weight};

fn quick_ctrl() -> FlowCtrl {
    FlowCtrl {
        step: StepControl { rel_tol: 1e-9, abs_tol: 1e-11, ..Default::default() },
        band_limit: 40,
        horizon: 2.0,
    }
}

fn grid96() -> GridP1 {
    GridP1::invariant(96)
}

fn generic_weight(grid: &GridP1) -> Weight {
    let psi = grid
        .field_from_modes(&[
            Mode { l: 1, m: 0, c: 0.08 },
            Mode { l: 2, m: 0, c: 0.05 },
            Mode { l: 3, m: 0, c: -0.02 },
        ])
        .unwrap();
    Weight::new(grid, 1, psi, 0.0).unwrap()
}

#[test]
fn stationary_when_measure_matches_start() {
    let grid = grid96();
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::s0_from_ma(&grid, &w0).unwrap();
    let traj = flow_solve(&grid, &w0, &s, 1.0, &quick_ctrl()).unwrap();
    for t in [0.25, 0.5, 1.0] {
        let wt = traj.dense_output(&grid, t).unwrap();
        assert!(sup_distance(&wt, &w0).unwrap() < 1e-10, "drift at t={t}");
    }
}

#[test]
fn calibrated_anticanonical_round_is_stationary() {
    let grid = grid96();
    let w0 = Weight::reference(&grid, 1);
    let s = MeasureSetting::sminus_calibrated(&grid, 1);
    assert!(stationarity_residual(&grid, &w0, &s).unwrap() < 1e-12);
    let traj = flow_solve(&grid, &w0, &s, 1.0, &quick_ctrl()).unwrap();
    let wt = traj.dense_output(&grid, 1.0).unwrap();
    assert!(sup_distance(&wt, &w0).unwrap() < 1e-10);
}

#[test]
fn stationarity_residual_is_sup_of_log_ratio() {
    let grid = grid96();
    let mut rng = rng_from_seed(17);
    let w = random_weight(&grid, &mut rng, 1, 5, 0.5);
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let r = stationarity_residual(&grid, &w, &s).unwrap();
    let cache = FlowRhsCache::build(&grid, &w, &s).unwrap();
    let oracle = grid.cl_norm(&cache.log_ratio().unwrap(), 0).unwrap();
    assert_eq!(r, oracle);
    // exactly zero when μ is built from φ itself
    let s_self = MeasureSetting::s0_from_ma(&grid, &w).unwrap();
    assert!(stationarity_residual(&grid, &w, &s_self).unwrap() < 1e-14);
}

#[test]
fn dense_output_reproduces_nodes_and_refines() {
    let grid = grid96();
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let traj = flow_solve(&grid, &w0, &s, 0.5, &quick_ctrl()).unwrap();
    // t = 0 returns the (band-projected) start
    let at0 = traj.dense_output(&grid, 0.0).unwrap();
    assert!(sup_distance(&at0, &w0).unwrap() < 1e-12);
    // midpoints against a tighter re-run
    let tight = FlowCtrl {
        step: StepControl { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() },
        band_limit: 40,
        horizon: 2.0,
    };
    let traj2 = flow_solve(&grid, &w0, &s, 0.5, &tight).unwrap();
    for t in [0.13, 0.279, 0.4441] {
        let a = traj.dense_output(&grid, t).unwrap();
        let b = traj2.dense_output(&grid, t).unwrap();
        assert!(sup_distance(&a, &b).unwrap() < 1e-7, "dense output at t={t}");
    }
    // horizon guard
    assert!(matches!(
        traj.dense_output(&grid, 0.75),
        Err(Error::OutOfHorizon { .. })
    ));
}

#[test]
fn tolerance_halving_changes_endpoint_below_1e8() {
    let grid = grid96();
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let run = |rt: f64| -> Weight {
        let ctrl = FlowCtrl {
            step: StepControl { rel_tol: rt, abs_tol: rt * 1e-2, ..Default::default() },
            band_limit: 40,
            horizon: 2.0,
        };
        let traj = flow_solve(&grid, &w0, &s, 1.0, &ctrl).unwrap();
        traj.dense_output(&grid, 1.0).unwrap()
    };
    let a = run(1e-9);
    let b = run(5e-10);
    assert!(sup_distance(&a, &b).unwrap() < 1e-8);
}

#[test]
fn fixed_step_time_order_at_least_two() {
    let grid = GridP1::invariant(64);
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let run = |dt: f64| -> Weight {
        let ctrl = FlowCtrl {
            step: StepControl { fixed_dt: Some(dt), ..Default::default() },
            band_limit: 24,
            horizon: 2.0,
        };
        let traj = flow_solve(&grid, &w0, &s, 0.1, &ctrl).unwrap();
        traj.dense_output(&grid, 0.1).unwrap()
    };
    let reference = run(6.25e-5);
    let e1 = sup_distance(&run(1e-3), &reference).unwrap();
    let e2 = sup_distance(&run(5e-4), &reference).unwrap();
    let order = (e1 / e2).log2();
    assert!(order >= 2.0, "observed order {order} (e1={e1}, e2={e2})");
}

#[test]
fn spatial_resolution_is_spectral() {
    let grid = GridP1::invariant(96);
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let run = |band: usize| -> Weight {
        let ctrl = FlowCtrl {
            step: StepControl { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() },
            band_limit: band,
            horizon: 2.0,
        };
        let traj = flow_solve(&grid, &w0, &s, 0.3, &ctrl).unwrap();
        traj.dense_output(&grid, 0.3).unwrap()
    };
    let coarse = run(16);
    let mid = run(24);
    let fine = run(48);
    let e1 = sup_distance(&coarse, &fine).unwrap();
    let e2 = sup_distance(&mid, &fine).unwrap();
    assert!(e2 < e1 / 50.0 || e2 < 1e-12, "spectral decay: {e1} -> {e2}");
}

#[test]
fn volume_is_conserved_along_flow() {
    let grid = grid96();
    let w0 = generic_weight(&grid);
    let s = MeasureSetting::sminus_calibrated(&grid, 1);
    let traj = flow_solve(&grid, &w0, &s, 1.0, &quick_ctrl()).unwrap();
    for t in [0.0, 0.33, 0.77, 1.0] {
        let w = traj.dense_output(&grid, t).unwrap();
        let ma = ma_density(&grid, &w).unwrap();
        assert!((grid.integrate(&ma).unwrap() - 1.0).abs() < 1e-11);
    }
}

#[test]
fn second_time_derivative_checks() {
    let grid = grid96();
    // stationary trajectory: identically zero
    let round = Weight::reference(&grid, 1);
    let sm = MeasureSetting::sminus_calibrated(&grid, 1);
    let traj = flow_solve(&grid, &round, &sm, 0.5, &quick_ctrl()).unwrap();
    assert!(second_time_derivative(&grid, &traj, 0.2).unwrap().sup_norm() < 1e-9);

    // t = 0 in the fixed-measure setting: Δ_φ log(MA/μ) by the chain rule
    let w0 = generic_weight(&grid);
    let s0 = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let traj0 = flow_solve(&grid, &w0, &s0, 0.5, &quick_ctrl()).unwrap();
    let got = second_time_derivative(&grid, &traj0, 0.0).unwrap();
    let cache = FlowRhsCache::build(&grid, &traj0.dense_output(&grid, 0.0).unwrap(), &s0).unwrap();
    let expect = laplacian_phi(&grid, &traj0.dense_output(&grid, 0.0).unwrap(), &cache.log_ratio().unwrap()).unwrap();
    assert!(got.sub(&expect).unwrap().sup_norm() < 1e-9);

    // centered finite differences of ψ̇ in t
    let fd_check = |traj: &FlowTrajectory, t: f64| {
        let h = 1e-4;
        let dp = traj.psi_dot_at(&grid, t + h).unwrap();
        let dm = traj.psi_dot_at(&grid, t - h).unwrap();
        let fd = dp.zip_map(&dm, |a, b| (a - b) / (2.0 * h)).unwrap();
        let got = second_time_derivative(&grid, traj, t).unwrap();
        let denom = got.sup_norm().max(1e-6);
        let rel = got.sub(&fd).unwrap().sup_norm() / denom;
        assert!(rel < 1e-5, "relative φ̈ defect {rel} at t={t}");
    };
    fd_check(&traj0, 0.1);
    fd_check(&traj0, 0.31);

    let sp = MeasureSetting::splus_default(&grid, 1);
    let trajp = flow_solve(&grid, &w0, &sp, 0.5, &quick_ctrl()).unwrap();
    fd_check(&trajp, 0.17);
}

#[test]
fn two_solution_contraction_rates() {
    let grid = GridP1::invariant(64);
    let ctrl = FlowCtrl { band_limit: 32, ..quick_ctrl() };
    let mut rng = rng_from_seed(23);

    // fixed measure: sup-distance never increases
    let s0 = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    for _ in 0..10 {
        let a = random_weight(&grid, &mut rng, 1, 4, 0.35);
        let b = random_weight(&grid, &mut rng, 1, 4, 0.35);
        let ta = flow_solve(&grid, &a, &s0, 0.5, &ctrl).unwrap();
        let tb = flow_solve(&grid, &b, &s0, 0.5, &ctrl).unwrap();
        let d0 = sup_distance(&a, &b).unwrap();
        let mut prev = d0 + 1e-12;
        for t in [0.1, 0.25, 0.5] {
            let dt = sup_distance(
                &ta.dense_output(&grid, t).unwrap(),
                &tb.dense_output(&grid, t).unwrap(),
            )
            .unwrap();
            assert!(dt <= prev + 1e-10, "distance grew: {dt} > {prev}");
            prev = dt + 1e-12;
        }
    }

    // canonical settings: constant-offset pairs evolve exactly like e^{∓t},
    // and a mild field perturbation keeps the rate within 5% at t = 1
    for (setting, sign) in [
        (MeasureSetting::splus_default(&grid, 1), -1.0f64),
        (MeasureSetting::sminus_calibrated(&grid, 1), 1.0f64),
    ] {
        let a = random_weight(&grid, &mut rng, 1, 4, 0.3);
        let c = 0.2;
        let b = a.add_constant(c);
        let ta = flow_solve(&grid, &a, &setting, 1.0, &ctrl).unwrap();
        let tb = flow_solve(&grid, &b, &setting, 1.0, &ctrl).unwrap();
        let d1 = sup_distance(
            &ta.dense_output(&grid, 1.0).unwrap(),
            &tb.dense_output(&grid, 1.0).unwrap(),
        )
        .unwrap();
        let rate = d1 / c;
        let expect = (sign * 1.0f64).exp();
        assert!((rate / expect - 1.0).abs() < 1e-9, "gauge channel is exact: {rate} vs {expect}");

        // mostly-constant perturbation: observed rate within 5%
        let eps = grid.field_from_modes(&[Mode { l: 2, m: 0, c: 0.002 }]).unwrap();
        let b2 = Weight::new(&grid, 1, a.psi().add(&eps).unwrap(), 0.1).unwrap();
        let tb2 = flow_solve(&grid, &b2, &setting, 1.0, &ctrl).unwrap();
        let d0 = sup_distance(&a, &b2).unwrap();
        let d1 = sup_distance(
            &ta.dense_output(&grid, 1.0).unwrap(),
            &tb2.dense_output(&grid, 1.0).unwrap(),
        )
        .unwrap();
        let rate = d1 / d0;
        assert!(
            (rate / expect - 1.0).abs() < 0.05,
            "two-solution rate {rate} vs e^{{∓t}} = {expect}"
        );
    }
}

#[test]
fn horizon_and_positivity_guards() {
    let grid = GridP1::invariant(48);
    let w0 = Weight::reference(&grid, 1);
    let s = MeasureSetting::s0_from_ma(&grid, &w0).unwrap();
    assert!(matches!(
        flow_solve(&grid, &w0, &s, 3.0, &quick_ctrl()),
        Err(Error::OutOfHorizon { .. })
    ));
}
