use hpid::metrics::{
    compare, iavc, iavc_samples, itae, itae_samples, ivc, ivc_samples, l2_norm, pointwise_norm, MetricsReport,
    Signal,
};
use hpid::plant::JointPlantConfig;
use hpid::sim::{simulate, ControllerKind, Scenario, Trajectory};

fn grid(t_end: f64, h: f64) -> Vec<f64> {
    let n = (t_end / h).round() as usize;
    (0..=n).map(|k| k as f64 * h).collect()
}

/// A joint-plant trajectory whose signals are replaced by `f(t)` per channel.
fn synthetic(n_joints: usize, h: f64, u: impl Fn(f64, usize) -> f64, eps: impl Fn(f64, usize) -> f64) -> Trajectory {
    let scn = Scenario::joints("synthetic", ControllerKind::Pid, JointPlantConfig::desk_scale(n_joints, 0.0))
        .with_grid(9.0, h);
    let times = grid(9.0, h);
    Trajectory {
        controls: times.iter().map(|&t| (0..n_joints).map(|j| u(t, j)).collect()).collect(),
        errors: times.iter().map(|&t| (0..n_joints).map(|j| eps(t, j)).collect()).collect(),
        states: times.iter().map(|_| vec![0.0; 3 * n_joints]).collect(),
        outputs: times.iter().map(|_| vec![0.0; n_joints]).collect(),
        times,
        scenario: scn,
    }
}

#[test]
fn ivc_of_sine_matches_closed_form() {
    // ∫₀⁹ |cos t| dt = 1 + 2 + 2 + (1 - sin 9)
    let exact = 6.0 - 9.0f64.sin();
    let traj = synthetic(1, 1e-3, |t, _| t.sin(), |_, _| 0.0);
    assert!((ivc(&traj, 0).unwrap() - exact).abs() <= 1e-4);
}

#[test]
fn itae_of_decaying_exponential_matches_closed_form() {
    // ∫₀⁹ t e^{-t} dt = 1 - 10 e^{-9}
    let exact = 1.0 - 10.0 * (-9.0f64).exp();
    let traj = synthetic(1, 1e-3, |_, _| 0.0, |t, _| (-t).exp());
    assert!((itae(&traj, 0).unwrap() - exact).abs() <= 1e-6);
}

#[test]
fn l2_norm_of_unit_controls_on_six_joints() {
    let traj = synthetic(6, 1e-3, |_, _| 1.0, |_, _| 0.0);
    assert!((l2_norm(&traj, Signal::Control).unwrap() - 54.0f64.sqrt()).abs() <= 1e-9);
    assert_eq!(l2_norm(&traj, Signal::Error).unwrap(), 0.0);
}

#[test]
fn pointwise_norm_examples() {
    let traj = synthetic(6, 1e-2, |t, j| if t == 0.0 { [3.0, 4.0, 0.0, 0.0, 0.0, 0.0][j] } else { 0.0 }, |_, _| 0.0);
    assert_eq!(pointwise_norm(&traj, Signal::Control, 0).unwrap(), 5.0);
    assert_eq!(pointwise_norm(&traj, Signal::Control, 1).unwrap(), 0.0);
    assert!(pointwise_norm(&traj, Signal::Control, traj.len()).is_err());
}

#[test]
fn pointwise_and_l2_norms_are_consistent() {
    let traj = synthetic(6, 1e-3, |t, j| (t * (j + 1) as f64).sin(), |t, j| (-(j as f64) * t).exp());
    for signal in [Signal::Control, Signal::Error] {
        let h = traj.step();
        let sq: Vec<f64> = (0..traj.len()).map(|k| pointwise_norm(&traj, signal, k).unwrap().powi(2)).collect();
        let trap: f64 = sq.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let l2 = l2_norm(&traj, signal).unwrap();
        assert!((trap - l2 * l2).abs() <= 1e-9 * l2 * l2);
    }
}

#[test]
fn indices_are_additive_over_a_time_partition() {
    let times = grid(9.0, 1e-3);
    let u: Vec<f64> = times.iter().map(|t| (2.0 * t).sin() + 0.3 * t).collect();
    let mid = times.len() / 2;
    let (t1, t2) = (&times[..=mid], &times[mid..]);
    let (u1, u2) = (&u[..=mid], &u[mid..]);
    let check = |whole: f64, a: f64, b: f64| assert!((whole - (a + b)).abs() <= 1e-9 * whole.abs());
    check(ivc_samples(&times, &u).unwrap(), ivc_samples(t1, u1).unwrap(), ivc_samples(t2, u2).unwrap());
    check(iavc_samples(&times, &u).unwrap(), iavc_samples(t1, u1).unwrap(), iavc_samples(t2, u2).unwrap());
    check(itae_samples(&times, &u).unwrap(), itae_samples(t1, u1).unwrap(), itae_samples(t2, u2).unwrap());
}

#[test]
fn grid_refinement_changes_indices_little() {
    let run = |h: f64| {
        let pid = simulate(&Scenario::joints("pid", ControllerKind::Pid, JointPlantConfig::desk_scale(6, -0.2)).with_grid(9.0, h)).unwrap();
        let hpid = simulate(&Scenario::joints("hpid", ControllerKind::Hpid, JointPlantConfig::desk_scale(6, -0.2)).with_grid(9.0, h)).unwrap();
        compare(&pid, &hpid).unwrap()
    };
    let (coarse, fine) = (run(2e-3), run(1e-3));
    for (a, b) in coarse.joints.iter().zip(&fine.joints) {
        for (x, y) in [(a.ivc, b.ivc), (a.iavc, b.iavc), (a.itae, b.itae)] {
            assert!((x.pid - y.pid).abs() <= 0.005 * y.pid, "{x:?} vs {y:?}");
            assert!((x.hpid - y.hpid).abs() <= 0.005 * y.hpid, "{x:?} vs {y:?}");
        }
    }
}

#[test]
fn self_comparison_gives_equal_columns() {
    let traj = simulate(&Scenario::joints("pid", ControllerKind::Pid, JointPlantConfig::desk_scale(6, 0.0)).with_grid(2.0, 1e-3)).unwrap();
    let report = compare(&traj, &traj).unwrap();
    assert!(report.all_finite_nonnegative());
    for j in &report.joints {
        assert_eq!(j.ivc.pid, j.ivc.hpid);
        assert_eq!(j.iavc.pid, j.iavc.hpid);
        assert_eq!(j.itae.pid, j.itae.hpid);
    }
    assert_eq!(iavc(&traj, 0).unwrap(), report.joints[0].iavc.pid);
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = simulate(&Scenario::joints("a", ControllerKind::Pid, JointPlantConfig::desk_scale(2, 0.0)).with_grid(1.0, 1e-2)).unwrap();
    let b = simulate(&Scenario::joints("b", ControllerKind::Pid, JointPlantConfig::desk_scale(2, 0.0)).with_grid(1.0, 5e-3)).unwrap();
    assert!(compare(&a, &b).is_err());
}

#[test]
fn zero_signals_give_zero_indices() {
    let traj = synthetic(2, 1e-2, |_, _| 0.0, |_, _| 0.0);
    assert_eq!(ivc(&traj, 1).unwrap(), 0.0);
    assert_eq!(iavc(&traj, 1).unwrap(), 0.0);
    assert_eq!(itae(&traj, 1).unwrap(), 0.0);
    assert!(ivc(&traj, 2).is_err());
}

#[test]
fn fixture_is_marked_precomputed() {
    let fixture = MetricsReport::table1_fixture();
    assert!(fixture.precomputed);
    assert_eq!(fixture.joints.len(), 6);
    assert!(fixture.summary().contains("precomputed"));
}
