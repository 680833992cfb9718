use landau_lab::decay::*;
use landau_lab::Error;

fn synthetic(rate: f64, amp: f64, dh: f64, n: usize, t_end: f64) -> Trajectory {
    Trajectory::from_hd((0..=n).map(|k| {
        let t = t_end * k as f64 / n as f64;
        let h = amp * (-rate * t).exp();
        (t, h, dh * h)
    }))
    .unwrap()
}

#[test]
fn envelope_is_continuous_and_decreasing() {
    let h = DecayHypothesis::new(0.5, 0.2, 1.5).unwrap();
    let onset = h.onset();
    assert_eq!(onset, 3.0);
    assert!((envelope(&h, onset) - 1.5).abs() < 1e-15);
    assert!((envelope(&h, onset - 1e-12) - envelope(&h, onset)).abs() < 1e-12);
    let mut last = f64::INFINITY;
    for k in 0..50 {
        let e = envelope(&h, onset + 0.3 * k as f64);
        assert!(e < last);
        last = e;
    }
    let unit = DecayHypothesis::new(1.0, 1.0, 1.0).unwrap();
    assert!((envelope(&unit, 1.0) - 1.0).abs() < 1e-15);
}

#[test]
fn hypothesis_equality_case() {
    let traj = synthetic(1.0, 1.0, 1.0, 50, 5.0);
    let hyp = DecayHypothesis::new(1.0, 1.0, 1.0).unwrap();
    let r = verify_hypothesis(&traj, &hyp, 0.0);
    assert_eq!(r.checked, 51);
    assert!(r.passed());
}

#[test]
fn hypothesis_too_fast_rate_violates_everywhere() {
    let traj = synthetic(1.0, 1.0, 1.0, 50, 5.0);
    let hyp = DecayHypothesis::new(1.0, 2.0, 1.0).unwrap();
    let r = verify_hypothesis(&traj, &hyp, 0.0);
    assert_eq!(r.violations.len(), r.checked);
    assert_eq!(r.checked, 51);
}

#[test]
fn envelope_passes_on_the_exact_case() {
    let traj = synthetic(1.0, 1.0, 1.0, 100, 6.0);
    let hyp = DecayHypothesis::new(1.0, 1.0, 1.0).unwrap();
    let r = verify_envelope(&traj, &hyp, 1e-14);
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.onset, 1.0);
    assert!(r.checked > 0);
}

#[test]
fn corrupted_trajectory_flags_monotonicity() {
    let mut traj = synthetic(0.5, 1.0, 0.5, 20, 4.0);
    traj.samples[7].h = traj.samples[6].h * 1.01;
    let hyp = DecayHypothesis::new(1.0, 0.1, 1.0).unwrap();
    let r = verify_envelope(&traj, &hyp, 1e-12);
    assert_eq!(r.monotonicity_violations.len(), 1);
    assert_eq!(r.monotonicity_violations[0].index, 7);
    assert!(!r.passed());
}

#[test]
fn rate_constants() {
    let r = landau_rate_constants(1.0, 2.0).unwrap();
    assert!((r.q - 0.062).abs() < 1e-15);
    assert!((r.c0 - 0.01).abs() < 1e-15);
    assert_eq!(r.q_decay_gate, 0.22);
    let d = landau_rate_constants(2.0, 2.0).unwrap();
    assert!((d.q - r.q / 4.0).abs() < 1e-16 && (d.c0 - r.c0 / 4.0).abs() < 1e-16);
    assert!(matches!(landau_rate_constants(1.0, 0.0), Err(Error::Precondition(_))));
    assert!(landau_rate_constants(0.0, 2.0).is_err());
    assert_eq!(DEFAULT_C1, 2.0);
}

#[test]
fn fitted_rates() {
    let a = synthetic(2.0, 1.0, 2.0, 40, 3.0);
    assert!((fit_rate(&a, (0.0, 3.0)).unwrap() - 2.0).abs() < 1e-12);
    let b = synthetic(0.3, 5.0, 0.3, 40, 10.0);
    assert!((fit_rate(&b, (2.0, 8.0)).unwrap() - 0.3).abs() < 1e-12);
    let mut c = synthetic(1.0, 1.0, 1.0, 10, 1.0);
    c.samples[5].h = 0.0;
    assert!(fit_rate(&c, (0.0, 1.0)).is_err());
    assert!(fit_rate(&a, (10.0, 11.0)).is_err());
}

#[test]
fn late_rate_stops_at_the_noise_floor() {
    // Exponential decay to 1e-14 relative, then flat rounding noise.
    let mut pts: Vec<(f64, f64, f64)> = (0..=60)
        .map(|k| {
            let t = 0.5 * k as f64;
            let h = (1e-2 * (-1.1 * t).exp()).max(1e-16);
            (t, h, 1.1 * h)
        })
        .collect();
    pts.iter_mut().skip(40).for_each(|p| p.1 = 1e-16);
    let traj = Trajectory::from_hd(pts).unwrap();
    let rate = fit_late_rate(&traj, NOISE_FLOOR).unwrap();
    assert!((rate - 1.1).abs() < 1e-9, "{rate}");
}

#[test]
fn verify_decay_absorbs_noise_at_the_floor() {
    let h0 = 1e-3;
    let mut pts: Vec<(f64, f64, f64)> = (0..=40)
        .map(|k| {
            let t = 0.5 * k as f64;
            (t, h0 * (-0.8 * t).exp(), 0.8 * h0 * (-0.8 * t).exp())
        })
        .collect();
    // Late samples wander at the rounding level of a unit-mass entropy sum.
    for (k, p) in pts.iter_mut().enumerate().skip(30) {
        p.1 = 1e-14 * (1.0 + (k % 3) as f64);
        p.2 = 0.0;
    }
    let traj = Trajectory::from_hd(pts).unwrap();
    let hyp = DecayHypothesis::new(1.0, 0.1, h0).unwrap();
    assert!(!verify_hypothesis(&traj, &hyp, 0.0).passed());
    let report = verify_decay(&traj, &hyp, NOISE_FLOOR);
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.h_tol, NOISE_FLOOR);

    // Equilibrium start: H0 itself is rounding noise.
    let flat = Trajectory::from_hd((0..10).map(|k| (k as f64, 1e-30 * (1.0 + (k % 2) as f64), 0.0))).unwrap();
    let hyp = DecayHypothesis::new(1e-3, 1e-4, 1e-30).unwrap();
    assert!(verify_decay(&flat, &hyp, NOISE_FLOOR).passed());
}

#[test]
fn invalid_trajectories_are_rejected() {
    assert!(Trajectory::from_hd([(0.0, 1.0, 1.0), (0.0, 0.5, 0.5)]).is_err());
    assert!(Trajectory::from_hd([(0.0, -1.0, 1.0)]).is_err());
    assert!(DecayHypothesis::new(-1.0, 1.0, 1.0).is_err());
    assert!(DecayHypothesis::new(1.0, 1.0, -1.0).is_err());
}

#[test]
fn time_translation() {
    let traj = synthetic(1.0, 1.0, 1.0, 20, 2.0);
    let shifted = traj.reindexed_from(1.0);
    assert_eq!(shifted.samples[0].t, 0.0);
    assert_eq!(shifted.len(), 11);
    assert!((shifted.samples[0].h - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn csv_round_trip() {
    let mut traj = synthetic(0.7, 0.1, 0.7, 12, 3.0);
    for (k, s) in traj.samples.iter_mut().enumerate() {
        s.l2q6 = 0.3 + 1e-3 * k as f64;
        s.min_f = 1e-9;
    }
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert!(header.starts_with("t,H,D,mass,momentum_norm,energy,min_f"));
    let back = Trajectory::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, traj);
    assert!((back.sup_l2q6() - 0.312).abs() < 1e-15);
}
