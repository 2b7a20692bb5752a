use nmss_core::feedback::{
    effective_decay_rate, markov_limit_unitary, simulate, simulate_from, step_unitary, NumericsParams, SystemParams,
};
use nmss_core::lindblad::{steady_state, MarkovParams};
use nmss_core::measures::trace_distance;
use nmss_core::tensors::ComplexMatrix;
use nmss_core::{FeedbackError, QubitDensityMatrix, C64};
use proptest::prelude::*;

fn with_dt(dt: f64) -> NumericsParams {
    NumericsParams { dt: Some(dt), ..Default::default() }
}

fn basis(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

#[test]
fn zero_generator_gives_identity() {
    let sp = SystemParams { omega: 0.0, delta: 0.0, phi: 0.3, tau: 0.5, gamma_l: 0.0, gamma_r: 0.0 };
    let u = step_unitary(&sp, &with_dt(0.01)).unwrap();
    assert!(u.sub(&ComplexMatrix::identity(18)).unwrap().max_abs() < 1e-14);
    // Simulations still need a coupled emitter.
    assert!(matches!(simulate(&sp, &with_dt(0.01), 1), Err(FeedbackError::InvalidSystem(_))));
}

#[test]
fn leading_order_emission_amplitude() {
    let d = 3;
    let dims = [2, d, d];
    for dt in [1e-2, 1e-3, 1e-4] {
        let sp = SystemParams { omega: 1.0, delta: 0.0, phi: 0.4, tau: 100.0 * dt, gamma_l: 0.7, gamma_r: 0.3 };
        let u = step_unitary(&sp, &with_dt(dt)).unwrap();
        let amp = u[(basis(&dims, &[0, 1, 0]), basis(&dims, &[1, 0, 0]))];
        let err = (amp - C64::new((0.7 * dt).sqrt(), 0.0)).norm();
        assert!(err < 2.0 * dt.powf(1.5), "dt = {dt}: error {err}");
        let delayed = u[(basis(&dims, &[0, 0, 1]), basis(&dims, &[1, 0, 0]))];
        let err = (delayed - C64::from_polar((0.3 * dt).sqrt(), 0.4)).norm();
        assert!(err < 2.0 * dt.powf(1.5), "dt = {dt}: error {err}");
    }
}

#[test]
fn opposite_phase_mirror_decouples_in_markov_limit() {
    let sp = SystemParams { omega: 0.0, delta: 0.0, phi: std::f64::consts::PI, tau: 0.0, gamma_l: 0.5, gamma_r: 0.5 };
    let u = markov_limit_unitary(&sp, &with_dt(0.01)).unwrap();
    assert!(u.unitarity_residual() < 1e-10);
    let e0 = basis(&[2, 3], &[1, 0]);
    assert!((u[(e0, e0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
}

#[test]
fn undriven_ground_state_stays_dark() {
    let sp = SystemParams::symmetric(1.0, 0.0, 0.0, 0.5);
    let np = NumericsParams { t_max: 5.0, ..Default::default() };
    let tr = simulate(&sp, &np, 1).unwrap();
    assert!(tr.tls_states.iter().all(|s| trace_distance(s, &QubitDensityMatrix::ground()) < 1e-14));
    assert!(tr.out_bin_population.iter().all(|&p| p.abs() < 1e-14));
    assert!(tr.norm_history.iter().all(|n| (n - 1.0).abs() < 1e-12));
    assert_eq!(tr.max_bond, 1);
}

#[test]
fn feedback_is_causal() {
    // Until the first round trip completes the emitter decays as in free
    // space at the total rate γ_L + γ_R; the returning field changes that.
    let (gamma, tau, dt) = (1.0, 1.0, 0.0025);
    let sp = SystemParams::symmetric(gamma, 0.0, 0.0, tau);
    let np = NumericsParams { t_max: 2.0, ..with_dt(dt) };
    let tr = simulate_from(&sp, &np, &QubitDensityMatrix::excited(), 1).unwrap();
    let k = (tau / dt).round() as usize;
    for (t, s) in tr.times.iter().zip(&tr.tls_states).take(k) {
        assert!((s.rho_ee() - (-gamma * t).exp()).abs() < 5e-3 * (-gamma * t).exp(), "t = {t}");
    }
    let late = tr.tls_states[2 * k - 1].rho_ee();
    assert!((late - (-gamma * 2.0 * tau).exp()).abs() > 1e-2, "feedback had no effect: {late}");
    // Output bins carry only right-going emission before the round trip.
    for (n, s) in tr.tls_states.iter().enumerate().take(k - 1).skip(1) {
        let expected = 0.5 * gamma * dt * s.rho_ee();
        assert!((tr.out_bin_population[n + 1] - expected).abs() < 0.05 * expected, "step {n}");
    }
}

#[test]
fn markov_limit_matches_lindblad() {
    let sp = SystemParams::symmetric(1.0, 1.0, 0.0, 0.0);
    let np = NumericsParams { d_max: 16, ..with_dt(0.005) };
    let tr = simulate(&sp, &np, 100).unwrap();
    assert!(tr.converged);
    let oracle = steady_state(&MarkovParams::resonant(2.0, 0.0, 1.0)).unwrap();
    assert!(trace_distance(&tr.ss_state, &oracle) < 0.02);
}

#[test]
fn markov_limit_decay_rate_is_doubled() {
    let sp = SystemParams::symmetric(1.0, 0.1, 0.0, 0.0);
    let g = effective_decay_rate(&sp, &with_dt(0.005)).unwrap();
    assert!((g - 2.0).abs() < 0.1, "{g}");
    let dark = SystemParams::symmetric(1.0, 0.0, 0.0, 0.5);
    assert!(matches!(effective_decay_rate(&dark, &NumericsParams::default()), Err(FeedbackError::UndefinedRate(_))));
}

fn fixed_horizon(dt: f64, t_max: f64) -> NumericsParams {
    NumericsParams { dt: Some(dt), t_max, stop_at_convergence: false, ss_window: Some(5.0), ..Default::default() }
}

#[test]
fn short_delays_approach_markov_limit() {
    let omega = 1.0;
    let np = fixed_horizon(0.025, 30.0);
    let reference = simulate(&SystemParams::symmetric(1.0, omega, 0.0, 0.0), &np, 40).unwrap().ss_state;
    let distances: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&tau| {
            let ss = simulate(&SystemParams::symmetric(1.0, omega, 0.0, tau), &np, 40).unwrap().ss_state;
            trace_distance(&ss, &reference)
        })
        .collect();
    assert!(distances[0] > distances[1] && distances[1] > distances[2], "{distances:?}");
}

#[test]
fn halving_dt_is_within_discretization_tolerance() {
    let sp = SystemParams::symmetric(1.0, 1.0, 0.0, 0.25);
    let coarse = simulate(&sp, &fixed_horizon(0.025, 30.0), 40).unwrap().ss_state;
    let fine = simulate(&sp, &fixed_horizon(0.0125, 30.0), 80).unwrap().ss_state;
    assert!(trace_distance(&coarse, &fine) < 0.02);
}

#[test]
fn larger_bin_space_and_bond_change_little() {
    let sp = SystemParams::symmetric(1.0, 1.0, 0.0, 0.5);
    let base = NumericsParams { d_max: 16, ..fixed_horizon(0.025, 30.0) };
    let big = NumericsParams { d_bin: 4, d_max: 32, ..base };
    let a = simulate(&sp, &base, 40).unwrap();
    let b = simulate(&sp, &big, 40).unwrap();
    let diff = (0..3).map(|i| (a.ss_state.bloch()[i] - b.ss_state.bloch()[i]).abs()).fold(0.0, f64::max);
    assert!(diff < base.ss_tol, "{diff}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_unitary_is_unitary(
        omega in 0.0f64..4.0, delta in -2.0f64..2.0, phi in -3.2f64..3.2,
        gl in 0.0f64..1.0, gr in 0.01f64..1.0, k in 1usize..50, d in 2usize..5,
    ) {
        let sp = SystemParams { omega, delta, phi, tau: 0.01 * k as f64, gamma_l: gl, gamma_r: gr };
        let np = NumericsParams { d_bin: d, ..with_dt(0.01) };
        prop_assert!(step_unitary(&sp, &np).unwrap().unitarity_residual() < 1e-10);
        let sp0 = SystemParams { tau: 0.0, ..sp };
        prop_assert!(markov_limit_unitary(&sp0, &np).unwrap().unitarity_residual() < 1e-10);
    }

    #[test]
    fn norm_drift_is_bounded_by_discarded_weight(
        omega in 0.2f64..3.0, k in 1usize..12, phi in -3.2f64..3.2, d_max in 1usize..6,
    ) {
        let sp = SystemParams::symmetric(1.0, omega, phi, 0.05 * k as f64);
        let np = NumericsParams { d_max, t_max: 4.0, stop_at_convergence: false, ..with_dt(0.05 / omega.max(1.0)) };
        let sp = SystemParams { tau: np.dt.unwrap() * k as f64, ..sp };
        let tr = simulate(&sp, &np, 1).unwrap();
        let bound = 10.0 * tr.cum_discarded + 1e-8;
        for n in &tr.norm_history {
            prop_assert!((n - 1.0).abs() <= bound, "norm {} bound {}", n, bound);
        }
        for s in &tr.tls_states {
            let [a, b] = s.eigenvalues();
            prop_assert!(a >= -1e-10 && b >= -1e-10);
        }
    }
}
