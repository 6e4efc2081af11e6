use darksteady::engine::{
    build_liouvillian, evolve, fidelity, physicality, random_density_matrix, steady_state, Integrator,
};
use darksteady::experiments::format_number;
use darksteady::linalg::{vec_norm, ComplexMatrix};
use darksteady::model::{self, SystemParams, Variant};
use darksteady::pulse::{apply_segment, dd_error, Axis, PulseSegment};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = SystemParams> {
    (0.2..3.0f64, 0.2..3.0f64, 0.5..4.0f64, 2.0..30.0f64, 5.0..60.0f64, prop::option::of(2.0..200.0f64)).prop_map(
        |(we, wn, g, e, gamma, t2)| SystemParams {
            omega_e: we,
            omega_n: wn,
            g,
            e_plus: e,
            e_minus: -e,
            gamma_plus: gamma,
            gamma_minus: gamma,
            gamma_zero: gamma,
            t2_star: t2,
            ..SystemParams::fig2()
        },
    )
}

fn liouvillian(p: &SystemParams) -> darksteady::engine::Liouvillian {
    build_liouvillian(&model::build_hamiltonian(p).unwrap(), &model::build_collapse_ops(p).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_hermitian(p in params()) {
        let h = model::build_hamiltonian(&p).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn balanced_drive_keeps_target_dark(p in params()) {
        let p = SystemParams { omega_n: p.omega_e, t2_star: None, ..p };
        let psi = model::target_states(Variant::SingleNucleus).target;
        let h = model::build_hamiltonian(&p).unwrap();
        prop_assert!(vec_norm(&h.matvec(&psi).unwrap()) < 1e-12);
        for c in model::build_collapse_ops(&p).unwrap() {
            prop_assert!(vec_norm(&c.matvec(&psi).unwrap()) == 0.0);
        }
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity(p in params(), seed in any::<u64>()) {
        let l = liouvillian(&p);
        let rho = random_density_matrix(p.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
        let d = l.apply(&rho).unwrap();
        prop_assert!(d.trace().norm() < 1e-9 * l.norm());
        prop_assert!(d.hermiticity_error() < 1e-10 * l.norm());
    }

    #[test]
    fn propagator_keeps_states_physical(p in params(), t in 0.01..5.0f64, seed in any::<u64>()) {
        let l = liouvillian(&p);
        let rho = random_density_matrix(p.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
        let traj = evolve(&l, &rho, t, t, Integrator::Propagator, None).unwrap();
        let ph = physicality(traj.last()).unwrap();
        prop_assert!(ph.trace_error < 1e-9);
        prop_assert!(ph.hermiticity_error < 1e-9);
        prop_assert!(ph.min_eigenvalue > -1e-9);
    }

    #[test]
    fn twelve_digit_format_round_trips(x in prop::num::f64::NORMAL) {
        let y: f64 = format_number(x).parse().unwrap();
        prop_assert!(((y - x) / x).abs() <= 5e-12, "{x} -> {y}");
    }

    #[test]
    fn decoupling_error_is_an_angle_deficit(g in 0.1..10.0f64, wn in 0.0..5.0f64, tau in 0.0..1.0f64) {
        let e = dd_error(g, wn, tau).unwrap();
        prop_assert!(e.abs() <= 1.0);
        prop_assert_eq!(dd_error(g, wn, 0.0).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn balanced_drive_has_unique_dark_steady_state(e in 3.0..30.0f64, w in 0.3..3.0f64) {
        let p = SystemParams::fig2().with_optical(e).with_drive(w);
        let (rho, cert) = steady_state(&liouvillian(&p)).unwrap();
        prop_assert_eq!(cert.null_count, 1);
        let f = fidelity(&rho, &model::target_states(Variant::SingleNucleus).target).unwrap();
        prop_assert!(f > 1.0 - 1e-9, "F = {f}");
    }

    #[test]
    fn pulse_segments_preserve_trace(seed in any::<u64>(), angle in 0.0..3.2f64, t in 0.0..20.0f64) {
        let p = SystemParams { t2_star: Some(20.0), ..SystemParams::pulsed() };
        let rho = random_density_matrix(p.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
        let segments = [
            PulseSegment::OpticalPump { duration: t / 10.0 },
            PulseSegment::ElectronRotation { angle, axis: Axis::X, duration: 0.01 },
            PulseSegment::NuclearRotation { angle, axis: Axis::Y, dd_interval: 0.01, duration: t },
            PulseSegment::FreeEvolution { duration: t },
            PulseSegment::Idle { duration: t },
        ];
        for seg in &segments {
            let out = apply_segment(&rho, seg, &p).unwrap();
            let ph = physicality(&out).unwrap();
            prop_assert!(ph.trace_error < 1e-9, "{seg:?}");
            prop_assert!(ph.min_eigenvalue > -1e-9, "{seg:?}");
        }
    }
}

#[test]
fn different_starts_reach_the_same_state() {
    let p = SystemParams::fig2();
    let l = liouvillian(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ends: Vec<ComplexMatrix> = (0..3)
        .map(|_| {
            let rho = random_density_matrix(p.dim(), &mut rng);
            evolve(&l, &rho, 200.0, 200.0, Integrator::Propagator, None).unwrap().last().clone()
        })
        .collect();
    assert!((&ends[0] - &ends[1]).norm_max() < 1e-8);
    assert!((&ends[0] - &ends[2]).norm_max() < 1e-8);
}

#[test]
fn fidelity_settles_monotonically() {
    let p = SystemParams::fig2();
    let l = liouvillian(&p);
    let psi = model::target_states(Variant::SingleNucleus).target;
    let rho0 = model::fully_mixed_ground(Variant::SingleNucleus);
    let traj = evolve(&l, &rho0, 60.0, 1.0, Integrator::Propagator, None).unwrap();
    let f = traj.fidelities(&psi).unwrap();
    let late = &f[20..];
    assert!(late.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{late:?}");
}
