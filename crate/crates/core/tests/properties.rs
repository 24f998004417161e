mod common;

use common::*;
use krausim::circuit::{qn_apply_counted, Gate, PauliAxis};
use krausim::lindblad::{build_superoperators, exact_propagator, propagate};
use krausim::pauli::{error_probabilities, PauliString};
use krausim::statevector::StateVector;
use krausim::tensor::{apply_superop, conj_kron, ComplexMatrix, KronMode, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    let mask = (1u64 << n) - 1;
    (any::<u64>(), any::<u64>(), 0u8..4).prop_map(move |(x, z, p)| PauliString::new(n, x & mask, z & mask, p).unwrap())
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    let axis = prop_oneof![Just(PauliAxis::X), Just(PauliAxis::Y), Just(PauliAxis::Z)];
    prop_oneof![
        (axis, 0..n).prop_map(|(axis, qubit)| Gate::Pauli { axis, qubit }),
        (-10.0..10.0f64, 0..n).prop_map(|(theta, qubit)| Gate::Phase { theta, qubit }),
        (-10.0..10.0f64, 0..n, 1..n).prop_map(move |(beta, target, off)| Gate::ControlledRy {
            beta,
            controls: vec![(target + off) % n],
            target
        }),
        (-10.0..10.0f64, 0..n, 1..n).prop_map(move |(theta, target, off)| Gate::ControlledPhase {
            theta,
            controls: vec![(target + off) % n],
            target
        }),
    ]
}

proptest! {
    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), gates in prop::collection::vec(gate(4), 1..12)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_matrix(&mut rng, 16, 1);
        let norm = (0..16).map(|i| v[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        let mut state = StateVector::from_amplitudes((0..16).map(|i| v[(i, 0)] / norm).collect()).unwrap();
        for g in &gates {
            state.apply_gate(g).unwrap();
        }
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_probabilities_form_a_distribution(
        gamma in prop::collection::vec(0.0..5.0f64, 1..8),
        t in 0.0..20.0f64,
    ) {
        let p = error_probabilities(&gamma, t).unwrap();
        prop_assert_eq!(p.len(), 1 << gamma.len());
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_product_matches_matrices(a in pauli_string(3), b in pauli_string(3)) {
        let product = a.multiply(&b).unwrap();
        prop_assert_eq!(product.to_matrix(), a.to_matrix().matmul(&b.to_matrix()));
    }

    #[test]
    fn pauli_text_round_trip(a in pauli_string(5)) {
        let back: PauliString = a.to_string().parse().unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn conjugate_pair_squares_to_identity(a in pauli_string(2)) {
        let pair = conj_kron(&a.to_matrix(), KronMode::Product).unwrap();
        prop_assert_eq!(pair.matmul(&pair), ComplexMatrix::identity(16));
    }

    #[test]
    fn fast_transform_is_linear(
        n in 1usize..7,
        seed in any::<u64>(),
        a in -50i64..50,
        b in -50i64..50,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<i64> = (0..1 << n).map(|_| rng.gen_range(-1000..1000)).collect();
        let v: Vec<i64> = (0..1 << n).map(|_| rng.gen_range(-1000..1000)).collect();
        let mix: Vec<i64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (qu, _) = qn_apply_counted(&u, n).unwrap();
        let (qv, _) = qn_apply_counted(&v, n).unwrap();
        let (qm, _) = qn_apply_counted(&mix, n).unwrap();
        let expected: Vec<i64> = qu.iter().zip(&qv).map(|(x, y)| a * x + b * y).collect();
        prop_assert_eq!(qm, expected);
    }

    #[test]
    fn generator_is_trace_free_and_hermiticity_preserving(seed in any::<u64>(), d in 2usize..5, ops in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, d, ops);
        let rho = random_density(&mut rng, d);
        let out = apply_superop(&build_superoperators(&sys).generator(), &rho).unwrap();
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!(out.max_diff(&out.adjoint()) < 1e-12);
    }

    #[test]
    fn evolution_keeps_states_physical(seed in any::<u64>(), d in 2usize..4, t in 0.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, d, 2);
        let rho = random_density(&mut rng, d);
        let out = propagate(&exact_propagator(&sys, t).unwrap(), &rho).unwrap();
        prop_assert!((out.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
        prop_assert!(out.max_diff(&out.adjoint()) < 1e-10);
        prop_assert!(out.eigh().unwrap().0.iter().all(|&e| e > -1e-10));
    }
}
