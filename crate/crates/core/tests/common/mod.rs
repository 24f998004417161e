#![allow(dead_code)]

use krausim::lindblad::{LindbladOperator, LindbladSystem};
use krausim::tensor::{ComplexMatrix, C64};
use rand::Rng;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let a = random_matrix(rng, d, d);
    (&a + &a.adjoint()).scale_real(0.5)
}

pub fn random_density(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let a = random_matrix(rng, d, d);
    let p = a.matmul(&a.adjoint());
    let tr = p.trace().re;
    p.scale_real(1.0 / tr)
}

pub fn random_system(rng: &mut impl Rng, d: usize, n_ops: usize) -> LindbladSystem {
    let ops = (0..n_ops).map(|_| LindbladOperator::new(random_matrix(rng, d, d), rng.gen_range(0.0..2.0))).collect();
    LindbladSystem::new(random_hermitian(rng, d), ops, rng.gen_range(0.5..2.0)).unwrap()
}

/// `−(i/ħ)[H, ρ] + Σ γ (LρL† − ½{L†L, ρ})` written out term by term.
pub fn master_rhs(sys: &LindbladSystem, rho: &ComplexMatrix) -> ComplexMatrix {
    let h = sys.hamiltonian();
    let comm = &h.matmul(rho) - &rho.matmul(h);
    let mut out = comm.scale(C64::new(0.0, -1.0 / sys.hbar()));
    for l in sys.lindblads() {
        let op = &l.operator;
        let ldl = op.adjoint().matmul(op);
        let jump = op.matmul(rho).matmul(&op.adjoint());
        let anti = &ldl.matmul(rho) + &rho.matmul(&ldl);
        out = &out + &(&jump - &anti.scale_real(0.5)).scale_real(l.rate);
    }
    out
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

pub fn plus_state() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap()
}

/// Single-qubit dephasing `L = Z` at rate `gamma` with `H = 0`.
pub fn dephasing(gamma: f64) -> LindbladSystem {
    LindbladSystem::with_unit_hbar(ComplexMatrix::zeros(2, 2), vec![LindbladOperator::new(pauli_z(), gamma)]).unwrap()
}
