//! Exact statevector execution of circuit IR.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Gate, PauliAxis};
use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, C64, I, STRUCTURE_TOL, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= 1 << n_qubits {
            return Err(Error::OutOfRange(format!("basis index {index} on {n_qubits} qubits")));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps amplitudes without normalizing; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = crate::circuit::log2_exact(amps.len())?;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Appends `extra` qubits in `|0⟩` above the existing ones.
    pub fn extend_zero(&self, extra: usize) -> Self {
        let mut amps = self.amps.clone();
        amps.resize(self.amps.len() << extra, ZERO);
        Self { n_qubits: self.n_qubits + extra, amps }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        apply_unchecked(&mut self.amps, gate);
        Ok(())
    }
}

/// Applies a validated gate to an amplitude buffer.
fn apply_unchecked(amps: &mut [C64], gate: &Gate) {
    match gate {
        Gate::Pauli { axis, qubit } => {
            let bit = 1 << qubit;
            match axis {
                PauliAxis::Z => amps.iter_mut().enumerate().filter(|(i, _)| i & bit != 0).for_each(|(_, a)| *a = -*a),
                PauliAxis::X | PauliAxis::Y => {
                    for i in 0..amps.len() {
                        if i & bit == 0 {
                            let (a0, a1) = (amps[i], amps[i | bit]);
                            if *axis == PauliAxis::X {
                                amps[i] = a1;
                                amps[i | bit] = a0;
                            } else {
                                amps[i] = -I * a1;
                                amps[i | bit] = I * a0;
                            }
                        }
                    }
                }
            }
        }
        Gate::Phase { theta, qubit } => phase_on_mask(amps, 1 << qubit, *theta),
        Gate::ControlledPhase { theta, controls, target } => {
            let mask = controls.iter().fold(1 << target, |m, q| m | 1 << q);
            phase_on_mask(amps, mask, *theta);
        }
        Gate::ControlledRy { beta, controls, target } => {
            let cmask = controls.iter().fold(0usize, |m, q| m | 1 << q);
            let bit = 1 << target;
            let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
            for i in 0..amps.len() {
                if i & bit == 0 && i & cmask == cmask {
                    let (a0, a1) = (amps[i], amps[i | bit]);
                    amps[i] = a0 * c - a1 * s;
                    amps[i | bit] = a0 * s + a1 * c;
                }
            }
        }
        Gate::OpaqueUnitary { matrix, qubits } => {
            for_each_block(amps, qubits, |block| {
                let out = matrix.apply(block);
                block.copy_from_slice(&out);
            });
        }
        Gate::Permutation { mapping, qubits } => {
            for_each_block(amps, qubits, |block| {
                let old = block.to_vec();
                for (x, &y) in mapping.iter().enumerate() {
                    block[y] = old[x];
                }
            });
        }
        Gate::StatePrep { amplitudes, qubits } => {
            let prep = Householder::new(amplitudes);
            for_each_block(amps, qubits, |block| prep.apply(block));
        }
    }
}

fn phase_on_mask(amps: &mut [C64], mask: usize, theta: f64) {
    let phase = C64::from_polar(1.0, -theta);
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *a *= phase;
        }
    }
}

/// Gathers the `2^k` amplitudes addressed by `qubits` for every setting of
/// the remaining bits, lets `f` transform them, and scatters them back.
fn for_each_block(amps: &mut [C64], qubits: &[usize], mut f: impl FnMut(&mut [C64])) {
    let k = qubits.len();
    let mask = qubits.iter().fold(0usize, |m, q| m | 1 << q);
    let offsets: Vec<usize> =
        (0..1usize << k).map(|x| (0..k).filter(|b| x >> b & 1 == 1).fold(0, |o, b| o | 1 << qubits[b])).collect();
    let mut block = vec![ZERO; 1 << k];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (slot, &off) in block.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        f(&mut block);
        for (slot, &off) in block.iter().zip(&offsets) {
            amps[base | off] = *slot;
        }
    }
}

/// Unitary `e^{iφ}(I − 2ww†/‖w‖²)` with `w = |0⟩ − e^{−iφ}ψ`, which maps
/// `|0⟩` to `ψ` where `φ = arg ψ_0`.
struct Householder {
    phase: C64,
    w: Vec<C64>,
    w_norm_sqr: f64,
}

impl Householder {
    fn new(psi: &[C64]) -> Self {
        let phase = if psi[0].norm() > 0.0 { psi[0] / psi[0].norm() } else { C64::new(1.0, 0.0) };
        let mut w: Vec<C64> = psi.iter().map(|a| -a * phase.conj()).collect();
        w[0] += 1.0;
        let w_norm_sqr = w.iter().map(|a| a.norm_sqr()).sum();
        Self { phase, w, w_norm_sqr }
    }

    fn apply(&self, v: &mut [C64]) {
        if self.w_norm_sqr > 1e-30 {
            let proj: C64 = self.w.iter().zip(v.iter()).map(|(w, x)| w.conj() * x).sum();
            let coef = proj * (2.0 / self.w_norm_sqr);
            for (x, w) in v.iter_mut().zip(&self.w) {
                *x -= coef * w;
            }
        }
        v.iter_mut().for_each(|x| *x *= self.phase);
    }
}

/// Runs every gate of the circuit on a copy of `input`.
pub fn run_circuit(c: &Circuit, input: &StateVector) -> Result<StateVector> {
    if input.n_qubits != c.total_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} qubits, circuit has {}",
            input.n_qubits,
            c.total_qubits()
        )));
    }
    c.validate()?;
    let mut state = input.clone();
    for g in &c.gates {
        apply_unchecked(&mut state.amps, g);
    }
    Ok(state)
}

/// Runs a circuit while projecting postselected ancillas onto `|0⟩` as soon
/// as their last gate has been applied.
///
/// `input` covers the system and preparation qubits; Sz.-Nagy ancillas start
/// in `|0⟩` and are allocated on first use. The returned (unnormalized)
/// state covers the system, preparation, and any unmasked ancilla qubits, in
/// that order. Its amplitudes equal those of the full run with every masked
/// ancilla read as `|0⟩`.
pub fn execute_filtered(c: &Circuit, input: &StateVector) -> Result<StateVector> {
    c.validate()?;
    let base_qubits = c.n_system + c.prep_qubits().len();
    if input.n_qubits != base_qubits {
        return Err(Error::DimensionMismatch(format!(
            "input has {} qubits, circuit needs {base_qubits}",
            input.n_qubits
        )));
    }
    let total = c.total_qubits();
    let mut last_use = vec![None; total];
    for (gi, g) in c.gates.iter().enumerate() {
        for q in g.qubits() {
            last_use[q] = Some(gi);
        }
    }
    // position[q] = bit position of circuit qubit q in the working buffer.
    let mut position: Vec<Option<usize>> = vec![None; total];
    let mut live: Vec<usize> = (0..base_qubits).collect();
    for (q, slot) in position.iter_mut().enumerate().take(base_qubits) {
        *slot = Some(q);
    }
    let mut amps = input.amps.clone();

    for (gi, g) in c.gates.iter().enumerate() {
        for q in g.qubits() {
            if position[q].is_none() {
                position[q] = Some(live.len());
                live.push(q);
                let n = amps.len();
                amps.resize(2 * n, ZERO);
            }
        }
        let mut local = g.clone();
        local.map_qubits(|q| position[q].expect("allocated above"));
        apply_unchecked(&mut amps, &local);

        for q in g.qubits() {
            if c.postselect_mask >> q & 1 == 1 && last_use[q] == Some(gi) {
                let pos = position[q].expect("allocated");
                amps = drop_zero_branch(&amps, pos);
                live.remove(pos);
                position[q] = None;
                for (p, &lq) in live.iter().enumerate() {
                    position[lq] = Some(p);
                }
            }
        }
    }
    // Masked ancillas never touched stay in |0⟩ and are simply omitted;
    // untouched unmasked ancillas are appended in |0⟩.
    for (q, slot) in position.iter_mut().enumerate().skip(base_qubits) {
        if slot.is_none() && c.postselect_mask >> q & 1 == 0 {
            *slot = Some(live.len());
            live.push(q);
            let n = amps.len();
            amps.resize(2 * n, ZERO);
        }
    }
    // Restore ascending circuit-qubit order.
    let order: Vec<usize> = {
        let mut o = live.clone();
        o.sort_unstable();
        o
    };
    if order != live {
        let mut out = vec![ZERO; amps.len()];
        for (idx, a) in amps.iter().enumerate() {
            let mut target = 0;
            for (new_pos, q) in order.iter().enumerate() {
                let old_pos = live.iter().position(|x| x == q).expect("live");
                target |= (idx >> old_pos & 1) << new_pos;
            }
            out[target] = *a;
        }
        amps = out;
    }
    StateVector::from_amplitudes(amps)
}

/// Keeps the amplitudes whose bit `pos` is 0 and removes that bit.
fn drop_zero_branch(amps: &[C64], pos: usize) -> Vec<C64> {
    let low = (1usize << pos) - 1;
    (0..amps.len() / 2).map(|i| amps[(i & low) | ((i & !low) << 1)]).collect()
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub label: String,
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(label: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        matrix.require_square()?;
        let dev = matrix.hermitian_deviation();
        if dev > STRUCTURE_TOL * matrix.tol_scale() {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { label: label.into(), matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `Tr(Ô ρ)`
    pub fn expectation(&self, rho: &ComplexMatrix) -> f64 {
        self.matrix.matmul(rho).trace().re
    }

    pub fn is_diagonal(&self) -> bool {
        let m = &self.matrix;
        (0..m.rows()).all(|i| (0..m.cols()).all(|j| i == j || m[(i, j)] == ZERO))
    }
}

/// `⟨ψ|(Ô ⊗ |0⟩⟨0|_masked ⊗ I_rest)|ψ⟩` with `Ô` on the low `n_system` qubits.
/// Qubits outside the mask (preparation ancillas) are traced out.
pub fn filtered_expectation(state: &StateVector, obs: &Observable, n_system: usize, postselect_mask: u64) -> Result<f64> {
    let d = 1usize << n_system;
    let m = obs.matrix();
    if m.rows() > d {
        return Err(Error::DimensionMismatch(format!("{}-dim observable on {n_system} system qubits", m.rows())));
    }
    if n_system > state.n_qubits {
        return Err(Error::DimensionMismatch("system larger than state".into()));
    }
    let padded;
    let m = if m.rows() < d {
        padded = m.pad_to(d);
        &padded
    } else {
        m
    };
    let mut total = 0.0;
    for rest in 0..state.amps.len() >> n_system {
        let base = rest << n_system;
        if (base as u64) & postselect_mask != 0 {
            continue;
        }
        let v = &state.amps[base..base + d];
        if v.iter().all(|a| *a == ZERO) {
            continue;
        }
        let mv = m.apply(v);
        total += v.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    }
    Ok(total)
}

/// `Σ a² · value`, summed in input order.
pub fn recombine(results: &[(f64, f64)]) -> f64 {
    results.iter().map(|(a, v)| a * a * v).sum()
}

/// Purification `Σ_j √p_j |ψ_j⟩_sys ⊗ |j⟩_prep` of `ρ` on `n_system` qubits
/// (ρ is zero-padded when its dimension is smaller). Returns the state and
/// the number of preparation qubits, at least one.
pub fn prepare_purification(rho: &ComplexMatrix, n_system: usize) -> Result<(StateVector, usize)> {
    crate::lindblad::check_density(rho, 1e-9)?;
    let d = 1usize << n_system;
    if rho.rows() > d {
        return Err(Error::DimensionMismatch(format!("{}-dim state on {n_system} qubits", rho.rows())));
    }
    let (vals, vecs) = rho.eigh()?;
    let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > 1e-13).collect();
    let rank = keep.len().max(1);
    let prep_qubits = crate::circuit::qubits_for(rank).max(1);
    let mut amps = vec![ZERO; d << prep_qubits];
    for (slot, &j) in keep.iter().enumerate() {
        let w = vals[j].sqrt();
        for i in 0..rho.rows() {
            amps[slot * d + i] = vecs[(i, j)] * w;
        }
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok((StateVector::from_amplitudes(amps)?, prep_qubits))
}

/// Reduced density matrix on the low `n_system` qubits.
pub fn reduced_density(state: &StateVector, n_system: usize) -> ComplexMatrix {
    let d = 1usize << n_system;
    let mut rho = ComplexMatrix::zeros(d, d);
    for rest in 0..state.amps.len() >> n_system {
        let v = &state.amps[rest * d..(rest + 1) * d];
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    rho
}

/// Draws `shots` basis outcomes from `|amplitude|²` with a seeded ChaCha8 generator.
pub fn sample_counts(state: &StateVector, shots: usize, seed: u64) -> Result<BTreeMap<usize, u64>> {
    if shots == 0 {
        return Err(Error::OutOfRange("shots must be at least 1".into()));
    }
    let dist = WeightedIndex::new(state.probabilities())
        .map_err(|e| Error::InvalidState(format!("cannot sample: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(dist.sample(&mut rng)).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::test_util::*;
    use crate::tensor::{kron, ONE};
    use rand::{Rng, SeedableRng};

    fn single_qubit_matrix(g: &Gate) -> ComplexMatrix {
        let mut c = Circuit::new(1);
        c.gates.push(g.clone());
        c.unitary().unwrap()
    }

    #[test]
    fn basic_gates() {
        let mut c = Circuit::new(2);
        let input = StateVector::basis(2, 2).unwrap();
        assert_eq!(run_circuit(&c, &input).unwrap(), input);
        c.gates.push(Gate::Pauli { axis: PauliAxis::X, qubit: 0 });
        assert_eq!(run_circuit(&c, &StateVector::zero(2)).unwrap(), StateVector::basis(2, 1).unwrap());

        let y = single_qubit_matrix(&Gate::Pauli { axis: PauliAxis::Y, qubit: 0 });
        assert_eq!(y, ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap());
        let p = single_qubit_matrix(&Gate::Phase { theta: 0.3, qubit: 0 });
        assert!(p.max_diff(&ComplexMatrix::from_diag(&[ONE, C64::from_polar(1.0, -0.3)])) < 1e-15);
        let ry = single_qubit_matrix(&Gate::ControlledRy { beta: 0.4, controls: vec![], target: 0 });
        let (c2, s2) = (0.2f64.cos(), 0.2f64.sin());
        assert!(ry.max_diff(&ComplexMatrix::from_real(2, 2, &[c2, -s2, s2, c2]).unwrap()) < 1e-15);
        assert!(run_circuit(&c, &StateVector::zero(3)).is_err());
    }

    fn random_unitary(rng: &mut impl Rng, k: usize) -> ComplexMatrix {
        let h = random_hermitian(rng, 1 << k);
        h.scale(C64::new(0.0, 1.0)).expm().unwrap()
    }

    #[test]
    fn random_circuit_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut c = Circuit::new(3);
        c.gates = vec![
            Gate::Pauli { axis: PauliAxis::Y, qubit: 1 },
            Gate::OpaqueUnitary { matrix: random_unitary(&mut rng, 2), qubits: vec![2, 0] },
            Gate::ControlledRy { beta: 0.7, controls: vec![0, 2], target: 1 },
            Gate::ControlledPhase { theta: -1.1, controls: vec![1], target: 2 },
            Gate::Permutation { mapping: vec![1, 2, 3, 0], qubits: vec![1, 2] },
            Gate::Phase { theta: 0.4, qubit: 0 },
            Gate::OpaqueUnitary { matrix: random_unitary(&mut rng, 1), qubits: vec![1] },
        ];
        let id2 = ComplexMatrix::identity(2);
        let embed = |m: &ComplexMatrix, qubits: &[usize]| -> ComplexMatrix {
            // Dense embedding by explicit index arithmetic.
            ComplexMatrix::from_fn(8, 8, |r, col| {
                let rest = |x: usize| qubits.iter().fold(x, |acc, q| acc & !(1 << q));
                if rest(r) != rest(col) {
                    return ZERO;
                }
                let sub = |x: usize| qubits.iter().enumerate().fold(0, |acc, (b, q)| acc | ((x >> q & 1) << b));
                m[(sub(r), sub(col))]
            })
        };
        let y = ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap();
        let mut dense = ComplexMatrix::identity(8);
        for g in &c.gates {
            let m = match g {
                Gate::Pauli { qubit, .. } => embed(&y, &[*qubit]),
                Gate::OpaqueUnitary { matrix, qubits } => embed(matrix, qubits),
                Gate::ControlledRy { beta, .. } => {
                    let (co, si) = ((beta / 2.0).cos(), (beta / 2.0).sin());
                    let mut m = ComplexMatrix::identity(8);
                    // controls 0 and 2 set, target 1: indices 0b101 and 0b111
                    m[(5, 5)] = C64::new(co, 0.0);
                    m[(5, 7)] = C64::new(-si, 0.0);
                    m[(7, 5)] = C64::new(si, 0.0);
                    m[(7, 7)] = C64::new(co, 0.0);
                    m
                }
                Gate::ControlledPhase { theta, .. } => ComplexMatrix::from_diag(
                    &(0..8).map(|i| if i & 6 == 6 { C64::from_polar(1.0, -theta) } else { ONE }).collect::<Vec<_>>(),
                ),
                Gate::Permutation { mapping, qubits } => {
                    let p = ComplexMatrix::from_fn(4, 4, |r, col| if mapping[col] == r { ONE } else { ZERO });
                    embed(&p, qubits)
                }
                Gate::Phase { theta, qubit } => embed(&ComplexMatrix::from_diag(&[ONE, C64::from_polar(1.0, -theta)]), &[*qubit]),
                _ => unreachable!(),
            };
            dense = m.matmul(&dense);
        }
        let _ = id2;
        let input = StateVector::from_amplitudes(random_matrix(&mut rng, 8, 1).as_slice().to_vec()).unwrap();
        let out = run_circuit(&c, &input).unwrap();
        let expected = dense.apply(input.amplitudes());
        for (a, b) in out.amplitudes().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((out.norm_sqr() - input.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn state_prep_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let v = random_matrix(&mut rng, 4, 1);
            let norm = v.hs_norm();
            let amps: Vec<C64> = v.as_slice().iter().map(|a| a / norm).collect();
            let mut c = Circuit::new(3);
            c.gates.push(Gate::StatePrep { amplitudes: amps.clone(), qubits: vec![0, 2] });
            let out = run_circuit(&c, &StateVector::zero(3)).unwrap();
            for (x, a) in amps.iter().enumerate() {
                let idx = (x & 1) | ((x >> 1) << 2);
                assert!((out.amplitudes()[idx] - a).norm() < 1e-14);
            }
            assert!(c.unitary().unwrap().is_unitary(1e-12));
        }
        let mut c = Circuit::new(1);
        c.gates.push(Gate::StatePrep { amplitudes: vec![ZERO, I], qubits: vec![0] });
        let out = run_circuit(&c, &StateVector::zero(1)).unwrap();
        assert!((out.amplitudes()[1] - I).norm() < 1e-15);
    }

    #[test]
    fn filtered_execution_matches_full_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut c = Circuit::new(2);
        c.ancillas.push(crate::circuit::Ancilla { role: crate::circuit::AncillaRole::Prep, qubit: 2 });
        let a1 = c.add_sznagy_ancilla();
        let a2 = c.add_sznagy_ancilla();
        c.gates = vec![
            Gate::OpaqueUnitary { matrix: random_unitary(&mut rng, 3), qubits: vec![0, 1, a2] },
            Gate::ControlledRy { beta: 0.3, controls: vec![0], target: a1 },
            Gate::OpaqueUnitary { matrix: random_unitary(&mut rng, 2), qubits: vec![1, 2] },
            Gate::Pauli { axis: PauliAxis::X, qubit: a1 },
        ];
        let v = random_matrix(&mut rng, 8, 1);
        let norm = v.hs_norm();
        let input = StateVector::from_amplitudes(v.as_slice().iter().map(|a| a / norm).collect()).unwrap();
        let full = run_circuit(&c, &input.extend_zero(2)).unwrap();
        let filtered = execute_filtered(&c, &input).unwrap();
        assert_eq!(filtered.n_qubits(), 3);
        for i in 0..8 {
            assert!((filtered.amplitudes()[i] - full.amplitudes()[i]).norm() < 1e-13);
        }
        let obs = Observable::new("z0", kron(&ComplexMatrix::identity(2), &ComplexMatrix::from_real_diag(&[1.0, -1.0]))).unwrap();
        let a = filtered_expectation(&full, &obs, 2, c.postselect_mask).unwrap();
        let b = filtered_expectation(&filtered, &obs, 2, 0).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn filtered_expectation_examples() {
        let id = Observable::new("I", ComplexMatrix::identity(2)).unwrap();
        assert!((filtered_expectation(&StateVector::zero(1), &id, 1, 0).unwrap() - 1.0).abs() < 1e-15);
        // |+⟩ ⊗ |1⟩_anc with the ancilla masked.
        let h = 0.5f64.sqrt();
        let s = StateVector::from_amplitudes(vec![ZERO, ZERO, C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        let x = Observable::new("X", ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(filtered_expectation(&s, &x, 1, 0b10).unwrap(), 0.0);
        assert!((filtered_expectation(&s, &x, 1, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(filtered_expectation(&s, &Observable::new("I4", ComplexMatrix::identity(8)).unwrap(), 1, 0).is_err());
    }

    #[test]
    fn recombine_examples() {
        assert_eq!(recombine(&[(1.0, 0.37)]), 0.37);
        assert_eq!(recombine(&[(0.5, 2.0), (2.0, -1.0)]), 0.5 - 4.0);
    }

    #[test]
    fn purification_examples() {
        let (s, p) = prepare_purification(&ComplexMatrix::from_real_diag(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(p, 1);
        assert!((s.amplitudes()[0] - ONE).norm() < 1e-15);

        let (s, p) = prepare_purification(&ComplexMatrix::identity(2).scale_real(0.5), 1).unwrap();
        assert_eq!(p, 1);
        let h = 0.5f64.sqrt();
        assert!((s.amplitudes()[0].norm() - h).abs() < 1e-15);
        assert!((s.amplitudes()[3].norm() - h).abs() < 1e-15);
        assert!(s.amplitudes()[1].norm() < 1e-15 && s.amplitudes()[2].norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let rho = random_density(&mut rng, 4);
            let (s, p) = prepare_purification(&rho, 2).unwrap();
            assert_eq!(p, 2);
            assert!(reduced_density(&s, 2).max_diff(&rho) < 1e-10);
        }
        assert!(prepare_purification(&ComplexMatrix::from_real_diag(&[0.7, 0.7]), 1).is_err());
    }

    #[test]
    fn sampling() {
        let counts = sample_counts(&StateVector::zero(2), 100, 1).unwrap();
        assert_eq!(counts.get(&0), Some(&100));
        assert_eq!(counts.len(), 1);

        let h = 0.5f64.sqrt();
        let plus = StateVector::from_amplitudes(vec![C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
        let counts = sample_counts(&plus, 100_000, 42).unwrap();
        let freq = *counts.get(&0).unwrap() as f64 / 1e5;
        assert!((freq - 0.5).abs() <= 0.01);
        assert_eq!(counts, sample_counts(&plus, 100_000, 42).unwrap());
        assert!(sample_counts(&plus, 0, 1).is_err());
    }
}
