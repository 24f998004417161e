//! Circuit IR and the builders that compile Kraus terms into circuits whose
//! gate structure does not depend on `t`.
//!
//! Qubit 0 is the least significant bit of a basis index. System qubits come
//! first, then state-preparation ancillas, then Sz.-Nagy ancillas. In an
//! opaque unitary, `qubits[0]` is the least significant bit of the matrix
//! index.

use std::ops::Sub;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kraus::{KrausTerm, ScalarSchedule};
use crate::lindblad::{CaseClassification, LindbladSystem};
use crate::tensor::{ComplexMatrix, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// A gate acting on named qubits.
///
/// `Phase` is `diag(1, e^{−iθ})`. `ControlledPhase` applies `e^{−iθ}` when
/// the controls and the target are all 1. `ControlledRy` applies
/// `R_y(β) = exp(−iβY/2)` to the target when all controls are 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Pauli {
        axis: PauliAxis,
        qubit: usize,
    },
    Phase {
        theta: f64,
        qubit: usize,
    },
    ControlledPhase {
        theta: f64,
        controls: Vec<usize>,
        target: usize,
    },
    ControlledRy {
        beta: f64,
        controls: Vec<usize>,
        target: usize,
    },
    OpaqueUnitary {
        #[serde(with = "crate::dump::matrix_rows")]
        matrix: ComplexMatrix,
        qubits: Vec<usize>,
    },
    /// Basis relabeling `|x⟩ ↦ |mapping[x]⟩` on the listed qubits.
    Permutation {
        mapping: Vec<usize>,
        qubits: Vec<usize>,
    },
    /// Prepares `Σ a_x |x⟩` from `|0…0⟩` on the listed qubits.
    StatePrep {
        amplitudes: Vec<C64>,
        qubits: Vec<usize>,
    },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Pauli { qubit, .. } | Gate::Phase { qubit, .. } => vec![*qubit],
            Gate::ControlledPhase { controls, target, .. } | Gate::ControlledRy { controls, target, .. } => {
                let mut q = controls.clone();
                q.push(*target);
                q
            }
            Gate::OpaqueUnitary { qubits, .. } | Gate::Permutation { qubits, .. } | Gate::StatePrep { qubits, .. } => {
                qubits.clone()
            }
        }
    }

    pub fn arity(&self) -> usize {
        self.qubits().len()
    }

    /// Short tag used in structure comparisons and gate counts.
    pub fn kind(&self) -> &'static str {
        match self {
            Gate::Pauli { .. } => "pauli",
            Gate::Phase { .. } => "phase",
            Gate::ControlledPhase { .. } => "controlled_phase",
            Gate::ControlledRy { .. } => "controlled_ry",
            Gate::OpaqueUnitary { .. } => "opaque_unitary",
            Gate::Permutation { .. } => "permutation",
            Gate::StatePrep { .. } => "state_prep",
        }
    }

    pub fn map_qubits(&mut self, f: impl Fn(usize) -> usize) {
        match self {
            Gate::Pauli { qubit, .. } | Gate::Phase { qubit, .. } => *qubit = f(*qubit),
            Gate::ControlledPhase { controls, target, .. } | Gate::ControlledRy { controls, target, .. } => {
                controls.iter_mut().for_each(|q| *q = f(*q));
                *target = f(*target);
            }
            Gate::OpaqueUnitary { qubits, .. } | Gate::Permutation { qubits, .. } | Gate::StatePrep { qubits, .. } => {
                qubits.iter_mut().for_each(|q| *q = f(*q))
            }
        }
    }

    /// Checks the structural invariants: distinct in-range qubits, unitary
    /// opaque matrices, bijective permutations, normalized amplitudes.
    pub fn validate(&self, total_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= total_qubits {
                return Err(Error::OutOfRange(format!("{} gate touches qubit {q} of {total_qubits}", self.kind())));
            }
            if qs[..i].contains(&q) {
                return Err(Error::OutOfRange(format!("{} gate repeats qubit {q}", self.kind())));
            }
        }
        let k = qs.len();
        match self {
            Gate::OpaqueUnitary { matrix, .. } => {
                if matrix.rows() != 1 << k || matrix.cols() != 1 << k {
                    return Err(Error::DimensionMismatch(format!(
                        "{}x{} matrix on {k} qubits",
                        matrix.rows(),
                        matrix.cols()
                    )));
                }
                let dev = matrix.unitary_deviation();
                if dev > 1e-9 {
                    return Err(Error::NotUnitary(dev));
                }
            }
            Gate::Permutation { mapping, .. } => {
                if mapping.len() != 1 << k {
                    return Err(Error::DimensionMismatch(format!("mapping of length {} on {k} qubits", mapping.len())));
                }
                let mut seen = vec![false; mapping.len()];
                for &m in mapping {
                    if m >= seen.len() || seen[m] {
                        return Err(Error::OutOfRange("permutation mapping is not bijective".into()));
                    }
                    seen[m] = true;
                }
            }
            Gate::StatePrep { amplitudes, .. } => {
                if amplitudes.len() != 1 << k {
                    return Err(Error::DimensionMismatch(format!(
                        "{} amplitudes on {k} qubits",
                        amplitudes.len()
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidState(format!("state-prep norm² is {norm}")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaRole {
    Sznagy,
    Prep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ancilla {
    pub role: AncillaRole,
    pub qubit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_system: usize,
    pub ancillas: Vec<Ancilla>,
    pub gates: Vec<Gate>,
    pub weight: f64,
    /// Bit `q` set means qubit `q` must be measured in `|0⟩`.
    pub postselect_mask: u64,
    /// The ideal operation equals `e^{i·global_phase}` times the simulated one.
    pub global_phase: f64,
}

impl Circuit {
    pub fn new(n_system: usize) -> Self {
        Self { n_system, ancillas: vec![], gates: vec![], weight: 1.0, postselect_mask: 0, global_phase: 0.0 }
    }

    pub fn total_qubits(&self) -> usize {
        self.n_system + self.ancillas.len()
    }

    /// Appends a Sz.-Nagy ancilla at the next free position and returns its qubit.
    pub fn add_sznagy_ancilla(&mut self) -> usize {
        let q = self.total_qubits();
        self.ancillas.push(Ancilla { role: AncillaRole::Sznagy, qubit: q });
        self.postselect_mask |= 1 << q;
        q
    }

    pub fn prep_qubits(&self) -> Vec<usize> {
        self.ancillas.iter().filter(|a| a.role == AncillaRole::Prep).map(|a| a.qubit).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.total_qubits();
        if total > 62 {
            return Err(Error::OutOfRange(format!("{total} qubits exceed the supported width")));
        }
        for (i, a) in self.ancillas.iter().enumerate() {
            if a.qubit != self.n_system + i {
                return Err(Error::OutOfRange(format!("ancilla {i} sits on qubit {}", a.qubit)));
            }
        }
        if self.postselect_mask >> total != 0 {
            return Err(Error::OutOfRange("postselect mask exceeds qubit count".into()));
        }
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(Error::OutOfRange(format!("weight {} must be finite and non-negative", self.weight)));
        }
        self.gates.iter().try_for_each(|g| g.validate(total))
    }

    /// Gate kinds and arities, which must not depend on `t`.
    pub fn structure(&self) -> Vec<(&'static str, usize)> {
        self.gates.iter().map(|g| (g.kind(), g.arity())).collect()
    }

    /// Inserts `prep_qubits` preparation ancillas directly above the system
    /// register and prepends a state-prep gate over system and prep qubits.
    pub fn with_state_prep(&self, amplitudes: Vec<C64>, prep_qubits: usize) -> Result<Self> {
        let n = self.n_system;
        if self.ancillas.iter().any(|a| a.role == AncillaRole::Prep) {
            return Err(Error::OutOfRange("circuit already has preparation ancillas".into()));
        }
        let shift = |q: usize| if q >= n { q + prep_qubits } else { q };
        let mut out = self.clone();
        for g in &mut out.gates {
            g.map_qubits(shift);
        }
        let mut ancillas: Vec<Ancilla> =
            (0..prep_qubits).map(|j| Ancilla { role: AncillaRole::Prep, qubit: n + j }).collect();
        ancillas.extend(self.ancillas.iter().map(|a| Ancilla { role: a.role, qubit: shift(a.qubit) }));
        out.ancillas = ancillas;
        out.postselect_mask = (self.postselect_mask >> n) << (n + prep_qubits) | (self.postselect_mask & ((1 << n) - 1));
        let qubits: Vec<usize> = (0..n + prep_qubits).collect();
        let prep = Gate::StatePrep { amplitudes, qubits };
        prep.validate(out.total_qubits())?;
        out.gates.insert(0, prep);
        Ok(out)
    }

    /// Dense unitary of the whole circuit (small circuits only).
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        let n = self.total_qubits();
        let dim = 1usize << n;
        let mut u = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let out = crate::statevector::run_circuit(self, &crate::statevector::StateVector::basis(n, col)?)?;
            for (row, a) in out.amplitudes().iter().enumerate() {
                u[(row, col)] = *a;
            }
        }
        Ok(u)
    }

    /// `(⟨0|_anc ⊗ I) U (|0⟩_anc ⊗ I)` over the postselected ancillas, as a
    /// `2^{n_system}`-square matrix. Requires no preparation ancillas.
    pub fn postselected_block(&self) -> Result<ComplexMatrix> {
        if !self.prep_qubits().is_empty() {
            return Err(Error::OutOfRange("postselected block needs a circuit without preparation ancillas".into()));
        }
        let d = 1usize << self.n_system;
        let mut block = ComplexMatrix::zeros(d, d);
        for col in 0..d {
            let out = crate::statevector::execute_filtered(self, &crate::statevector::StateVector::basis(self.n_system, col)?)?;
            for row in 0..d {
                block[(row, col)] = out.amplitudes()[row];
            }
        }
        Ok(block)
    }

    /// Postselected block scaled by the weight and global phase; for a Kraus
    /// circuit this is the Kraus operator itself.
    pub fn effective_operator(&self) -> Result<ComplexMatrix> {
        Ok(self.postselected_block()?.scale(C64::from_polar(self.weight, self.global_phase)))
    }
}

/// `Q_N u` with `Q_N = ((1,0),(−1,1))^{⊗N}`, by `N` in-place sweeps.
pub fn qn_apply<T: Copy + Sub<Output = T>>(u: &[T], n: usize) -> Result<Vec<T>> {
    Ok(qn_apply_counted(u, n)?.0)
}

/// [`qn_apply`] also returning the number of subtractions performed.
pub fn qn_apply_counted<T: Copy + Sub<Output = T>>(u: &[T], n: usize) -> Result<(Vec<T>, usize)> {
    if u.len() != 1usize.checked_shl(n as u32).unwrap_or(0) {
        return Err(Error::NotPowerOfTwo(u.len()));
    }
    let mut v = u.to_vec();
    let mut count = 0;
    for bit in 0..n {
        let stride = 1 << bit;
        for idx in 0..v.len() {
            if idx & stride != 0 {
                v[idx] = v[idx] - v[idx - stride];
                count += 1;
            }
        }
    }
    Ok((v, count))
}

/// Number of qubits for a power-of-two length.
pub fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// `θ = t Q_N ω`. Applying [`phase_gates`] with these angles yields
/// `diag(e^{−itω_n})` up to the global phase `e^{−itω_0}`.
pub fn diagonal_phase_params(omega: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = log2_exact(omega.len())?;
    let scaled: Vec<f64> = omega.iter().map(|w| w * t).collect();
    qn_apply(&scaled, n)
}

/// `β = −2 Q_N arcsin(v)`. With the ancilla prepared in `|1⟩`, the
/// [`contraction_gates`] ladder has ancilla-`|0⟩` block `diag(v)`.
pub fn diagonal_contraction_params(v: &[f64]) -> Result<Vec<f64>> {
    let n = log2_exact(v.len())?;
    if let Some(bad) = v.iter().find(|&&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
        return Err(Error::OutOfRange(format!("contraction entry {bad} outside [0, 1]")));
    }
    let angles: Vec<f64> = v.iter().map(|x| -2.0 * x.clamp(0.0, 1.0).asin()).collect();
    qn_apply(&angles, n)
}

fn bits_of(s: usize, qubits: &[usize]) -> Vec<usize> {
    (0..qubits.len()).filter(|b| s >> b & 1 == 1).map(|b| qubits[b]).collect()
}

/// One phase gate per nonzero index `s`: single-qubit when `s` has one bit
/// set, otherwise controlled by the lower bits with the highest bit as target.
pub fn phase_gates(theta: &[f64], qubits: &[usize]) -> Vec<Gate> {
    (1..theta.len())
        .map(|s| {
            let mut bits = bits_of(s, qubits);
            let target = bits.pop().expect("s > 0");
            if bits.is_empty() {
                Gate::Phase { theta: theta[s], qubit: target }
            } else {
                Gate::ControlledPhase { theta: theta[s], controls: bits, target }
            }
        })
        .collect()
}

/// `X` on the ancilla, then one `R_y(β_s)` on the ancilla per index `s`,
/// controlled by the qubits set in `s`.
pub fn contraction_gates(beta: &[f64], qubits: &[usize], ancilla: usize) -> Vec<Gate> {
    let mut gates = vec![Gate::Pauli { axis: PauliAxis::X, qubit: ancilla }];
    gates.extend(
        (0..beta.len()).map(|s| Gate::ControlledRy { beta: beta[s], controls: bits_of(s, qubits), target: ancilla }),
    );
    gates
}

/// Unitary `[[K, D_{K†}], [D_K, −K†]]` with the ancilla as the most
/// significant index bit. `‖K‖_op` up to `1 + 1e-9` is rescaled to 1.
pub fn sznagy_matrix(k: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = k.require_square()?;
    log2_exact(d)?;
    let norm = k.op_norm();
    if norm > 1.0 + 1e-9 {
        return Err(Error::NotContraction(norm));
    }
    let k = if norm > 1.0 { k.scale_real(1.0 / norm) } else { k.clone() };
    let kdag = k.adjoint();
    // Defect operators from one SVD so that K D_K = D_{K†} K holds to rounding.
    let (w, sigma, v) = k.svd();
    let defect: Vec<f64> = sigma.iter().map(|s| (1.0 - s * s).max(0.0).sqrt()).collect();
    let sandwich = |basis: &ComplexMatrix| {
        ComplexMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|l| basis[(i, l)] * defect[l] * basis[(j, l)].conj()).sum()
        })
    };
    let d_k = sandwich(&v);
    let d_kdag = sandwich(&w);
    Ok(ComplexMatrix::from_fn(2 * d, 2 * d, |i, j| match (i / d, j / d) {
        (0, 0) => k[(i, j)],
        (0, 1) => d_kdag[(i, j - d)],
        (1, 0) => d_k[(i - d, j)],
        _ => -kdag[(i - d, j - d)],
    }))
}

/// Sz.-Nagy dilation of `K` as an opaque gate on `system` plus `ancilla`.
pub fn sznagy_dilate(k: &ComplexMatrix, system: &[usize], ancilla: usize) -> Result<Gate> {
    let matrix = sznagy_matrix(k)?;
    if matrix.rows() != 2 << system.len() {
        return Err(Error::DimensionMismatch(format!("{}x{} operator on {} qubits", k.rows(), k.cols(), system.len())));
    }
    let mut qubits = system.to_vec();
    qubits.push(ancilla);
    Ok(Gate::OpaqueUnitary { matrix, qubits })
}

/// Smallest qubit count holding dimension `d`.
pub fn qubits_for(d: usize) -> usize {
    d.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Spectral data of `V_H` reused by every circuit of a system:
/// `V_H = U diag(ħω − iħλ) U†` on the padded space.
#[derive(Clone, Debug)]
pub struct EffectivePlan {
    pub n_qubits: usize,
    pub eigenvectors: ComplexMatrix,
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Normalized Lindblad operators `L/‖L‖_op`, zero-padded.
    pub normalized: Vec<ComplexMatrix>,
}

impl EffectivePlan {
    pub fn new(sys: &LindbladSystem) -> Result<Self> {
        let n_qubits = qubits_for(sys.dim());
        let size = 1 << n_qubits;
        let vh = sys.effective_hamiltonian().pad_to(size);
        let (mu, eigenvectors) = vh.eig_normal()?;
        let recon = eigenvectors.matmul(&ComplexMatrix::from_diag(&mu)).matmul(&eigenvectors.adjoint());
        let resid = recon.max_diff(&vh);
        if resid > 1e-9 * vh.tol_scale() {
            return Err(Error::NonNormal(resid));
        }
        let hbar = sys.hbar();
        let omega = mu.iter().map(|z| z.re / hbar).collect();
        let lambda = mu.iter().map(|z| (-z.im / hbar).max(0.0)).collect();
        let normalized = sys
            .lindblads()
            .iter()
            .map(|l| {
                let n = l.operator.op_norm();
                let a = if n > 0.0 { l.operator.scale_real(1.0 / n) } else { l.operator.clone() };
                a.pad_to(size)
            })
            .collect();
        Ok(Self { n_qubits, eigenvectors, omega, lambda, normalized })
    }

    /// Gates of `U W(t) Λ(t) U†` on `system`, using `ancilla` for `Λ`.
    /// Returns the gates and the global phase `−tω_0`.
    pub fn uh_gates(&self, t: f64, system: &[usize], ancilla: usize) -> Result<(Vec<Gate>, f64)> {
        let theta = diagonal_phase_params(&self.omega, t)?;
        let v: Vec<f64> = self.lambda.iter().map(|l| (-t * l).exp()).collect();
        let beta = diagonal_contraction_params(&v)?;
        let mut gates = vec![Gate::OpaqueUnitary { matrix: self.eigenvectors.adjoint(), qubits: system.to_vec() }];
        gates.extend(contraction_gates(&beta, system, ancilla));
        gates.extend(phase_gates(&theta, system));
        gates.push(Gate::OpaqueUnitary { matrix: self.eigenvectors.clone(), qubits: system.to_vec() });
        Ok((gates, -theta[0]))
    }
}

/// Circuit for `e^{−itV_H/ħ}` with weight `√h(t)`.
pub fn build_uh_circuit(sys: &LindbladSystem, cls: &CaseClassification, t: f64) -> Result<Circuit> {
    let sched = ScalarSchedule::new(cls)?;
    let plan = EffectivePlan::new(sys)?;
    let mut c = Circuit::new(plan.n_qubits);
    let system: Vec<usize> = (0..plan.n_qubits).collect();
    let anc = c.add_sznagy_ancilla();
    let (gates, phase) = plan.uh_gates(t, &system, anc)?;
    c.gates = gates;
    c.global_phase = phase;
    c.weight = sched.h(t).sqrt();
    Ok(c)
}

/// Circuit for one Kraus term: dilations of `A_{k_m}`, …, `A_{k_1}` on their
/// own ancillas, followed by the `U_𝓗` block on a final ancilla.
pub fn build_kraus_circuit(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    term: &KrausTerm,
    t: f64,
) -> Result<Circuit> {
    let plan = EffectivePlan::new(sys)?;
    build_kraus_circuit_with(&plan, &ScalarSchedule::new(cls)?, term, t)
}

pub fn build_kraus_circuit_with(
    plan: &EffectivePlan,
    sched: &ScalarSchedule,
    term: &KrausTerm,
    t: f64,
) -> Result<Circuit> {
    let mut c = Circuit::new(plan.n_qubits);
    let system: Vec<usize> = (0..plan.n_qubits).collect();
    for &i in term.k.iter().rev() {
        let a = plan
            .normalized
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("Lindblad index {i} out of range")))?;
        let anc = c.add_sznagy_ancilla();
        c.gates.push(sznagy_dilate(a, &system, anc)?);
    }
    let anc = c.add_sznagy_ancilla();
    let (gates, phase) = plan.uh_gates(t, &system, anc)?;
    c.gates.extend(gates);
    c.global_phase = phase;
    c.weight = term.weight(sched, t);
    Ok(c)
}

/// Reference value of `Q_N` as a dense matrix (for tests and reporting).
pub fn qn_dense(n: usize) -> Vec<Vec<i64>> {
    let size = 1 << n;
    (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    // Entry is Π_b q[i_b][j_b] with q = ((1,0),(−1,1)).
                    let mut v = 1i64;
                    for b in 0..n {
                        v *= match (i >> b & 1, j >> b & 1) {
                            (0, 0) | (1, 1) => 1,
                            (1, 0) => -1,
                            _ => 0,
                        };
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Entry-wise check of a matrix against a target up to one global phase.
pub fn equal_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let (mut best, mut pivot) = (0.0, ZERO);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        if y.norm() > best {
            best = y.norm();
            pivot = x / y;
        }
    }
    if best == 0.0 {
        return a.max_abs();
    }
    let phase = pivot / pivot.norm();
    a.max_diff(&b.scale(phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kraus::{kraus_operator, kraus_terms};
    use crate::lindblad::{classify, LindbladOperator};
    use crate::tensor::test_util::*;
    use crate::tensor::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    fn qho(d: usize, omega: f64, gamma: f64) -> LindbladSystem {
        let a = ComplexMatrix::from_fn(d, d, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO });
        let h = ComplexMatrix::from_real_diag(&(0..d).map(|n| omega * (0.5 + n as f64)).collect::<Vec<_>>());
        LindbladSystem::with_unit_hbar(h, vec![LindbladOperator::new(a, gamma)]).unwrap()
    }

    fn diag_circuit_matrix(gates: Vec<Gate>, n: usize, extra: usize) -> ComplexMatrix {
        let mut c = Circuit::new(n + extra);
        c.gates = gates;
        c.unitary().unwrap()
    }

    #[test]
    fn qn_examples() {
        assert_eq!(qn_apply(&[3i64, 5], 1).unwrap(), vec![3, 2]);
        assert_eq!(qn_apply(&[7i64; 8], 3).unwrap(), vec![7, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(qn_apply(&[1i64, 2, 3], 2), Err(Error::NotPowerOfTwo(3))));

        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let dense = qn_dense(4);
        let u: Vec<i64> = (0..16).map(|_| rng.gen_range(-100..100)).collect();
        let (fast, count) = qn_apply_counted(&u, 4).unwrap();
        let slow: Vec<i64> = dense.iter().map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum()).collect();
        assert_eq!(fast, slow);
        assert_eq!(count, 4 * 8);

        let uf: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = qn_apply(&uf, 4).unwrap();
        for (row, f) in dense.iter().zip(fast) {
            let s: f64 = row.iter().zip(&uf).map(|(&a, b)| a as f64 * b).sum();
            assert!((s - f).abs() < 1e-13);
        }
    }

    #[test]
    fn phase_params() {
        assert_eq!(diagonal_phase_params(&[0.3, 1.0, -2.0, 0.5], 0.0).unwrap(), vec![0.0; 4]);
        let theta = diagonal_phase_params(&[0.0, 1.0], std::f64::consts::PI).unwrap();
        assert_eq!(theta, vec![0.0, std::f64::consts::PI]);
        let m = diag_circuit_matrix(phase_gates(&theta, &[0]), 1, 0);
        assert!(m.max_diff(&ComplexMatrix::from_real_diag(&[1.0, -1.0])) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let omega: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = 1.7;
        let theta = diagonal_phase_params(&omega, t).unwrap();
        let m = diag_circuit_matrix(phase_gates(&theta, &[0, 1, 2]), 3, 0);
        let target = ComplexMatrix::from_diag(&omega.iter().map(|w| C64::from_polar(1.0, -t * w)).collect::<Vec<_>>());
        assert!(equal_up_to_phase(&m, &target) < 1e-12);
        // The tracked global phase restores the target exactly.
        assert!(m.scale(C64::from_polar(1.0, -theta[0])).max_diff(&target) < 1e-12);
    }

    fn contraction_block(v: &[f64]) -> ComplexMatrix {
        let n = log2_exact(v.len()).unwrap();
        let beta = diagonal_contraction_params(v).unwrap();
        let system: Vec<usize> = (0..n).collect();
        let mut c = Circuit::new(n);
        let anc = c.add_sznagy_ancilla();
        c.gates = contraction_gates(&beta, &system, anc);
        c.postselected_block().unwrap()
    }

    #[test]
    fn contraction_params() {
        let beta = diagonal_contraction_params(&[1.0; 4]).unwrap();
        assert!((beta[0] + std::f64::consts::PI).abs() < 1e-15);
        assert!(beta[1..].iter().all(|b| b.abs() < 1e-15));
        assert!(contraction_block(&[1.0; 4]).max_diff(&ComplexMatrix::identity(4)) < 1e-15);
        assert!(contraction_block(&[0.0; 4]).max_abs() < 1e-15);

        let v = [1.0, (-0.5f64).exp(), (-1.0f64).exp(), (-1.5f64).exp()];
        let block = contraction_block(&v);
        assert!(block.max_diff(&ComplexMatrix::from_real_diag(&v)) < 1e-12);
        assert!(diagonal_contraction_params(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn sznagy_examples() {
        let id = ComplexMatrix::identity(2);
        let u = sznagy_matrix(&id).unwrap();
        assert!(u.max_diff(&ComplexMatrix::from_real_diag(&[1.0, 1.0, -1.0, -1.0])) < 1e-15);
        let u = sznagy_matrix(&ComplexMatrix::zeros(2, 2)).unwrap();
        let swap = ComplexMatrix::from_real(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.]).unwrap();
        assert!(u.max_diff(&swap) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 4, 4);
            let k = m.scale_real(1.0 / m.op_norm());
            let u = sznagy_matrix(&k).unwrap();
            assert!(u.is_unitary(1e-9));
            assert!(u.block(0, 0, 4, 4).max_diff(&k) < 1e-10);
        }
        assert!(matches!(sznagy_matrix(&id.scale_real(1.1)), Err(Error::NotContraction(_))));
        assert!(sznagy_matrix(&id.scale_real(1.0 + 1e-10)).is_ok());
        assert!(matches!(sznagy_matrix(&ComplexMatrix::identity(3)), Err(Error::NotPowerOfTwo(3))));
    }

    #[test]
    fn uh_circuit_matches_effective_evolution() {
        let sys = qho(4, 1.0, 0.6);
        let cls = classify(&sys, 1e-9).unwrap();
        for t in [0.3, 3.0] {
            let c = build_uh_circuit(&sys, &cls, t).unwrap();
            let target = sys.effective_hamiltonian().scale(C64::new(0.0, -t)).expm().unwrap();
            let got = c.postselected_block().unwrap().scale(C64::from_polar(1.0, c.global_phase));
            assert!(got.max_diff(&target) < 1e-9);
            assert!(c.unitary().unwrap().is_unitary(1e-9));
        }

        // Dephasing: Λ = e^{−γt/2} I.
        let sys = LindbladSystem::with_unit_hbar(ComplexMatrix::zeros(2, 2), vec![LindbladOperator::new(z(), 0.8)]).unwrap();
        let cls = classify(&sys, 1e-9).unwrap();
        let plan = EffectivePlan::new(&sys).unwrap();
        assert!(plan.lambda.iter().all(|l| (l - 0.4).abs() < 1e-15));
        assert!(plan.omega.iter().all(|w| w.abs() < 1e-15));
        let c = build_uh_circuit(&sys, &cls, 1.0).unwrap();
        let got = c.postselected_block().unwrap().scale(C64::from_polar(1.0, c.global_phase));
        assert!(got.max_diff(&ComplexMatrix::identity(2).scale_real((-0.4f64).exp())) < 1e-12);
    }

    #[test]
    fn closed_system_circuit_is_unitary_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = random_hermitian(&mut rng, 4);
        let sys = LindbladSystem::with_unit_hbar(h.clone(), vec![]).unwrap();
        let cls = classify(&sys, 1e-9).unwrap();
        let c = build_uh_circuit(&sys, &cls, 1.2).unwrap();
        let target = h.scale(C64::new(0.0, -1.2)).expm().unwrap();
        assert!(c.effective_operator().unwrap().max_diff(&target) < 1e-10);
    }

    #[test]
    fn kraus_circuit_blocks() {
        let sys = LindbladSystem::with_unit_hbar(ComplexMatrix::zeros(2, 2), vec![LindbladOperator::new(z(), 1.0)]).unwrap();
        let cls = classify(&sys, 1e-9).unwrap();
        let terms = kraus_terms(&sys, 2, false, 100).unwrap();
        for term in &terms {
            let c = build_kraus_circuit(&sys, &cls, term, 1.0).unwrap();
            assert_eq!(c.ancillas.len(), term.m + 1);
            let k = kraus_operator(&sys, &cls, term.m, &term.k, 1.0).unwrap();
            assert!(c.effective_operator().unwrap().max_diff(&k) < 1e-9);
        }
        let m1 = build_kraus_circuit(&sys, &cls, &terms[1], 1.0).unwrap();
        assert!((m1.weight - 1.0).abs() < 1e-15);
        let m0 = build_kraus_circuit(&sys, &cls, &terms[0], 1.0).unwrap();
        assert!((m0.weight - 1.0).abs() < 1e-15);

        let sys = qho(4, 1.3, 0.5);
        let cls = classify(&sys, 1e-9).unwrap();
        let terms = kraus_terms(&sys, 3, false, 100).unwrap();
        let c = build_kraus_circuit(&sys, &cls, &terms[2], 0.7).unwrap();
        let k = kraus_operator(&sys, &cls, 2, &[0, 0], 0.7).unwrap();
        assert!(c.effective_operator().unwrap().max_diff(&k) < 1e-9);
    }

    #[test]
    fn structure_is_time_independent() {
        let sys = qho(4, 1.0, 0.4);
        let cls = classify(&sys, 1e-9).unwrap();
        let terms = kraus_terms(&sys, 3, false, 100).unwrap();
        for term in &terms {
            let a = build_kraus_circuit(&sys, &cls, term, 0.01).unwrap();
            let b = build_kraus_circuit(&sys, &cls, term, 100.0).unwrap();
            assert_eq!(a.structure(), b.structure());
        }
    }

    #[test]
    fn state_prep_shifts_ancillas() {
        let sys = LindbladSystem::with_unit_hbar(ComplexMatrix::zeros(2, 2), vec![LindbladOperator::new(z(), 1.0)]).unwrap();
        let cls = classify(&sys, 1e-9).unwrap();
        let c = build_uh_circuit(&sys, &cls, 1.0).unwrap();
        let amps = vec![C64::new(0.5f64.sqrt(), 0.0), ZERO, ZERO, C64::new(0.5f64.sqrt(), 0.0)];
        let p = c.with_state_prep(amps, 1).unwrap();
        assert_eq!(p.total_qubits(), 3);
        assert_eq!(p.postselect_mask, 0b100);
        assert_eq!(p.ancillas[0], Ancilla { role: AncillaRole::Prep, qubit: 1 });
        assert_eq!(p.gates[0].qubits(), vec![0, 1]);
        p.validate().unwrap();
        let bad = c.with_state_prep(vec![ONE, ONE, ZERO, ZERO], 1);
        assert!(bad.is_err());
    }

    #[test]
    fn gate_validation() {
        let g = Gate::OpaqueUnitary { matrix: ComplexMatrix::from_real_diag(&[1.0, 2.0]), qubits: vec![0] };
        assert!(matches!(g.validate(1), Err(Error::NotUnitary(_))));
        let g = Gate::Permutation { mapping: vec![0, 0], qubits: vec![0] };
        assert!(g.validate(1).is_err());
        let g = Gate::ControlledRy { beta: 0.1, controls: vec![0], target: 0 };
        assert!(g.validate(2).is_err());
        let g = Gate::Pauli { axis: PauliAxis::X, qubit: 3 };
        assert!(g.validate(2).is_err());
    }
}
