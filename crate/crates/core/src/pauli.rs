//! Pauli strings and the continuous-time Pauli channel.
//!
//! A string on `n` qubits is stored as bit masks `x`, `z` plus a phase
//! exponent `s`, representing `i^s ⊗_j σ_j` where `(x_j, z_j)` selects
//! `I=(0,0)`, `X=(1,0)`, `Z=(0,1)`, `Y=(1,1)`. Bit `j` is qubit `j`; in the
//! text form the leftmost character is qubit `n-1`.

use std::fmt;
use std::str::FromStr;

use crate::circuit::{Circuit, Gate, PauliAxis};
use crate::error::{Error, Result};
use crate::lindblad::{LindbladOperator, LindbladSystem};
use crate::tensor::{kron, ComplexMatrix, C64};

pub const MAX_STRINGS: usize = 20;
pub const MAX_QUBITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

fn i_pow(s: u8) -> C64 {
    match s % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Exponent `g` with `σ(x1,z1)·σ(x2,z2) = i^g σ(x1^x2, z1^z2)`.
fn product_exponent(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (x2 as i32, z2 as i32);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

impl PauliString {
    pub fn new(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::OutOfRange(format!("pauli string on {n} qubits")));
        }
        let full = (1u64 << n) - 1;
        if (x | z) & !full != 0 {
            return Err(Error::OutOfRange(format!("masks exceed {n} qubits")));
        }
        Ok(Self { n, x, z, phase: phase % 4 })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0, 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x | self.z == 0
    }

    /// Same operator with the phase dropped.
    pub fn unsigned(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn axis(&self, qubit: usize) -> Option<PauliAxis> {
        match (self.x >> qubit & 1, self.z >> qubit & 1) {
            (0, 0) => None,
            (1, 0) => Some(PauliAxis::X),
            (0, 1) => Some(PauliAxis::Z),
            _ => Some(PauliAxis::Y),
        }
    }

    fn check_size(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("{}-qubit and {}-qubit strings", self.n, other.n)));
        }
        Ok(())
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_size(other)?;
        let mut g = self.phase as i32 + other.phase as i32;
        for j in 0..self.n {
            g += product_exponent(self.x >> j & 1 == 1, self.z >> j & 1 == 1, other.x >> j & 1 == 1, other.z >> j & 1 == 1);
        }
        Ok(Self { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z, phase: g.rem_euclid(4) as u8 })
    }

    /// Number of positions where the single-qubit factors anticommute.
    pub fn anticommuting_positions(&self, other: &Self) -> u32 {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones()
    }

    /// Entrywise complex conjugate: `i^s → i^{-s}` and `Y → -Y`.
    pub fn conjugate(&self) -> Self {
        let ys = (self.x & self.z).count_ones() as u8;
        Self { phase: (4 - self.phase % 4 + 2 * ys) % 4, ..*self }
    }

    /// Adjoint; every `σ` is Hermitian so only the phase changes.
    pub fn adjoint(&self) -> Self {
        Self { phase: (4 - self.phase % 4) % 4, ..*self }
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let d = 1usize << self.n;
        let base = self.phase + (self.x & self.z).count_ones() as u8;
        let mut m = ComplexMatrix::zeros(d, d);
        for c in 0..d {
            let r = c ^ self.x as usize;
            let sign = 2 * ((self.z as usize & c).count_ones() % 2) as u8;
            m[(r, c)] = i_pow(base + sign);
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional `+`, `-`, `i`, `+i`, or `-i` prefix followed by
    /// characters from `IXYZ`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest)
        } else {
            (0, s)
        };
        let n = body.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::ParsePauli(format!("'{s}' has {n} qubits")));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (pos, ch) in body.chars().enumerate() {
            let bit = 1u64 << (n - 1 - pos);
            match ch {
                'I' => {}
                'X' => x |= bit,
                'Z' => z |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit;
                }
                other => return Err(Error::ParsePauli(format!("unexpected '{other}' in '{s}'"))),
            }
        }
        Self::new(n, x, z, phase)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["", "i", "-", "-i"][self.phase as usize % 4])?;
        for q in (0..self.n).rev() {
            let c = match self.axis(q) {
                None => 'I',
                Some(PauliAxis::X) => 'X',
                Some(PauliAxis::Y) => 'Y',
                Some(PauliAxis::Z) => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Per-position data of `[a, b] = (1 − Π_j τ_j)(S_{n−1} ⊗ … ⊗ S_0)`, where
/// `τ_j = ±1` records whether the factors commute and `S_j` is half their
/// anticommutator (τ = 1) or half their commutator (τ = −1).
#[derive(Clone, Debug)]
pub struct CommutatorStructure {
    pub commute: bool,
    pub tau: Vec<i8>,
    pub factors: Vec<ComplexMatrix>,
    pub prefactor: C64,
}

impl CommutatorStructure {
    /// Dense evaluation of the product formula.
    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(1);
        for s in self.factors.iter().rev() {
            m = kron(&m, s);
        }
        m.scale(self.prefactor)
    }
}

fn single_qubit(p: &PauliString, j: usize) -> ComplexMatrix {
    PauliString { n: 1, x: p.x >> j & 1, z: p.z >> j & 1, phase: 0 }.to_matrix()
}

pub fn pauli_commutes(a: &PauliString, b: &PauliString) -> Result<CommutatorStructure> {
    a.check_size(b)?;
    let mut tau = Vec::with_capacity(a.n);
    let mut factors = Vec::with_capacity(a.n);
    for j in 0..a.n {
        let (sa, sb) = (single_qubit(a, j), single_qubit(b, j));
        let comm = sa.commutator(&sb);
        if comm.max_abs() == 0.0 {
            tau.push(1);
            factors.push(sa.anticommutator(&sb).scale_real(0.5));
        } else {
            tau.push(-1);
            factors.push(comm.scale_real(0.5));
        }
    }
    let parity: i8 = tau.iter().product();
    debug_assert_eq!(parity == 1, a.anticommuting_positions(b).is_multiple_of(2));
    // Phases of the strings multiply the commutator bilinearly.
    let prefactor = i_pow(a.phase + b.phase) * (1.0 - parity as f64);
    Ok(CommutatorStructure { commute: parity == 1, tau, factors, prefactor })
}

/// `p_E(t) = Π_n (1 + (−1)^{[n∈E]} e^{−2γ_n t})/2`, indexed by the bit mask `E`.
///
/// Each string contributes `e^{−γt}(cosh(γt) + sinh(γt) Π^{⊗̄2})`, which is
/// where the factor 2 in the exponent comes from.
pub fn error_probabilities(gamma: &[f64], t: f64) -> Result<Vec<f64>> {
    if gamma.len() > MAX_STRINGS {
        return Err(Error::OutOfRange(format!("{} Pauli strings exceed the cap of {MAX_STRINGS}", gamma.len())));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if let Some(&g) = gamma.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::NegativeRate(g));
    }
    let factors: Vec<(f64, f64)> = gamma
        .iter()
        .map(|g| {
            let decay = (-2.0 * g * t).exp();
            ((1.0 + decay) / 2.0, -(-2.0 * g * t).exp_m1() / 2.0)
        })
        .collect();
    Ok((0..1usize << gamma.len())
        .map(|e| factors.iter().enumerate().map(|(n, (keep, flip))| if e >> n & 1 == 1 { flip } else { keep }).product())
        .collect())
}

/// Sums the rates of repeated strings. Signs and phases are ignored since
/// `L` and `e^{iφ}L` generate the same dissipator.
pub fn merge_duplicates(strings: &[PauliString], gamma: &[f64]) -> Result<(Vec<PauliString>, Vec<f64>)> {
    if strings.len() != gamma.len() {
        return Err(Error::DimensionMismatch(format!("{} strings, {} rates", strings.len(), gamma.len())));
    }
    let mut out: Vec<(PauliString, f64)> = Vec::new();
    for (s, &g) in strings.iter().zip(gamma) {
        let key = s.unsigned();
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 += g,
            None => out.push((key, g)),
        }
    }
    Ok(out.into_iter().unzip())
}

fn check_strings(strings: &[PauliString], gamma: &[f64]) -> Result<usize> {
    if strings.len() != gamma.len() {
        return Err(Error::DimensionMismatch(format!("{} strings, {} rates", strings.len(), gamma.len())));
    }
    let n = strings.first().map(|s| s.n).ok_or_else(|| Error::Config("no Pauli strings".into()))?;
    for (i, s) in strings.iter().enumerate() {
        strings[0].check_size(s)?;
        if strings[..i].iter().any(|o| o.unsigned() == s.unsigned()) {
            return Err(Error::DuplicatePauli(s.to_string()));
        }
    }
    Ok(n)
}

/// `Π_E = Π_{n∈E} Π_n` with factors in ascending `n`.
pub fn error_string(strings: &[PauliString], e: usize) -> Result<PauliString> {
    let n = strings.first().map(|s| s.n).ok_or_else(|| Error::Config("no Pauli strings".into()))?;
    strings
        .iter()
        .enumerate()
        .filter(|(i, _)| e >> i & 1 == 1)
        .try_fold(PauliString::identity(n)?, |acc, (_, s)| acc.multiply(s))
}

/// Lindblad system with `H = 0` and one jump operator per string.
pub fn pauli_system(strings: &[PauliString], gamma: &[f64]) -> Result<LindbladSystem> {
    let n = check_strings(strings, gamma)?;
    let d = 1usize << n;
    let ops = strings.iter().zip(gamma).map(|(s, &g)| LindbladOperator::new(s.to_matrix(), g)).collect();
    LindbladSystem::with_unit_hbar(ComplexMatrix::zeros(d, d), ops)
}

/// Kraus operators `√p_E Π_E` for every error set, indexed by `E`.
pub fn pauli_kraus_operators(strings: &[PauliString], gamma: &[f64], t: f64) -> Result<Vec<ComplexMatrix>> {
    check_strings(strings, gamma)?;
    let p = error_probabilities(gamma, t)?;
    p.iter()
        .enumerate()
        .map(|(e, pe)| Ok(error_string(strings, e)?.to_matrix().scale_real(pe.sqrt())))
        .collect()
}

/// One `(√p_E, circuit)` pair per error set. Each circuit applies `Π_E` as
/// single-qubit Pauli gates and carries no ancillas or time dependence.
pub fn build_pauli_kraus(strings: &[PauliString], gamma: &[f64], t: f64) -> Result<Vec<(f64, Circuit)>> {
    let n = check_strings(strings, gamma)?;
    let p = error_probabilities(gamma, t)?;
    p.iter()
        .enumerate()
        .map(|(e, pe)| {
            let pi = error_string(strings, e)?;
            let mut c = Circuit::new(n);
            c.gates = (0..n).filter_map(|q| pi.axis(q).map(|axis| Gate::Pauli { axis, qubit: q })).collect();
            c.weight = pe.sqrt();
            c.global_phase = pi.phase as f64 * std::f64::consts::FRAC_PI_2;
            Ok((pe.sqrt(), c))
        })
        .collect()
}

/// `Σ_E p_E(t) v_E` for per-error-set expectations `v_E = ⟨Π_E† Ô Π_E⟩`
/// computed once and reused at any time.
pub fn extrapolate(values: &[f64], gamma: &[f64], t: f64) -> Result<f64> {
    let p = error_probabilities(gamma, t)?;
    if p.len() != values.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} error sets", values.len(), p.len())));
    }
    Ok(p.iter().zip(values).map(|(p, v)| p * v).sum())
}
