//! Damped harmonic oscillator truncated to `2^N` levels.
//!
//! With `H = ħω(½ + N̂)` and `L = â` at rate `γ`, the Kraus series is exact
//! after `m_max + 1 = 2^N` terms because the truncated `â` is nilpotent.

use serde::{Deserialize, Serialize};

use crate::circuit::{contraction_gates, diagonal_contraction_params, Circuit, Gate};
use crate::error::{Error, Result};
use crate::kraus::ln_factorial;
use crate::lindblad::{LindbladOperator, LindbladSystem};
use crate::tensor::{ComplexMatrix, C64, ZERO};

pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QhoConfig {
    pub n_qubits: usize,
    pub omega: f64,
    pub gamma: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
}

fn unit() -> f64 {
    1.0
}

impl QhoConfig {
    pub fn new(n_qubits: usize, omega: f64, gamma: f64) -> Result<Self> {
        let cfg = Self { n_qubits, omega, gamma, hbar: 1.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::OutOfRange(format!("oscillator needs 1..={MAX_QUBITS} qubits, got {}", self.n_qubits)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::NegativeRate(self.gamma));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::Config(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn m_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn system(&self) -> Result<LindbladSystem> {
        self.validate()?;
        let d = self.dim();
        let h = ComplexMatrix::from_real_diag(&(0..d).map(|n| self.hbar * self.omega * (0.5 + n as f64)).collect::<Vec<_>>());
        LindbladSystem::new(h, vec![LindbladOperator::new(truncated_lowering(self.m_max())?, self.gamma)], self.hbar)
    }

    fn check_order(&self, m: usize) -> Result<()> {
        if m > self.m_max() {
            return Err(Error::OutOfRange(format!("order {m} exceeds m_max = {}", self.m_max())));
        }
        Ok(())
    }
}

/// `â` on `m_max + 1` levels: `√1 … √m_max` on the superdiagonal.
pub fn truncated_lowering(m_max: usize) -> Result<ComplexMatrix> {
    if m_max == 0 {
        return Err(Error::OutOfRange("m_max must be at least 1".into()));
    }
    let d = m_max + 1;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO }))
}

pub fn number_operator(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&(0..d).map(|n| n as f64).collect::<Vec<_>>())
}

fn ln_one_minus_decay(gamma: f64, t: f64) -> f64 {
    (-(-gamma * t).exp_m1()).ln()
}

/// `e^{−t[γN̂/2 + iω(½+N̂)]} √((1−e^{−γt})^m / m!) â^m`
pub fn qho_kraus_matrix(cfg: &QhoConfig, m: usize, t: f64) -> Result<ComplexMatrix> {
    cfg.validate()?;
    cfg.check_order(m)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let d = cfg.dim();
    let dm = qho_diagonal_dm(cfg, m, t)?;
    let mut k = ComplexMatrix::zeros(d, d);
    for n in 0..d - m {
        let phase = C64::from_polar(1.0, -cfg.omega * t * (0.5 + n as f64));
        k[(n, n + m)] = phase * (dm.a * dm.lambda[n]);
    }
    Ok(k)
}

/// Diagonal factor of `K_m = W(t) D_m SUB_m`, split as `D_m = a_m Λ_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalFactor {
    pub lambda: Vec<f64>,
    pub a: f64,
}

/// `D_m[n] = e^{−nγt/2} √((1−e^{−γt})^m (n+m)! / (n! m!))` for
/// `n ≤ 2^N − 1 − m`, zero above; evaluated in log space.
pub fn qho_diagonal_dm(cfg: &QhoConfig, m: usize, t: f64) -> Result<DiagonalFactor> {
    cfg.validate()?;
    cfg.check_order(m)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let d = cfg.dim();
    let ln_flip = if m == 0 { 0.0 } else { m as f64 * ln_one_minus_decay(cfg.gamma, t) };
    let entries: Vec<f64> = (0..d)
        .map(|n| {
            if n + m >= d {
                return 0.0;
            }
            let ln_binom = ln_factorial(n + m) - ln_factorial(n) - ln_factorial(m);
            (-(n as f64) * cfg.gamma * t / 2.0 + 0.5 * (ln_flip + ln_binom)).exp()
        })
        .collect();
    let a = entries.iter().copied().fold(0.0, f64::max);
    let lambda = if a > 0.0 { entries.iter().map(|e| (e / a).min(1.0)).collect() } else { vec![0.0; d] };
    Ok(DiagonalFactor { lambda, a })
}

/// `SUB_m`, then the contraction ladder for `Λ_m` on one ancilla, then
/// `W(t)` as one phase gate per qubit with `θ = 2^k ωt`.
pub fn build_qho_circuit(cfg: &QhoConfig, m: usize, t: f64) -> Result<Circuit> {
    let dm = qho_diagonal_dm(cfg, m, t)?;
    let n = cfg.n_qubits;
    let d = cfg.dim();
    let qubits: Vec<usize> = (0..n).collect();
    let mut c = Circuit::new(n);
    let anc = c.add_sznagy_ancilla();
    c.gates.push(Gate::Permutation { mapping: (0..d).map(|j| (j + d - m) % d).collect(), qubits: qubits.clone() });
    c.gates.extend(contraction_gates(&diagonal_contraction_params(&dm.lambda)?, &qubits, anc));
    c.gates.extend((0..n).map(|k| Gate::Phase { theta: (1u64 << k) as f64 * cfg.omega * t, qubit: k }));
    c.weight = dm.a;
    c.global_phase = -cfg.omega * t / 2.0;
    Ok(c)
}

pub fn qho_kraus_operators(cfg: &QhoConfig, t: f64) -> Result<Vec<ComplexMatrix>> {
    (0..=cfg.m_max()).map(|m| qho_kraus_matrix(cfg, m, t)).collect()
}

pub fn build_qho_circuits(cfg: &QhoConfig, t: f64) -> Result<Vec<Circuit>> {
    (0..=cfg.m_max()).map(|m| build_qho_circuit(cfg, m, t)).collect()
}
