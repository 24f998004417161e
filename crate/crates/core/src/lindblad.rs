//! Lindblad systems, their superoperators, case classification, and the
//! reference propagators.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{
    apply_superop, choi_matrix, conj_kron, kron, trace_distance, ComplexMatrix, KronMode, C64,
    STRUCTURE_TOL, ZERO,
};

#[derive(Clone, Debug)]
pub struct LindbladOperator {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

impl LindbladOperator {
    pub fn new(operator: ComplexMatrix, rate: f64) -> Self {
        Self { operator, rate }
    }

    /// Zero-rate and zero-matrix operators have no effect on the dynamics.
    pub fn is_active(&self) -> bool {
        self.rate > 0.0 && self.operator.max_abs() > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct LindbladSystem {
    hbar: f64,
    hamiltonian: ComplexMatrix,
    lindblads: Vec<LindbladOperator>,
}

impl LindbladSystem {
    pub fn new(hamiltonian: ComplexMatrix, lindblads: Vec<LindbladOperator>, hbar: f64) -> Result<Self> {
        let d = hamiltonian.require_square()?;
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::OutOfRange(format!("hbar must be positive, got {hbar}")));
        }
        let dev = hamiltonian.hermitian_deviation();
        if dev > STRUCTURE_TOL * hamiltonian.tol_scale() {
            return Err(Error::NotHermitian(dev));
        }
        for (n, l) in lindblads.iter().enumerate() {
            if l.operator.rows() != d || l.operator.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "Lindblad operator {n} is {}x{}, Hamiltonian is {d}x{d}",
                    l.operator.rows(),
                    l.operator.cols()
                )));
            }
            if l.rate < 0.0 || !l.rate.is_finite() {
                return Err(Error::NegativeRate(l.rate));
            }
        }
        Ok(Self { hbar, hamiltonian, lindblads })
    }

    /// System with `ħ = 1`.
    pub fn with_unit_hbar(hamiltonian: ComplexMatrix, lindblads: Vec<LindbladOperator>) -> Result<Self> {
        Self::new(hamiltonian, lindblads, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[LindbladOperator] {
        &self.lindblads
    }

    /// Indices of operators with `γ > 0` and `L ≠ 0`.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.lindblads.len()).filter(|&n| self.lindblads[n].is_active()).collect()
    }

    /// `Σ γ_n L_n† L_n`
    pub fn damping_operator(&self) -> ComplexMatrix {
        let mut g = ComplexMatrix::zeros(self.dim(), self.dim());
        for l in &self.lindblads {
            g += &l.operator.adjoint().matmul(&l.operator).scale_real(l.rate);
        }
        g
    }

    /// `V_H = H − (iħ/2) Σ γ_n L_n† L_n`
    pub fn effective_hamiltonian(&self) -> ComplexMatrix {
        &self.hamiltonian - &self.damping_operator().scale(C64::new(0.0, self.hbar / 2.0))
    }

    /// `Σ γ_n ‖L_n‖²_HS`, the bound on `‖𝓛‖_HS` used by the truncation estimate.
    pub fn l_super_norm_bound(&self) -> f64 {
        self.lindblads.iter().map(|l| l.rate * l.operator.hs_norm().powi(2)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SuperoperatorPair {
    pub h_super: ComplexMatrix,
    pub l_super: ComplexMatrix,
}

impl SuperoperatorPair {
    pub fn generator(&self) -> ComplexMatrix {
        &self.h_super + &self.l_super
    }
}

pub fn build_superoperators(sys: &LindbladSystem) -> SuperoperatorPair {
    let d = sys.dim();
    let a = sys.effective_hamiltonian().scale(C64::new(0.0, -1.0 / sys.hbar));
    let h_super = conj_kron(&a, KronMode::Sum).expect("square by construction");
    let mut l_super = ComplexMatrix::zeros(d * d, d * d);
    for l in &sys.lindblads {
        if l.rate != 0.0 {
            l_super += &conj_kron(&l.operator, KronMode::Product).expect("square").scale_real(l.rate);
        }
    }
    SuperoperatorPair { h_super, l_super }
}

/// `−(i/ħ)[H, ρ] + Σ γ_n (L_n ρ L_n† − ½{L_n†L_n, ρ})`
pub fn lindblad_rhs(sys: &LindbladSystem, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = sys.dim();
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, system dimension is {d}",
            rho.rows(),
            rho.cols()
        )));
    }
    let mut out = sys.hamiltonian.commutator(rho).scale(C64::new(0.0, -1.0 / sys.hbar));
    for l in &sys.lindblads {
        if l.rate == 0.0 {
            continue;
        }
        let ldag = l.operator.adjoint();
        let jump = l.operator.matmul(rho).matmul(&ldag);
        let anti = ldag.matmul(&l.operator).anticommutator(rho).scale_real(0.5);
        out += &(&jump - &anti).scale_real(l.rate);
    }
    Ok(out)
}

/// Conditions checked by [`classify`]. `SuperFit` is the direct fit of
/// `[𝓗, 𝓛] = α𝓛 + c`; `NegativeAlpha` rejects fits with `α < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    HamiltonianCommutes,
    DampingCommutes,
    SharedNu,
    SharedLambda,
    SuperFit,
    NegativeAlpha,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::HamiltonianCommutes => "(i) [H, L†L] = 0",
            Condition::DampingCommutes => "(ii) [L†L, L'†L'] = 0",
            Condition::SharedNu => "(iii) [H, L] = νL",
            Condition::SharedLambda => "(iv) Σγ[L'†L', L] = λL",
            Condition::SuperFit => "[𝓗, 𝓛] = α𝓛 + c",
            Condition::NegativeAlpha => "α ≥ 0",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    CaseI,
    CaseII,
    Unsupported,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::CaseI => "CaseI",
            CaseLabel::CaseII => "CaseII",
            CaseLabel::Unsupported => "Unsupported",
        })
    }
}

/// Relative residuals of each check; `None` when the check was not reached.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub hamiltonian_commutes: Option<f64>,
    pub damping_commutes: Option<f64>,
    pub shared_nu: Option<f64>,
    pub shared_lambda: Option<f64>,
    pub super_fit: Option<f64>,
}

/// Which derivation produced `α` and `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitPath {
    Trivial,
    Operator,
    Superoperator,
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseClassification {
    pub label: CaseLabel,
    pub alpha: f64,
    pub c: f64,
    #[serde(serialize_with = "serialize_opt_complex")]
    pub nu: Option<C64>,
    #[serde(serialize_with = "serialize_opt_complex")]
    pub lambda: Option<C64>,
    pub residuals: Residuals,
    pub path: FitPath,
    /// First failing condition and its residual when `label` is `Unsupported`.
    pub failure: Option<(Condition, f64)>,
}

fn serialize_opt_complex<S: serde::Serializer>(v: &Option<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(z) => s.collect_seq([z.re, z.im]),
        None => s.serialize_none(),
    }
}

impl CaseClassification {
    pub fn is_supported(&self) -> bool {
        self.label != CaseLabel::Unsupported
    }

    /// Converts an `Unsupported` label into the corresponding error.
    pub fn require_supported(&self) -> Result<()> {
        match (self.label, self.failure) {
            (CaseLabel::Unsupported, Some((condition, residual))) => Err(Error::Unsupported { condition, residual }),
            (CaseLabel::Unsupported, None) => {
                Err(Error::Unsupported { condition: Condition::SuperFit, residual: f64::NAN })
            }
            _ => Ok(()),
        }
    }
}

/// `‖[A, B]‖ / (‖A‖‖B‖)`, zero when either operand vanishes.
fn relative_commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = a.hs_norm() * b.hs_norm();
    if scale == 0.0 {
        0.0
    } else {
        a.commutator(b).hs_norm() / scale
    }
}

/// Projects `[A, L]` onto `L`, returning the coefficient and the relative
/// residual of `[A, L] − μL`.
fn eigen_commutator(a: &ComplexMatrix, l: &ComplexMatrix) -> (C64, f64) {
    let comm = a.commutator(l);
    let ln2 = l.hs_norm().powi(2);
    let mu = l.hs_inner(&comm) / ln2;
    let resid = (&comm - &l.scale(mu)).hs_norm();
    let scale = (a.hs_norm() * l.hs_norm()).max(f64::MIN_POSITIVE);
    (mu, resid / scale)
}

/// Checks that all projections agree: `|μ_n − μ_0| ≤ tol·max(|μ_n|, 1)`.
/// Returns the worst relative disagreement.
fn shared_spread(values: &[C64]) -> f64 {
    values.iter().map(|v| (v - values[0]).norm() / v.norm().max(1.0)).fold(0.0, f64::max)
}

/// Classifies a system into Case I or Case II, or reports the first failing
/// condition.
///
/// The operator conditions (i)–(iv) are checked first; if they hold,
/// `α = 2·Im ν/ħ − Re λ` and `c = 0`. Otherwise `[𝓗, 𝓛] = α𝓛 + c·𝟙` is fitted
/// by least squares on the superoperators. A fit is accepted when its
/// residual is at most `tol·max(‖[𝓗,𝓛]‖, ‖𝓗‖‖𝓛‖)`.
pub fn classify(sys: &LindbladSystem, tol: f64) -> Result<CaseClassification> {
    if let Some(l) = sys.lindblads.iter().find(|l| l.rate < 0.0) {
        return Err(Error::NegativeRate(l.rate));
    }
    let active: Vec<&LindbladOperator> = sys.lindblads.iter().filter(|l| l.is_active()).collect();
    let mut residuals = Residuals::default();
    if active.is_empty() {
        return Ok(CaseClassification {
            label: CaseLabel::CaseI,
            alpha: 0.0,
            c: 0.0,
            nu: None,
            lambda: None,
            residuals,
            path: FitPath::Trivial,
            failure: None,
        });
    }

    let op_result = operator_conditions(sys, &active, tol, &mut residuals);
    let supers = build_superoperators(sys);
    let fit = superoperator_fit(&supers, tol);
    residuals.super_fit = Some(fit.residual);

    let h_norm = supers.h_super.hs_norm();
    let label_for = |alpha: f64| {
        if alpha <= tol * h_norm.max(1.0) {
            CaseLabel::CaseI
        } else {
            CaseLabel::CaseII
        }
    };
    let unsupported = |residuals: Residuals, nu, lambda, failure| CaseClassification {
        label: CaseLabel::Unsupported,
        alpha: 0.0,
        c: 0.0,
        nu,
        lambda,
        residuals,
        path: FitPath::None,
        failure: Some(failure),
    };

    let (alpha, c, nu, lambda, path) = match op_result {
        Ok((nu, lambda)) => {
            let alpha = 2.0 * nu.im / sys.hbar - lambda.re;
            (alpha, 0.0, Some(nu), Some(lambda), FitPath::Operator)
        }
        Err((condition, resid, nu, lambda)) => {
            if fit.residual <= tol {
                (fit.alpha, fit.c, nu, lambda, FitPath::Superoperator)
            } else {
                return Ok(unsupported(residuals, nu, lambda, (condition, resid)));
            }
        }
    };

    let floor = tol * h_norm.max(1.0);
    if alpha < -floor {
        return Ok(unsupported(residuals, nu, lambda, (Condition::NegativeAlpha, alpha)));
    }
    if c.abs() > floor {
        return Ok(unsupported(residuals, nu, lambda, (Condition::SuperFit, c)));
    }
    let label = label_for(alpha);
    Ok(CaseClassification {
        label,
        alpha: if label == CaseLabel::CaseI { 0.0 } else { alpha },
        c: 0.0,
        nu,
        lambda,
        residuals,
        path,
        failure: None,
    })
}

type OperatorFailure = (Condition, f64, Option<C64>, Option<C64>);

fn operator_conditions(
    sys: &LindbladSystem,
    active: &[&LindbladOperator],
    tol: f64,
    residuals: &mut Residuals,
) -> std::result::Result<(C64, C64), OperatorFailure> {
    let h = &sys.hamiltonian;
    let gram: Vec<ComplexMatrix> = active.iter().map(|l| l.operator.adjoint().matmul(&l.operator)).collect();

    let r1 = gram.iter().map(|g| relative_commutator(h, g)).fold(0.0, f64::max);
    residuals.hamiltonian_commutes = Some(r1);
    if r1 > tol {
        return Err((Condition::HamiltonianCommutes, r1, None, None));
    }

    let mut r2: f64 = 0.0;
    for i in 0..gram.len() {
        for j in i + 1..gram.len() {
            r2 = r2.max(relative_commutator(&gram[i], &gram[j]));
        }
    }
    residuals.damping_commutes = Some(r2);
    if r2 > tol {
        return Err((Condition::DampingCommutes, r2, None, None));
    }

    let (nus, nu_resid): (Vec<C64>, Vec<f64>) = active.iter().map(|l| eigen_commutator(h, &l.operator)).unzip();
    let r3 = nu_resid.iter().copied().fold(shared_spread(&nus), f64::max);
    residuals.shared_nu = Some(r3);
    let nu = nus[0];
    if r3 > tol {
        return Err((Condition::SharedNu, r3, Some(nu), None));
    }

    let mut damping = ComplexMatrix::zeros(sys.dim(), sys.dim());
    for (l, g) in active.iter().zip(&gram) {
        damping += &g.scale_real(l.rate);
    }
    let (lambdas, lambda_resid): (Vec<C64>, Vec<f64>) =
        active.iter().map(|l| eigen_commutator(&damping, &l.operator)).unzip();
    let r4 = lambda_resid.iter().copied().fold(shared_spread(&lambdas), f64::max);
    residuals.shared_lambda = Some(r4);
    let lambda = lambdas[0];
    if r4 > tol {
        return Err((Condition::SharedLambda, r4, Some(nu), Some(lambda)));
    }
    Ok((nu, lambda))
}

struct SuperFit {
    alpha: f64,
    c: f64,
    /// Residual relative to `max(‖[𝓗,𝓛]‖, ‖𝓗‖‖𝓛‖)`.
    residual: f64,
}

/// Least-squares fit of `[𝓗, 𝓛] ≈ α𝓛 + c·𝟙`.
fn superoperator_fit(supers: &SuperoperatorPair, _tol: f64) -> SuperFit {
    let l = &supers.l_super;
    let comm = supers.h_super.commutator(l);
    let n = l.rows();
    let id = ComplexMatrix::identity(n);
    let ll = l.hs_inner(l);
    let li = l.trace().conj();
    let ii = C64::new(n as f64, 0.0);
    let lc = l.hs_inner(&comm);
    let ic = comm.trace();
    let det = ll * ii - li * li.conj();
    let (alpha, c) = if det.norm() > 1e-12 * ll.norm() * ii.norm() {
        ((ii * lc - li * ic) / det, (ll * ic - li.conj() * lc) / det)
    } else if ll.norm() > 0.0 {
        // 𝓛 ∝ 𝟙: the two unknowns are degenerate, keep only c.
        (ZERO, ic / ii)
    } else {
        (ZERO, ZERO)
    };
    let (alpha, c) = (alpha.re, c.re);
    let model = &l.scale_real(alpha) + &id.scale_real(c);
    let scale = comm.hs_norm().max(supers.h_super.hs_norm() * l.hs_norm());
    let residual = if scale == 0.0 { 0.0 } else { (&comm - &model).hs_norm() / scale };
    SuperFit { alpha, c, residual }
}

/// `exp(t(𝓗 + 𝓛))`
pub fn exact_propagator(sys: &LindbladSystem, t: f64) -> Result<ComplexMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    build_superoperators(sys).generator().scale_real(t).expm()
}

/// Applies a propagator to a density matrix.
pub fn propagate(propagator: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    apply_superop(propagator, rho)
}

/// Checks that `rho` is Hermitian, PSD, and unit-trace, each to `tol`.
pub fn check_density(rho: &ComplexMatrix, tol: f64) -> Result<()> {
    rho.require_square()?;
    let dev = rho.hermitian_deviation();
    if dev > tol {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidState(format!("trace is {tr}")));
    }
    let min = rho.min_eigenvalue_hermitian()?;
    if min < -tol {
        return Err(Error::InvalidState(format!("eigenvalue {min:e} is negative")));
    }
    Ok(())
}

/// Integrates the master equation with `steps` classical RK4 steps.
pub fn rk4_evolve(sys: &LindbladSystem, rho0: &ComplexMatrix, t: f64, steps: usize) -> Result<ComplexMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if steps == 0 {
        return Err(Error::OutOfRange("RK4 needs at least one step".into()));
    }
    check_density(rho0, 1e-9)?;
    let dt = t / steps as f64;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = lindblad_rhs(sys, &rho)?;
        let k2 = lindblad_rhs(sys, &(&rho + &k1.scale_real(dt / 2.0)))?;
        let k3 = lindblad_rhs(sys, &(&rho + &k2.scale_real(dt / 2.0)))?;
        let k4 = lindblad_rhs(sys, &(&rho + &k3.scale_real(dt)))?;
        let incr = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
        rho += &incr.scale_real(dt / 6.0);
    }
    Ok(rho)
}

/// Largest deviation of `Tr E(|k⟩⟨l|)` from `δ_kl`.
pub fn trace_preservation_defect(superop: &ComplexMatrix) -> Result<f64> {
    let dd = superop.require_square()?;
    let d = (dd as f64).sqrt().round() as usize;
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for l in 0..d {
            let tr: C64 = (0..d).map(|i| superop[(i * d + i, k * d + l)]).sum();
            let target = if k == l { 1.0 } else { 0.0 };
            worst = worst.max((tr - target).norm());
        }
    }
    Ok(worst)
}

/// Smallest eigenvalue of the Choi matrix.
pub fn choi_min_eigenvalue(superop: &ComplexMatrix) -> Result<f64> {
    choi_matrix(superop)?.min_eigenvalue_hermitian()
}

/// Superoperator `Σ K⊗K̄` of a Kraus set.
pub fn kraus_superop(kraus: &[ComplexMatrix], dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim * dim, dim * dim);
    for k in kraus {
        out += &kron(k, &k.conj());
    }
    out
}

/// Trace distance between `E(ρ)` under two superoperators.
pub fn state_distance(a: &ComplexMatrix, b: &ComplexMatrix, rho: &ComplexMatrix) -> Result<f64> {
    trace_distance(&apply_superop(a, rho)?, &apply_superop(b, rho)?)
}
