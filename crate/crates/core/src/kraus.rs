//! Closed-form Kraus series for Case I and Case II systems.
//!
//! For `[𝓗, 𝓛] = α𝓛 + c` the propagator factors as
//! `e^{t(𝓗+𝓛)} = h(t) e^{t𝓗} e^{f(t)𝓛}`, so the Kraus operators are
//!
//! ```text
//! K_{m,k}(t) = e^{−itV_H/ħ} √(h f^m / m!) √γ_{k_1} L_{k_1} ⋯ √γ_{k_m} L_{k_m}
//! ```
//!
//! with `h`, `f` given by [`ScalarSchedule`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{build_superoperators, CaseClassification, CaseLabel, LindbladSystem};
use crate::tensor::{kron, ComplexMatrix, C64};

/// Default cap on the number of explicitly enumerated Kraus terms.
pub const DEFAULT_TERM_CAP: usize = 1_000_000;

/// Upper limit of the truncation-order scan.
pub const ORDER_SCAN_CAP: usize = 1000;

/// Below this value of `αt` the schedule functions switch to Taylor series.
const SMALL_ALPHA_T: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarSchedule {
    label: CaseLabel,
    alpha: f64,
    c: f64,
}

impl ScalarSchedule {
    pub fn new(cls: &CaseClassification) -> Result<Self> {
        cls.require_supported()?;
        Ok(Self { label: cls.label, alpha: cls.alpha, c: cls.c })
    }

    /// Case II schedule with the given `α > 0` and `c`.
    pub fn case_ii(alpha: f64, c: f64) -> Self {
        Self { label: CaseLabel::CaseII, alpha, c }
    }

    pub fn case_i(c: f64) -> Self {
        Self { label: CaseLabel::CaseI, alpha: 0.0, c }
    }

    pub fn label(&self) -> CaseLabel {
        self.label
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self, t: f64) -> f64 {
        match self.label {
            CaseLabel::CaseII => (self.c * self.g(t)).exp(),
            _ => (-self.c * t * t / 2.0).exp(),
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self.label {
            CaseLabel::CaseII => f_function(t, self.alpha),
            _ => t,
        }
    }

    /// `g(t, α)`; in Case I this is the `α → 0` limit `−t²/2`.
    pub fn g(&self, t: f64) -> f64 {
        match self.label {
            CaseLabel::CaseII => g_function(t, self.alpha),
            _ => -t * t / 2.0,
        }
    }
}

/// `(1 − e^{−αt})/α`
pub fn f_function(t: f64, alpha: f64) -> f64 {
    let x = alpha * t;
    if x.abs() < SMALL_ALPHA_T {
        t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        -(-x).exp_m1() / alpha
    }
}

/// `−(e^{−αt} + αt − 1)/α²`
pub fn g_function(t: f64, alpha: f64) -> f64 {
    let x = alpha * t;
    if x.abs() < SMALL_ALPHA_T {
        -t * t * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0)
    } else {
        -((-x).exp_m1() + x) / (alpha * alpha)
    }
}

/// `ln m!`
pub fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// `√(h f^m / m!)`
pub fn order_coefficient(sched: &ScalarSchedule, m: usize, t: f64) -> f64 {
    let f = sched.f(t);
    if m == 0 {
        return sched.h(t).sqrt();
    }
    if f == 0.0 {
        return 0.0;
    }
    (0.5 * (sched.h(t).ln() + m as f64 * f.ln() - ln_factorial(m))).exp()
}

/// One summand of the series: the normalized operator product and the
/// time-independent part of its weight.
#[derive(Clone, Debug)]
pub struct KrausTerm {
    pub m: usize,
    /// Indices into the system's Lindblad list, in product order.
    pub k: Vec<usize>,
    /// `Π_j L_{k_j}/‖L_{k_j}‖_op`
    pub base: ComplexMatrix,
    /// `Π_j √γ_{k_j} ‖L_{k_j}‖_op`
    pub scale: f64,
    pub multiplicity: u64,
}

impl KrausTerm {
    /// `a(t) = √(h f^m / m!) Π √γ ‖L‖_op`, so that `a(t) e^{−itV_H/ħ} base = K_{m,k}(t)`.
    pub fn weight(&self, sched: &ScalarSchedule, t: f64) -> f64 {
        order_coefficient(sched, self.m, t) * self.scale
    }
}

/// `exp(−itV_H/ħ)`
pub fn effective_evolution(sys: &LindbladSystem, t: f64) -> Result<ComplexMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    sys.effective_hamiltonian().scale(C64::new(0.0, -t / sys.hbar())).expm()
}

fn check_indices(sys: &LindbladSystem, k: &[usize]) -> Result<()> {
    if let Some(&bad) = k.iter().find(|&&i| i >= sys.lindblads().len()) {
        return Err(Error::OutOfRange(format!(
            "Lindblad index {bad} out of range for {} operators",
            sys.lindblads().len()
        )));
    }
    Ok(())
}

/// `Π_j √γ_{k_j} L_{k_j}`
fn jump_product(sys: &LindbladSystem, k: &[usize]) -> ComplexMatrix {
    let mut p = ComplexMatrix::identity(sys.dim());
    for &i in k {
        let l = &sys.lindblads()[i];
        p = p.matmul(&l.operator.scale_real(l.rate.sqrt()));
    }
    p
}

/// Matrix of `K_{m,k}(t)`; `k` holds zero-based Lindblad indices.
pub fn kraus_operator(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    m: usize,
    k: &[usize],
    t: f64,
) -> Result<ComplexMatrix> {
    let sched = ScalarSchedule::new(cls)?;
    if k.len() != m {
        return Err(Error::DimensionMismatch(format!("order {m} with {} indices", k.len())));
    }
    check_indices(sys, k)?;
    let u = effective_evolution(sys, t)?;
    Ok(u.matmul(&jump_product(sys, k)).scale_real(order_coefficient(&sched, m, t)))
}

/// All index vectors of length `m` over `alphabet`, in lexicographic order.
pub fn index_vectors(alphabet: &[usize], m: usize) -> Vec<Vec<usize>> {
    let n = alphabet.len();
    if m == 0 {
        return vec![vec![]];
    }
    if n == 0 {
        return vec![];
    }
    let total = n.pow(m as u32);
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; m];
    for _ in 0..total {
        out.push(digits.iter().map(|&d| alphabet[d]).collect());
        for pos in (0..m).rev() {
            digits[pos] += 1;
            if digits[pos] < n {
                break;
            }
            digits[pos] = 0;
        }
    }
    out
}

/// Nondecreasing index vectors of length `m` over `alphabet` with their
/// multinomial multiplicities, in lexicographic order.
fn sorted_index_vectors(alphabet: &[usize], m: usize) -> Vec<(Vec<usize>, u64)> {
    fn rec(alphabet: &[usize], start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..alphabet.len() {
            cur.push(alphabet[i]);
            rec(alphabet, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut reps = Vec::new();
    if m == 0 || !alphabet.is_empty() {
        rec(alphabet, 0, m, &mut Vec::new(), &mut reps);
    }
    reps.into_iter()
        .map(|k| {
            let mult = multinomial(&k);
            (k, mult)
        })
        .collect()
}

/// `m! / Π n_i!` for the occupation counts of a sorted index vector.
fn multinomial(sorted: &[usize]) -> u64 {
    let mut result: u128 = 1;
    let mut seen = 0u128;
    let mut run = 0u128;
    for (pos, &v) in sorted.iter().enumerate() {
        if pos > 0 && sorted[pos - 1] == v {
            run += 1;
        } else {
            run = 1;
        }
        seen += 1;
        result = result * seen / run;
    }
    result as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedIndex {
    pub k: Vec<usize>,
    pub multiplicity: u64,
}

/// Groups index vectors of each order `m ≤ max_order` by occupation counts.
///
/// Requires the active superoperators `L_i ⊗ L̄_i` to commute pairwise.
pub fn reduce_commuting(sys: &LindbladSystem, max_order: usize) -> Result<Vec<ReducedIndex>> {
    let active = sys.active_indices();
    check_superops_commute(sys, &active)?;
    let mut out = Vec::new();
    for m in 0..=max_order {
        for (k, multiplicity) in sorted_index_vectors(&active, m) {
            out.push(ReducedIndex { k, multiplicity });
        }
    }
    Ok(out)
}

fn check_superops_commute(sys: &LindbladSystem, active: &[usize]) -> Result<()> {
    let supers: Vec<ComplexMatrix> = active
        .iter()
        .map(|&i| {
            let l = &sys.lindblads()[i].operator;
            kron(l, &l.conj())
        })
        .collect();
    for a in 0..supers.len() {
        for b in a + 1..supers.len() {
            let comm = supers[a].commutator(&supers[b]);
            let scale = supers[a].tol_scale() * supers[b].tol_scale();
            if comm.max_abs() > 1e-10 * scale {
                return Err(Error::NonCommuting(active[a], active[b]));
            }
        }
    }
    Ok(())
}

/// Whether every pair of active Lindblad superoperators commutes.
pub fn superops_commute(sys: &LindbladSystem) -> bool {
    check_superops_commute(sys, &sys.active_indices()).is_ok()
}

/// Builds the terms up to `max_order`. With `reduce`, commuting systems are
/// grouped by occupation counts; otherwise every index vector is listed.
pub fn kraus_terms(sys: &LindbladSystem, max_order: usize, reduce: bool, cap: usize) -> Result<Vec<KrausTerm>> {
    let active = sys.active_indices();
    let indices: Vec<ReducedIndex> = if reduce {
        let count: u128 = (0..=max_order).map(|m| multiset_count(active.len(), m)).sum();
        if count > cap as u128 {
            return Err(Error::TermCap { count, cap });
        }
        reduce_commuting(sys, max_order)?
    } else {
        let count = full_term_count(active.len(), max_order);
        if count > cap as u128 {
            return Err(Error::TermCap { count, cap });
        }
        (0..=max_order)
            .flat_map(|m| index_vectors(&active, m))
            .map(|k| ReducedIndex { k, multiplicity: 1 })
            .collect()
    };
    let norms: Vec<f64> = sys.lindblads().iter().map(|l| l.operator.op_norm()).collect();
    let normalized: Vec<ComplexMatrix> = sys
        .lindblads()
        .iter()
        .zip(&norms)
        .map(|(l, &n)| if n > 0.0 { l.operator.scale_real(1.0 / n) } else { l.operator.clone() })
        .collect();
    Ok(indices
        .into_par_iter()
        .map(|ri| {
            let mut base = ComplexMatrix::identity(sys.dim());
            let mut scale = 1.0;
            for &i in &ri.k {
                base = base.matmul(&normalized[i]);
                scale *= sys.lindblads()[i].rate.sqrt() * norms[i];
            }
            KrausTerm { m: ri.k.len(), k: ri.k, base, scale, multiplicity: ri.multiplicity }
        })
        .collect())
}

/// `Σ_{m≤M} n^m`
pub fn full_term_count(n: usize, max_order: usize) -> u128 {
    let mut total: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..=max_order {
        total = total.saturating_add(pow);
        pow = pow.saturating_mul(n as u128);
    }
    total
}

/// Number of multisets of size `m` from `n` items.
fn multiset_count(n: usize, m: usize) -> u128 {
    if n == 0 {
        return u128::from(m == 0);
    }
    let mut c: u128 = 1;
    for i in 0..m as u128 {
        c = c.saturating_mul(n as u128 + i) / (i + 1);
    }
    c
}

#[derive(Clone, Copy, Debug)]
pub struct SeriesOptions {
    pub cap: usize,
    /// Group commuting index vectors when the system allows it.
    pub reduce: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_TERM_CAP, reduce: false }
    }
}

/// `ρ_M(t) = Σ_{m≤M} Σ_k K_{m,k} ρ0 K_{m,k}†`, accumulated in lexicographic
/// `(m, k)` order.
pub fn evaluate_series(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    rho0: &ComplexMatrix,
    t: f64,
    max_order: usize,
) -> Result<ComplexMatrix> {
    evaluate_series_with(sys, cls, rho0, t, max_order, SeriesOptions::default())
}

pub fn evaluate_series_with(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    rho0: &ComplexMatrix,
    t: f64,
    max_order: usize,
    opts: SeriesOptions,
) -> Result<ComplexMatrix> {
    let sched = ScalarSchedule::new(cls)?;
    let d = sys.dim();
    if rho0.rows() != d || rho0.cols() != d {
        return Err(Error::DimensionMismatch(format!("state is {}x{}, system is {d}", rho0.rows(), rho0.cols())));
    }
    let u = effective_evolution(sys, t)?;
    let reduce = opts.reduce && superops_commute(sys);
    let terms = kraus_terms(sys, max_order, reduce, opts.cap)?;
    let contributions: Vec<ComplexMatrix> = terms
        .par_iter()
        .map(|term| {
            let a = term.weight(&sched, t);
            if a == 0.0 {
                return ComplexMatrix::zeros(d, d);
            }
            let k = term.base.scale_real(a);
            k.matmul(rho0).matmul(&k.adjoint()).scale_real(term.multiplicity as f64)
        })
        .collect();
    let mut inner = ComplexMatrix::zeros(d, d);
    for c in &contributions {
        inner += c;
    }
    let out = u.matmul(&inner).matmul(&u.adjoint());
    Ok(hermitize(&out))
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Explicit Kraus operators `K_{m,k}(t)` for all terms up to `max_order`,
/// each paired with its multiplicity.
pub fn kraus_operators(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    t: f64,
    max_order: usize,
    opts: SeriesOptions,
) -> Result<Vec<(ComplexMatrix, u64)>> {
    let sched = ScalarSchedule::new(cls)?;
    let u = effective_evolution(sys, t)?;
    let reduce = opts.reduce && superops_commute(sys);
    let terms = kraus_terms(sys, max_order, reduce, opts.cap)?;
    Ok(terms
        .par_iter()
        .map(|term| (u.matmul(&term.base).scale_real(term.weight(&sched, t)), term.multiplicity))
        .collect())
}

/// Superoperator `Σ c K⊗K̄` of a weighted Kraus set.
pub fn channel_superop(kraus: &[(ComplexMatrix, u64)], dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim * dim, dim * dim);
    for (k, mult) in kraus {
        out += &kron(k, &k.conj()).scale_real(*mult as f64);
    }
    out
}

/// `Σ c K†K`
pub fn completeness(kraus: &[(ComplexMatrix, u64)], dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (k, mult) in kraus {
        out += &k.adjoint().matmul(k).scale_real(*mult as f64);
    }
    out
}

/// Ingredients of the truncation bound at a fixed time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundContext {
    /// `‖e^{t𝓗}‖`
    pub propagator_norm: f64,
    pub h: f64,
    /// `f(t) Σ γ ‖L‖²_HS`
    pub x: f64,
}

impl BoundContext {
    pub fn new(sys: &LindbladSystem, cls: &CaseClassification, t: f64) -> Result<Self> {
        let sched = ScalarSchedule::new(cls)?;
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let x = sched.f(t) * sys.l_super_norm_bound();
        Ok(Self { propagator_norm: propagator_norm(sys, t)?, h: sched.h(t), x })
    }

    /// `C h η x^{M+1}/(M+1)!` with `η = 1/(1 − x/(M+1))`.
    pub fn bound(&self, order: usize) -> Result<f64> {
        if self.x == 0.0 {
            return Ok(0.0);
        }
        let n = (order + 1) as f64;
        if self.x >= n {
            return Err(Error::BoundNotApplicable { order, x: self.x });
        }
        let eta = 1.0 / (1.0 - self.x / n);
        let log = (self.propagator_norm * self.h * eta).ln() + n * self.x.ln() - ln_factorial(order + 1);
        Ok(log.exp())
    }
}

/// `‖e^{t𝓗}‖` (operator norm).
///
/// For normal `V_H` this equals `e^{−tλ_L}` with `λ_L` the smallest
/// eigenvalue of `Σ γ L†L`; otherwise it is computed from the dense
/// exponential.
pub fn propagator_norm(sys: &LindbladSystem, t: f64) -> Result<f64> {
    let vh = sys.effective_hamiltonian();
    if vh.is_normal(1e-9) {
        let lambda_l = sys.damping_operator().min_eigenvalue_hermitian()?;
        return Ok((-t * lambda_l).exp());
    }
    let h_super = build_superoperators(sys).h_super;
    Ok(h_super.scale_real(t).expm()?.op_norm())
}

/// Truncation error bound `‖ρ(t) − ρ_M(t)‖ ≤ ε(M)`.
pub fn error_bound(sys: &LindbladSystem, cls: &CaseClassification, t: f64, order: usize) -> Result<f64> {
    BoundContext::new(sys, cls, t)?.bound(order)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticOrder {
    /// `e x^{1+δ}`
    pub m1: f64,
    /// `ln(C h/ε) / (δ ln x)`
    pub m2: f64,
    /// `max(⌈m1⌉, ⌈m2⌉)`
    pub order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationOrder {
    /// Smallest `M` whose bound is at most `ε`.
    pub order: usize,
    pub bound: f64,
    /// Closed-form sufficient order, available when `x > 1`.
    pub analytic: Option<AnalyticOrder>,
}

pub fn truncation_order(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    t: f64,
    epsilon: f64,
    delta: f64,
) -> Result<TruncationOrder> {
    truncation_order_from(&BoundContext::new(sys, cls, t)?, epsilon, delta)
}

/// Upward scan of the bound from `M = 0` to [`ORDER_SCAN_CAP`].
pub fn truncation_order_from(ctx: &BoundContext, epsilon: f64, delta: f64) -> Result<TruncationOrder> {
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon must be positive, got {epsilon}")));
    }
    let analytic = (ctx.x > 1.0 && delta > 0.0).then(|| {
        let m1 = std::f64::consts::E * ctx.x.powf(1.0 + delta);
        let m2 = (ctx.propagator_norm * ctx.h / epsilon).ln() / (delta * ctx.x.ln());
        AnalyticOrder { m1, m2, order: m1.ceil().max(m2.ceil()).max(0.0) as usize }
    });
    for order in 0..=ORDER_SCAN_CAP {
        if let Ok(bound) = ctx.bound(order) {
            if bound <= epsilon {
                return Ok(TruncationOrder { order, bound, analytic });
            }
        }
    }
    Err(Error::OrderCap { cap: ORDER_SCAN_CAP })
}

/// `F^θ_{n,m}(x) = Σ_k θ^k x^{nk+m}/(nk+m)!`, evaluated in closed form via
/// the `n`-th roots of unity.
pub fn generalized_hyperbolic(n: usize, m: usize, theta: C64, x: f64) -> Result<C64> {
    if n == 0 || m >= n {
        return Err(Error::OutOfRange(format!("need 0 <= m < n, got n={n}, m={m}")));
    }
    if theta.norm() == 0.0 {
        return Ok(hyperbolic_series(n, m, theta, x));
    }
    let root = theta.powf(1.0 / n as f64);
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..n {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        sum += w.powi(-(m as i32)) * (w * root * x).exp();
    }
    Ok(sum * root.powi(-(m as i32)) / n as f64)
}

/// Direct summation of the defining series.
pub fn hyperbolic_series(n: usize, m: usize, theta: C64, x: f64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    // term_k = θ^k x^{nk+m} / (nk+m)!
    let mut term = C64::new(x.powi(m as i32) / ln_factorial(m).exp(), 0.0);
    for k in 0..2000 {
        sum += term;
        let base = n * k + m;
        let mut ratio = theta;
        for j in 1..=n {
            ratio *= x / (base + j) as f64;
        }
        term *= ratio;
        if term.norm() <= 1e-18 * sum.norm() && k * n > x.abs() as usize {
            break;
        }
        if term.norm() == 0.0 {
            break;
        }
    }
    sum
}

/// Smallest `n ≤ max_power` with `(L⊗L̄)^n = κ 𝟙` for some `κ ≥ 0`, where `κ = 0`
/// covers nilpotent operators.
pub fn cyclic_power(l: &ComplexMatrix, max_power: usize) -> Option<(usize, f64)> {
    let d = l.rows();
    let mut p = ComplexMatrix::identity(d);
    let scale = l.op_norm().max(1e-300);
    for n in 1..=max_power {
        p = p.matmul(l);
        let corner = p[(0, 0)];
        let kappa_root = corner;
        let target = ComplexMatrix::identity(d).scale(kappa_root);
        if p.max_diff(&target) <= 1e-12 * scale.powi(n as i32).max(1.0) {
            return Some((n, kappa_root.norm_sqr()));
        }
    }
    None
}

/// Finite Kraus set for a system with one active Lindblad operator obeying
/// `L^n = θ I`: `K_m = e^{−itV_H/ħ} √(h F^{|θ|²}_{n,m}(γ f)) L^m` for `m < n`.
pub fn cyclic_kraus_operators(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    t: f64,
    max_power: usize,
) -> Result<Option<Vec<ComplexMatrix>>> {
    let sched = ScalarSchedule::new(cls)?;
    let active = sys.active_indices();
    if active.len() != 1 {
        return Ok(None);
    }
    let l = &sys.lindblads()[active[0]];
    let Some((n, kappa)) = cyclic_power(&l.operator, max_power) else {
        return Ok(None);
    };
    let u = effective_evolution(sys, t)?;
    let x = l.rate * sched.f(t);
    let h = sched.h(t);
    let mut out = Vec::with_capacity(n);
    let mut power = ComplexMatrix::identity(sys.dim());
    for m in 0..n {
        let weight = generalized_hyperbolic(n, m, C64::new(kappa, 0.0), x)?.re.max(0.0);
        out.push(u.matmul(&power).scale_real((h * weight).sqrt()));
        power = power.matmul(&l.operator);
    }
    Ok(Some(out))
}

/// Smallest `M` with `𝓛^{M+1} = 0`, if it exists below `max_order`.
pub fn nilpotency_order(sys: &LindbladSystem, max_order: usize) -> Option<usize> {
    let l = build_superoperators(sys).l_super;
    let scale = l.max_abs();
    if scale == 0.0 {
        return Some(0);
    }
    let mut p = l.clone();
    for m in 0..=max_order {
        if p.max_abs() <= 1e-14 * scale.powi(m as i32 + 1).max(1e-300) {
            return Some(m);
        }
        p = p.matmul(&l);
    }
    None
}

/// `ρ_M(t)` through superoperator powers, `h e^{t𝓗} Σ_{m≤M} f^m 𝓛^m/m! vec(ρ0)`.
/// Equivalent to [`evaluate_series`] without enumerating index vectors.
pub fn evaluate_series_superop(
    sys: &LindbladSystem,
    cls: &CaseClassification,
    rho0: &ComplexMatrix,
    t: f64,
    max_order: usize,
) -> Result<ComplexMatrix> {
    let sched = ScalarSchedule::new(cls)?;
    let pair = build_superoperators(sys);
    let f = sched.f(t);
    let mut v = crate::tensor::vectorize(rho0)?.into_vec();
    let mut acc = v.clone();
    for m in 1..=max_order {
        v = pair.l_super.apply(&v).into_iter().map(|z| z * (f / m as f64)).collect();
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b;
        }
    }
    let prop = pair.h_super.scale_real(t).expm()?;
    let out: Vec<C64> = prop.apply(&acc).into_iter().map(|z| z * sched.h(t)).collect();
    let d = sys.dim();
    Ok(hermitize(&ComplexMatrix::from_vec(d, d, out)?))
}
