//! Dense complex linear algebra.
//!
//! Matrices are stored row-major. Vectorization stacks rows, so entry
//! `i * d + j` of `vec(ρ)` is `⟨e_i|ρ|e_j⟩` and `vec(AρB†) = (A ⊗ B̄) vec(ρ)`.
//! Eigendecompositions are delegated to `nalgebra`; everything else is
//! implemented here.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default per-entry tolerance for structural predicates (Hermitian, unitary).
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixNorms {
    /// Hilbert-Schmidt (Frobenius) norm.
    pub hs: f64,
    /// Largest singular value.
    pub op: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KronMode {
    /// `A ⊗ Ā`
    Product,
    /// `A ⊗ I + I ⊗ Ā`
    Sum,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_diag(&diag.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare { rows: self.rows, cols: self.cols })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Tolerance scale used by the structural predicates: `max(1, max |a_ij|)`.
    pub fn tol_scale(&self) -> f64 {
        self.max_abs().max(1.0)
    }

    /// Largest entrywise deviation `|a_ij - b_ij|`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[l * m..(l + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self { rows: n, cols: m, data: out }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A B - B A`
    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `A B + B A`
    pub fn anticommutator(&self, other: &Self) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// Hilbert-Schmidt inner product `Tr(A† B)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn op_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let svd = self.to_nalgebra().svd(false, false);
        svd.singular_values.iter().fold(0.0, |m: f64, &s| m.max(s))
    }

    pub fn norms(&self) -> MatrixNorms {
        MatrixNorms { hs: self.hs_norm(), op: self.op_norm() }
    }

    /// Maximum entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * self.tol_scale()
    }

    /// Maximum entrywise deviation of `U†U` from the identity.
    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.adjoint().matmul(self).max_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    /// `‖[A, A†]‖_HS / ‖A‖²_HS`, zero for the zero matrix.
    pub fn normality_defect(&self) -> f64 {
        let norm = self.hs_norm();
        if norm == 0.0 {
            return 0.0;
        }
        self.commutator(&self.adjoint()).hs_norm() / (norm * norm)
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        self.is_square() && self.normality_defect() <= tol
    }

    pub fn power(&self, k: usize) -> Self {
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Embeds the matrix in the top-left corner of a `size`x`size` zero matrix.
    pub fn pad_to(&self, size: usize) -> Self {
        assert!(size >= self.rows && size >= self.cols);
        Self::from_fn(size, size, |i, j| {
            if i < self.rows && j < self.cols {
                self[(i, j)]
            } else {
                ZERO
            }
        })
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Thin SVD `A = W diag(σ) V†`, returned as `(W, σ, V)`.
    pub fn svd(&self) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
        let svd = self.to_nalgebra().svd(true, true);
        let w = Self::from_nalgebra(svd.u.as_ref().expect("requested"));
        let v = Self::from_nalgebra(svd.v_t.as_ref().expect("requested")).adjoint();
        (w, svd.singular_values.iter().copied().collect(), v)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
    /// ascending order with orthonormal eigenvectors as columns.
    pub fn eigh(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        let n = self.require_square()?;
        let dev = self.hermitian_deviation();
        if dev > STRUCTURE_TOL * self.tol_scale() {
            return Err(Error::NotHermitian(dev));
        }
        // Symmetrize so the solver sees an exactly Hermitian input.
        let herm = Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        let eig = nalgebra::SymmetricEigen::new(herm.to_nalgebra());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((values, canonical_phase(vectors)))
    }

    pub fn min_eigenvalue_hermitian(&self) -> Result<f64> {
        Ok(self.eigh()?.0.first().copied().unwrap_or(0.0))
    }

    /// Trace norm `Σ|λ_i|` of a Hermitian matrix.
    pub fn trace_norm_hermitian(&self) -> Result<f64> {
        Ok(self.eigh()?.0.iter().map(|x| x.abs()).sum())
    }

    /// Diagonalizes a normal matrix as `A = U diag(λ) U†` with unitary `U`.
    ///
    /// The Hermitian and anti-Hermitian parts commute for a normal matrix, so
    /// they are diagonalized jointly: first the Hermitian part, then the
    /// anti-Hermitian part inside each degenerate eigenspace of the first.
    /// Eigenvalues are sorted by real part, then imaginary part, with ties kept
    /// in first-occurrence order.
    pub fn eig_normal(&self) -> Result<(Vec<C64>, ComplexMatrix)> {
        let n = self.require_square()?;
        let defect = self.normality_defect();
        if defect > 1e-9 {
            return Err(Error::NonNormal(defect));
        }
        let adj = self.adjoint();
        let re_part = (self + &adj).scale_real(0.5);
        let im_part = (self - &adj).scale(C64::new(0.0, -0.5));
        let (re_vals, mut basis) = re_part.eigh()?;
        let cluster_tol = 1e-8 * self.tol_scale();

        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && re_vals[end] - re_vals[end - 1] <= cluster_tol {
                end += 1;
            }
            if end - start > 1 {
                let sub = basis.block(0, start, n, end - start);
                let projected = sub.adjoint().matmul(&im_part).matmul(&sub);
                let (_, rot) = projected.eigh()?;
                let rotated = sub.matmul(&rot);
                for i in 0..n {
                    for j in 0..end - start {
                        basis[(i, start + j)] = rotated[(i, j)];
                    }
                }
            }
            start = end;
        }

        let diag = basis.adjoint().matmul(self).matmul(&basis).diagonal();
        let quantum = 1e-9 * self.tol_scale();
        let key = |z: C64| ((z.re / quantum).round() as i64, (z.im / quantum).round() as i64);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&k| key(diag[k]));
        let values = order.iter().map(|&k| diag[k]).collect();
        let vectors = Self::from_fn(n, n, |i, j| basis[(i, order[j])]);
        Ok((values, canonical_phase(vectors)))
    }

    /// Matrix exponential.
    ///
    /// Normal inputs go through their eigendecomposition (checked by residual);
    /// everything else uses scaling and squaring with a degree-13 Padé approximant.
    pub fn expm(&self) -> Result<Self> {
        let n = self.require_square()?;
        if n == 0 {
            return Ok(self.clone());
        }
        if self.is_normal(1e-10) {
            if let Ok((vals, vecs)) = self.eig_normal() {
                let recon = vecs
                    .matmul(&Self::from_diag(&vals))
                    .matmul(&vecs.adjoint());
                if recon.max_diff(self) <= 1e-12 * self.tol_scale() {
                    let exp_vals: Vec<C64> = vals.iter().map(|z| z.exp()).collect();
                    return Ok(vecs.matmul(&Self::from_diag(&exp_vals)).matmul(&vecs.adjoint()));
                }
            }
        }
        Ok(self.expm_pade())
    }

    /// Scaling-and-squaring Padé(13) exponential without the normal shortcut.
    pub fn expm_pade(&self) -> Self {
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA_13: f64 = 5.371920351148152;
        let n = self.rows;
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let squarings = if norm1 > THETA_13 { (norm1 / THETA_13).log2().ceil() as u32 } else { 0 };
        let a = self.scale_real(0.5f64.powi(squarings as i32));
        let id = Self::identity(n);
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let lin = |c: [f64; 4]| -> Self {
            &(&(&a6.scale_real(c[0]) + &a4.scale_real(c[1])) + &a2.scale_real(c[2])) + &id.scale_real(c[3])
        };
        let u_inner = &a6.matmul(&(&(&a6.scale_real(B[13]) + &a4.scale_real(B[11])) + &a2.scale_real(B[9])))
            + &lin([B[7], B[5], B[3], B[1]]);
        let u = a.matmul(&u_inner);
        let v = &a6.matmul(&(&(&a6.scale_real(B[12]) + &a4.scale_real(B[10])) + &a2.scale_real(B[8])))
            + &lin([B[6], B[4], B[2], B[0]]);
        let p = (&v + &u).to_nalgebra();
        let q = (&v - &u).to_nalgebra();
        let solved = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
        let mut r = Self::from_nalgebra(&solved);
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        r
    }

    /// Principal square root of a positive semidefinite Hermitian matrix.
    ///
    /// Eigenvalues in `[-1e-10, 0)` (scaled) are clamped to zero; anything more
    /// negative is rejected.
    pub fn sqrtm_psd(&self) -> Result<Self> {
        let (vals, vecs) = self.eigh()?;
        let floor = -1e-10 * self.tol_scale();
        if let Some(&bad) = vals.iter().find(|&&v| v < floor) {
            return Err(Error::NotPositive(bad));
        }
        let roots: Vec<C64> = vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)).collect();
        let r = vecs.matmul(&Self::from_diag(&roots)).matmul(&vecs.adjoint());
        // Restore exact Hermiticity lost to roundoff in the reconstruction.
        Ok(Self::from_fn(r.rows, r.cols, |i, j| (r[(i, j)] + r[(j, i)].conj()) * 0.5))
    }
}

/// Fixes each eigenvector's phase so its largest-magnitude entry (first on
/// ties) is real and positive.
fn canonical_phase(mut vecs: ComplexMatrix) -> ComplexMatrix {
    let n = vecs.rows;
    for j in 0..vecs.cols {
        let mut best = 0;
        let mut best_mag = -1.0;
        for i in 0..n {
            let mag = vecs[(i, j)].norm();
            if mag > best_mag + 1e-12 {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag > 0.0 {
            let phase = vecs[(best, j)].conj() / best_mag;
            for i in 0..n {
                vecs[(i, j)] *= phase;
            }
        }
    }
    vecs
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Conjugated Kronecker product `A ⊗ Ā` or sum `A ⊗ I + I ⊗ Ā`.
pub fn conj_kron(a: &ComplexMatrix, mode: KronMode) -> Result<ComplexMatrix> {
    let n = a.require_square()?;
    let abar = a.conj();
    Ok(match mode {
        KronMode::Product => kron(a, &abar),
        KronMode::Sum => {
            let id = ComplexMatrix::identity(n);
            &kron(a, &id) + &kron(&id, &abar)
        }
    })
}

/// Row-stacked vectorization of a `d`x`d` operator.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorizedOperator {
    side: usize,
    data: Vec<C64>,
}

impl VectorizedOperator {
    pub fn from_vec(side: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {side}x{side} operator",
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    /// Length of the vector, `d²`.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }
}

pub fn vectorize(rho: &ComplexMatrix) -> Result<VectorizedOperator> {
    let d = rho.require_square()?;
    Ok(VectorizedOperator { side: d, data: rho.data.clone() })
}

pub fn devectorize(v: &VectorizedOperator) -> ComplexMatrix {
    ComplexMatrix { rows: v.side, cols: v.side, data: v.data.clone() }
}

/// Applies a `d²`x`d²` superoperator to `ρ`.
pub fn apply_superop(superop: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = rho.require_square()?;
    if superop.rows != d * d || superop.cols != d * d {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} superoperator on a {d}x{d} operator",
            superop.rows, superop.cols
        )));
    }
    let out = superop.apply(&rho.data);
    Ok(ComplexMatrix { rows: d, cols: d, data: out })
}

/// Trace distance `½‖A − B‖₁` between Hermitian matrices.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(0.5 * (a - b).trace_norm_hermitian()?)
}

/// Choi matrix `J = Σ_kl |k⟩⟨l| ⊗ E(|k⟩⟨l|)` of a row-stacked superoperator.
pub fn choi_matrix(superop: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dd = superop.require_square()?;
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd {
        return Err(Error::DimensionMismatch(format!("{dd} is not a perfect square")));
    }
    Ok(ComplexMatrix::from_fn(dd, dd, |r, c| {
        let (k, i) = (r / d, r % d);
        let (l, j) = (c / d, c % d);
        superop[(i * d + j, k * d + l)]
    }))
}

/// Trace distance between the normalized Choi states of two channels.
pub fn channel_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let ja = choi_matrix(a)?;
    let jb = choi_matrix(b)?;
    let d = (a.rows as f64).sqrt();
    Ok(trace_distance(&ja, &jb)? / d)
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
