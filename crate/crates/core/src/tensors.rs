//! Dense complex tensor kernels.
//!
//! Everything in the simulator reduces to three primitives: a truncated SVD
//! (bond compression), the exponential of an anti-Hermitian generator (step
//! unitaries) and pairwise tensor contraction. Matrices are stored row-major;
//! the heavy lifting is delegated to `faer`.

use std::ops::{Index, IndexMut};

use faer::{Accum, MatRef, Par, Side};
use num_complex::Complex64;

use crate::error::TensorError;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, TensorError> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::EmptyShape);
        }
        if data.len() != rows * cols {
            return Err(TensorError::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Unchecked constructor for kernel-internal results.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![ZERO; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z * alpha).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self, TensorError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TensorError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = matmul_raw(&self.data, &other.data, self.rows, self.cols, other.cols);
        Ok(Self::from_raw(self.rows, other.cols, data))
    }

    pub fn mat_vec(&self, v: &[C64]) -> Result<Vec<C64>, TensorError> {
        if v.len() != self.cols {
            return Err(TensorError::ShapeMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |(U†U − I)_ij|`; zero for an exact unitary (or isometry with
    /// orthonormal columns).
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("adjoint shapes agree");
        gram.sub(&Self::identity(self.cols)).expect("square gram").max_abs()
    }

    /// `max |(M + M†)_ij|`.
    pub fn anti_hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self[(i, j)] + self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |(M − M†)_ij|`.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Row-major product of an `m x k` and a `k x n` matrix.
///
/// Purely real operands take the `f64` kernel, which keeps real data
/// exactly real and is several times cheaper.
pub(crate) fn matmul_raw(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    if m == 0 || n == 0 || k == 0 {
        return vec![ZERO; m * n];
    }
    if let (Some(ar), Some(br)) = (real_parts(a), real_parts(b)) {
        let mut out = vec![0.0; m * n];
        let lhs = MatRef::from_row_major_slice(&ar, m, k);
        let rhs = MatRef::from_row_major_slice(&br, k, n);
        let dst = faer::MatMut::from_row_major_slice_mut(&mut out, m, n);
        faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
        return out.into_iter().map(|x| C64::new(x, 0.0)).collect();
    }
    let mut out = vec![ZERO; m * n];
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = faer::MatMut::from_row_major_slice_mut(&mut out, m, n);
    faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
    out
}

/// Real parts, if every imaginary part is exactly zero.
fn real_parts(data: &[C64]) -> Option<Vec<f64>> {
    if data.iter().all(|z| z.im == 0.0) {
        Some(data.iter().map(|z| z.re).collect())
    } else {
        None
    }
}

/// Entry types the kernels run on.
trait Lift: faer::traits::ComplexField + Copy {
    fn lift(self) -> C64;
}

impl Lift for f64 {
    fn lift(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Lift for C64 {
    fn lift(self) -> C64 {
        self
    }
}

fn col_major_to_row_major<T: Lift>(m: MatRef<'_, T>, ncols: usize) -> Vec<C64> {
    let rows = m.nrows();
    let mut out = Vec::with_capacity(rows * ncols);
    for i in 0..rows {
        for j in 0..ncols {
            out.push(m[(i, j)].lift());
        }
    }
    out
}

/// Result of [`svd_truncate`]: `m ≈ u · diag(s) · vh`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows x r` isometry.
    pub u: ComplexMatrix,
    /// Kept singular values, descending.
    pub singular_values: Vec<f64>,
    /// `r x cols` co-isometry (adjoint of the right singular vectors).
    pub vh: ComplexMatrix,
    /// Sum of squared dropped singular values.
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `u · diag(s) · vh`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let r = self.rank();
        let us = ComplexMatrix::from_fn(self.u.rows(), r, |i, j| self.u[(i, j)] * self.singular_values[j]);
        us.matmul(&self.vh).expect("rank dimensions agree")
    }

    /// `diag(s) · vh`, the factor carrying the norm when `u` is kept as an
    /// isometry.
    pub fn s_vh(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rank(), self.vh.cols(), |i, j| {
            self.vh[(i, j)] * self.singular_values[i]
        })
    }

    /// `u · diag(s)`.
    pub fn u_s(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.u.rows(), self.rank(), |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        })
    }
}

/// Singular value decomposition truncated to at most `max_rank` values.
///
/// Values not exceeding `cutoff` times the largest singular value are
/// dropped, but at least one value is always kept.
pub fn svd_truncate(m: &ComplexMatrix, max_rank: usize, cutoff: f64) -> Result<SvdResult, TensorError> {
    if max_rank == 0 {
        return Err(TensorError::InvalidArgument("max_rank must be at least 1".into()));
    }
    if !(cutoff >= 0.0) {
        return Err(TensorError::InvalidArgument(format!("cutoff must be non-negative, got {cutoff}")));
    }
    svd_with(m, |s| {
        let threshold = cutoff * s.first().copied().unwrap_or(0.0);
        s.iter().take_while(|&&x| x > threshold).count().min(max_rank).max(1)
    })
}

/// Thin SVD keeping all `min(rows, cols)` singular values, zeros included.
pub fn svd_full(m: &ComplexMatrix) -> Result<SvdResult, TensorError> {
    svd_with(m, |s| s.len())
}

fn svd_with(m: &ComplexMatrix, keep: impl FnOnce(&[f64]) -> usize) -> Result<SvdResult, TensorError> {
    if !m.is_finite() {
        return Err(TensorError::NonFinite);
    }
    match real_parts(&m.data) {
        Some(re) => svd_kernel(MatRef::from_row_major_slice(&re, m.rows, m.cols), keep),
        None => svd_kernel(m.as_faer(), keep),
    }
}

fn svd_kernel<T: Lift>(m: MatRef<'_, T>, keep: impl FnOnce(&[f64]) -> usize) -> Result<SvdResult, TensorError> {
    let svd = m
        .thin_svd()
        .map_err(|e| TensorError::Decomposition(format!("svd: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.lift().re).collect();
    let keep = keep(&s);
    let discarded_weight = s[keep..].iter().map(|x| x * x).sum();

    let u = ComplexMatrix::from_raw(m.nrows(), keep, col_major_to_row_major(svd.U(), keep));
    let v = svd.V();
    let vh = ComplexMatrix::from_fn(keep, m.ncols(), |i, j| v[(j, i)].lift().conj());
    Ok(SvdResult {
        u,
        singular_values: s[..keep].to_vec(),
        vh,
        discarded_weight,
    })
}

/// Thin QR factorization `m = q · r` with `q` an isometry.
pub(crate) fn qr_thin(rows: usize, cols: usize, data: &[C64]) -> (Vec<C64>, Vec<C64>, usize) {
    match real_parts(data) {
        Some(re) => qr_kernel(MatRef::from_row_major_slice(&re, rows, cols)),
        None => qr_kernel(MatRef::from_row_major_slice(data, rows, cols)),
    }
}

fn qr_kernel<T: Lift>(mat: MatRef<'_, T>) -> (Vec<C64>, Vec<C64>, usize) {
    let (rows, cols) = (mat.nrows(), mat.ncols());
    let qr = mat.qr();
    let k = rows.min(cols);
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let q_data = col_major_to_row_major(q.as_ref(), k);
    let mut r_data = Vec::with_capacity(k * cols);
    for i in 0..k {
        for j in 0..cols {
            r_data.push(if j >= i { r[(i, j)].lift() } else { ZERO });
        }
    }
    (q_data, r_data, k)
}

/// Matrix exponential of an anti-Hermitian generator.
///
/// `g = −iH` with `H = i·g` Hermitian, so `exp(g) = V·exp(−iΛ)·V†` from the
/// eigendecomposition `H = V·Λ·V†`. The result is unitary by construction.
pub fn expm_antihermitian(g: &ComplexMatrix) -> Result<ComplexMatrix, TensorError> {
    if !g.is_square() {
        return Err(TensorError::NotSquare { rows: g.rows(), cols: g.cols() });
    }
    if !g.is_finite() {
        return Err(TensorError::NonFinite);
    }
    let residual = g.anti_hermiticity_residual();
    if residual > 1e-10 * g.max_abs().max(1.0) {
        return Err(TensorError::NotAntiHermitian { residual });
    }
    let n = g.rows();
    let h = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * I * (g[(i, j)] - g[(j, i)].conj()));
    let eig = h
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| TensorError::Decomposition(format!("eigh: {e:?}")))?;
    let v = eig.U();
    let phases: Vec<C64> = eig
        .S()
        .column_vector()
        .iter()
        .map(|lam| (-I * lam.re).exp())
        .collect();
    let v_phase = ComplexMatrix::from_fn(n, n, |i, j| v[(i, j)] * phases[j]);
    let vh = ComplexMatrix::from_fn(n, n, |i, j| v[(j, i)].conj());
    v_phase.matmul(&vh)
}

/// Reorders the tensor factors of an operator on `⊗_i C^{dims[i]}`.
///
/// Factor `j` of the result is factor `perm[j]` of the input, on both the
/// row and the column side.
pub fn permute_subsystems(op: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix, TensorError> {
    let total: usize = dims.iter().product();
    if !op.is_square() || op.rows() != total {
        return Err(TensorError::ShapeMismatch(format!(
            "operator {}x{} on a space of dimension {total}",
            op.rows(),
            op.cols()
        )));
    }
    check_permutation(perm, dims.len())?;
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map: Vec<usize> = (0..total)
        .map(|new_flat| {
            let new_idx = unflatten(new_flat, &new_dims);
            let mut old_idx = vec![0; dims.len()];
            for (j, &p) in perm.iter().enumerate() {
                old_idx[p] = new_idx[j];
            }
            flatten(&old_idx, dims)
        })
        .collect();
    Ok(ComplexMatrix::from_fn(total, total, |i, j| op[(map[i], map[j])]))
}

fn check_permutation(perm: &[usize], n: usize) -> Result<(), TensorError> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(TensorError::InvalidArgument(format!("permutation of length {} for rank {n}", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(TensorError::InvalidArgument(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for (slot, &d) in idx.iter_mut().zip(dims).rev() {
        *slot = flat % d;
        flat /= d;
    }
    idx
}

fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Dense tensor of arbitrary rank, row-major (last index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self, TensorError> {
        if dims.contains(&0) {
            return Err(TensorError::EmptyShape);
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(TensorError::ShapeMismatch(format!("{} entries for dims {dims:?}", data.len())));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self { dims, data })
    }

    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = dims.iter().product();
        let data = (0..len).map(|flat| f(&unflatten(flat, &dims))).collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        self.data[flatten(idx, &self.dims)]
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self::from_raw(self.dims.clone(), self.data.iter().map(|z| z * alpha).collect())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self, TensorError> {
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(TensorError::ShapeMismatch(format!("cannot reshape {:?} into {dims:?}", self.dims)));
        }
        Ok(Self { dims, data: self.data })
    }

    /// Axis `j` of the result is axis `perm[j]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, TensorError> {
        check_permutation(perm, self.rank())?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut old_strides = vec![1usize; self.rank()];
        for i in (0..self.rank().saturating_sub(1)).rev() {
            old_strides[i] = old_strides[i + 1] * self.dims[i + 1];
        }
        let strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; self.rank()];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                offset += strides[ax];
                if idx[ax] < new_dims[ax] {
                    break;
                }
                offset -= strides[ax] * new_dims[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { dims: new_dims, data })
    }
}

/// Contracts `a` and `b` over the index pairs `(axis of a, axis of b)`.
///
/// The result carries the free axes of `a` in order, followed by the free
/// axes of `b` in order. Contracting every axis yields a rank-0 tensor.
pub fn contract(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor, TensorError> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(TensorError::InvalidArgument(format!("pair ({ia}, {ib}) out of range")));
        }
        if used_a[ia] || used_b[ib] {
            return Err(TensorError::InvalidArgument(format!("axis repeated in pair ({ia}, {ib})")));
        }
        if a.dims[ia] != b.dims[ib] {
            return Err(TensorError::ShapeMismatch(format!(
                "paired axes ({ia}, {ib}) have dimensions {} and {}",
                a.dims[ia], b.dims[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&i| !used_b[i]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let m: usize = free_a.iter().map(|&i| a.dims[i]).product();
    let k: usize = pairs.iter().map(|p| a.dims[p.0]).product();
    let n: usize = free_b.iter().map(|&i| b.dims[i]).product();

    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    let data = matmul_raw(&pa.data, &pb.data, m, k, n);
    let dims: Vec<usize> = free_a
        .iter()
        .map(|&i| a.dims[i])
        .chain(free_b.iter().map(|&i| b.dims[i]))
        .collect();
    Ok(Tensor::from_raw(dims, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Deterministic pseudo-random matrix (LCG), enough for kernel tests.
    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
    }

    #[test]
    fn svd_of_identity_keeps_unit_values() {
        let r = svd_truncate(&ComplexMatrix::identity(2), 2, 0.0).unwrap();
        assert_eq!(r.rank(), 2);
        for s in &r.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn svd_of_outer_product_has_rank_one() {
        let u = [c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0), c(2.0, 0.0)];
        let v = [c(0.4, -0.1), c(1.0, 1.0), c(-0.7, 0.0), c(0.2, 0.3)];
        let m = ComplexMatrix::from_fn(4, 4, |i, j| u[i] * v[j].conj());
        let r = svd_truncate(&m, 4, 1e-12).unwrap();
        assert_eq!(r.rank(), 1);
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((r.singular_values[0] - nu * nv).abs() < 1e-12);
    }

    #[test]
    fn svd_keeps_one_value_of_zero_matrix() {
        let r = svd_truncate(&ComplexMatrix::zeros(3, 2), 2, 0.5).unwrap();
        assert_eq!(r.rank(), 1);
        assert_eq!(r.singular_values[0], 0.0);
    }

    #[test]
    fn svd_rejects_bad_input() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(svd_truncate(&m, 2, 0.0), Err(TensorError::NonFinite)));
        assert!(svd_truncate(&ComplexMatrix::identity(2), 0, 0.0).is_err());
        assert!(svd_truncate(&ComplexMatrix::identity(2), 1, -1.0).is_err());
    }

    #[test]
    fn svd_cutoff_is_relative() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = c(100.0, 0.0);
        m[(1, 1)] = c(2.0, 0.0);
        m[(2, 2)] = c(0.5, 0.0);
        let r = svd_truncate(&m, 3, 0.01).unwrap();
        assert_eq!(r.rank(), 2);
        assert!((r.discarded_weight - 0.25).abs() < 1e-12);
        let r = svd_truncate(&m.scale(c(1e-6, 0.0)), 3, 0.01).unwrap();
        assert_eq!(r.rank(), 2);
    }

    #[test]
    fn wide_and_tall_svd_reconstruct() {
        for (rows, cols) in [(3, 7), (7, 3), (5, 5)] {
            let m = pseudo_random(rows, cols, (rows * 10 + cols) as u64);
            let r = svd_truncate(&m, rows.max(cols), 0.0).unwrap();
            let err = r.reconstruct().sub(&m).unwrap().frobenius_norm();
            assert!(err < 1e-12, "{rows}x{cols}: {err}");
            assert!(r.u.unitarity_residual() < 1e-12);
            assert!(r.vh.adjoint().unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let u = expm_antihermitian(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(u.sub(&ComplexMatrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn expm_rejects_non_generators() {
        assert!(matches!(
            expm_antihermitian(&ComplexMatrix::zeros(2, 3)),
            Err(TensorError::NotSquare { .. })
        ));
        assert!(matches!(
            expm_antihermitian(&ComplexMatrix::identity(2)),
            Err(TensorError::NotAntiHermitian { .. })
        ));
    }

    #[test]
    fn permute_subsystems_swaps_factors() {
        let a = pseudo_random(2, 2, 1);
        let b = pseudo_random(3, 3, 2);
        let ab = a.kron(&b);
        let ba = permute_subsystems(&ab, &[2, 3], &[1, 0]).unwrap();
        assert!(ba.sub(&b.kron(&a)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn permute_roundtrip() {
        let t = Tensor::from_fn(vec![2, 3, 4], |ix| c(ix[0] as f64, (ix[1] * 4 + ix[2]) as f64));
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn contract_matrix_vector() {
        let m = pseudo_random(3, 4, 7);
        let v: Vec<C64> = (0..4).map(|i| c(i as f64, 1.0)).collect();
        let mt = Tensor::new(vec![3, 4], m.data().to_vec()).unwrap();
        let vt = Tensor::new(vec![4], v.clone()).unwrap();
        let out = contract(&mt, &vt, &[(1, 0)]).unwrap();
        let expected = m.mat_vec(&v).unwrap();
        assert_eq!(out.dims(), &[3]);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn contract_with_identity_is_relabeling() {
        let t = Tensor::from_fn(vec![2, 3, 2], |ix| c(ix[0] as f64 - ix[2] as f64, ix[1] as f64));
        let id = Tensor::new(vec![3, 3], ComplexMatrix::identity(3).into_data()).unwrap();
        let out = contract(&t, &id, &[(1, 0)]).unwrap();
        assert_eq!(out.dims(), &[2, 2, 3]);
        assert_eq!(out, t.permute(&[0, 2, 1]).unwrap());
    }

    #[test]
    fn contract_rejects_mismatch() {
        let a = Tensor::from_fn(vec![2, 3], |_| ONE);
        let b = Tensor::from_fn(vec![2, 3], |_| ONE);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(TensorError::ShapeMismatch(_))));
        assert!(contract(&a, &b, &[(2, 0)]).is_err());
        assert!(contract(&a, &b, &[(0, 0), (0, 1)]).is_err());
    }

    #[test]
    fn full_contraction_gives_scalar() {
        let a = Tensor::from_fn(vec![2, 2], |ix| c((ix[0] + ix[1]) as f64, 0.0));
        let out = contract(&a, &a, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(out.rank(), 0);
        assert!((out.data()[0] - c(6.0, 0.0)).norm() < 1e-15);
    }
}
