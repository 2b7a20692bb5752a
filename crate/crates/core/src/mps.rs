//! Matrix product states for the TLS + time-bin chain.
//!
//! Every site is a rank-3 tensor with axes `[left bond, physical, right
//! bond]`. The state is kept in mixed-canonical form around a single
//! orthogonality center: sites to its left are left isometries, sites to its
//! right are right isometries. Multi-site operations first move the center
//! into the block they act on, so the singular values seen by the
//! truncation are Schmidt values of the full state.
//!
//! ```text
//!   A[0] -- A[1] -- ... -- C -- ... -- B[n-1]
//!    |       |             |            |
//! left isometries      center     right isometries
//! ```

use crate::error::MpsError;
use crate::qubit::QubitDensityMatrix;
use crate::tensors::{matmul_raw, qr_thin, svd_truncate, ComplexMatrix, Tensor, C64, ONE, ZERO};

/// Bond truncation controls for SVD splits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub max_bond: usize,
    /// Relative singular value cutoff.
    pub cutoff: f64,
}

impl Truncation {
    /// No truncation beyond exact zeros.
    pub fn exact() -> Self {
        Self { max_bond: usize::MAX, cutoff: 0.0 }
    }
}

/// Side of a split block that receives the orthogonality center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Center ends on the last site of the block.
    Right,
    /// Center ends on the first site of the block.
    Left,
}

const GATE_UNITARITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MpsState {
    sites: Vec<Tensor>,
    system_index: usize,
    center: usize,
    cum_discarded: f64,
}

impl MpsState {
    /// Product state from normalized local vectors; the center starts at 0.
    pub fn product(locals: &[Vec<C64>], system_index: usize) -> Result<Self, MpsError> {
        if locals.is_empty() {
            return Err(MpsError::InvalidChain("empty chain".into()));
        }
        if system_index >= locals.len() {
            return Err(MpsError::SiteOutOfRange { site: system_index, len: locals.len() });
        }
        let sites = locals
            .iter()
            .map(|v| {
                let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(MpsError::InvalidChain("local state has zero or non-finite norm".into()));
                }
                Ok(Tensor::new(vec![1, v.len(), 1], v.iter().map(|z| z / n).collect())?)
            })
            .collect::<Result<Vec<_>, MpsError>>()?;
        Ok(Self { sites, system_index, center: 0, cum_discarded: 0.0 })
    }

    /// TLS in `system_state` (site 0) followed by `n_bins` vacuum bins.
    pub fn new_chain(n_bins: usize, d_bin: usize, system_state: &QubitDensityMatrix) -> Result<Self, MpsError> {
        if n_bins == 0 {
            return Err(MpsError::InvalidChain("need at least one time bin".into()));
        }
        if d_bin < 2 {
            return Err(MpsError::InvalidChain(format!("bin dimension {d_bin} < 2")));
        }
        let amps = system_state.pure_amplitudes()?;
        let mut locals = vec![amps.to_vec()];
        locals.extend((0..n_bins).map(|_| fock(d_bin, 0)));
        Self::product(&locals, 0)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn system_index(&self) -> usize {
        self.system_index
    }

    pub fn cum_discarded(&self) -> f64 {
        self.cum_discarded
    }

    pub fn site(&self, i: usize) -> &Tensor {
        &self.sites[i]
    }

    pub fn physical_dim(&self, i: usize) -> usize {
        self.sites[i].dims()[1]
    }

    pub fn physical_dims(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.physical_dim(i)).collect()
    }

    /// Dimensions of the internal bonds, left to right.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|t| t.dims()[2]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Norm read off the orthogonality center.
    pub fn norm(&self) -> f64 {
        self.sites[self.center].norm_sqr().sqrt()
    }

    /// Norm from a full transfer-matrix contraction, independent of the
    /// canonical form.
    pub fn norm_full(&self) -> f64 {
        let mut env = vec![ONE];
        let mut dim = 1;
        for t in &self.sites {
            env = transfer_left(&env, dim, t);
            dim = t.dims()[2];
        }
        env.iter().map(|z| z.re).sum::<f64>().sqrt()
    }

    fn check_site(&self, i: usize) -> Result<(), MpsError> {
        if i >= self.len() {
            return Err(MpsError::SiteOutOfRange { site: i, len: self.len() });
        }
        Ok(())
    }

    /// Moves the orthogonality center with QR sweeps; the state is unchanged.
    pub fn move_center(&mut self, to: usize) -> Result<(), MpsError> {
        self.check_site(to)?;
        while self.center < to {
            let c = self.center;
            let [l, p, r] = dims3(&self.sites[c]);
            let (q, rr, k) = qr_thin(l * p, r, self.sites[c].data());
            self.sites[c] = Tensor::from_raw(vec![l, p, k], q);
            let [_, p2, r2] = dims3(&self.sites[c + 1]);
            let next = matmul_raw(&rr, self.sites[c + 1].data(), k, r, p2 * r2);
            self.sites[c + 1] = Tensor::from_raw(vec![k, p2, r2], next);
            self.center += 1;
        }
        while self.center > to {
            let c = self.center;
            let [l, p, r] = dims3(&self.sites[c]);
            // LQ of the l x (p r) matrix through QR of its adjoint.
            let adj = adjoint_raw(self.sites[c].data(), l, p * r);
            let (q, rr, k) = qr_thin(p * r, l, &adj);
            self.sites[c] = Tensor::from_raw(vec![k, p, r], adjoint_raw(&q, p * r, k));
            let [l0, p0, _] = dims3(&self.sites[c - 1]);
            let r_adj = adjoint_raw(&rr, k, l);
            let prev = matmul_raw(self.sites[c - 1].data(), &r_adj, l0 * p0, l, k);
            self.sites[c - 1] = Tensor::from_raw(vec![l0, p0, k], prev);
            self.center -= 1;
        }
        Ok(())
    }

    /// Applies `gate` to sites `left` and `left + 1`, splitting with the
    /// given truncation. The center ends on `left + 1`. Returns the
    /// discarded weight.
    pub fn apply_gate_adjacent(&mut self, left: usize, gate: &ComplexMatrix, trunc: Truncation) -> Result<f64, MpsError> {
        self.apply_block(left, Some(gate), &[0, 1], trunc, Sweep::Right)
    }

    /// Exchanges the physical contents of sites `i` and `i + 1`.
    pub fn swap_adjacent(&mut self, i: usize, trunc: Truncation) -> Result<f64, MpsError> {
        self.apply_block(i, None, &[1, 0], trunc, Sweep::Right)
    }

    /// Like [`swap_adjacent`](Self::swap_adjacent) but leaves the center on
    /// site `i`, for sweeps moving leftwards.
    pub fn swap_adjacent_leftward(&mut self, i: usize, trunc: Truncation) -> Result<f64, MpsError> {
        self.apply_block(i, None, &[1, 0], trunc, Sweep::Left)
    }

    /// Applies an optional gate to the contiguous block of `perm.len()`
    /// sites starting at `start`, then reorders the physical factors so
    /// that output site `j` holds input factor `perm[j]`.
    ///
    /// The gate acts on the joint physical space of the block in input site
    /// order. Returns the weight discarded by the re-splitting SVDs.
    pub fn apply_block(
        &mut self,
        start: usize,
        gate: Option<&ComplexMatrix>,
        perm: &[usize],
        trunc: Truncation,
        sweep: Sweep,
    ) -> Result<f64, MpsError> {
        let n = perm.len();
        if n == 0 {
            return Ok(0.0);
        }
        self.check_site(start + n - 1)?;
        let in_dims: Vec<usize> = (start..start + n).map(|i| self.physical_dim(i)).collect();
        let joint: usize = in_dims.iter().product();
        if let Some(g) = gate {
            if !g.is_square() || g.rows() != joint {
                return Err(MpsError::GateShape { gate: g.rows(), sites: joint });
            }
            let residual = g.unitarity_residual();
            if residual > GATE_UNITARITY_TOL {
                return Err(MpsError::NotUnitary(residual));
            }
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(MpsError::InvalidChain(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }

        if self.center < start {
            self.move_center(start)?;
        } else if self.center >= start + n {
            self.move_center(start + n - 1)?;
        }

        let (l, mut theta, r) = self.block_theta(start, n);
        if let Some(g) = gate {
            let mut out = vec![ZERO; theta.len()];
            for a in 0..l {
                let chunk = &theta[a * joint * r..(a + 1) * joint * r];
                let applied = matmul_raw(g.data(), chunk, joint, joint, r);
                out[a * joint * r..(a + 1) * joint * r].copy_from_slice(&applied);
            }
            theta = out;
        }
        let out_dims: Vec<usize> = perm.iter().map(|&p| in_dims[p]).collect();
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            let mut dims = vec![l];
            dims.extend(&in_dims);
            dims.push(r);
            let mut axes = vec![0];
            axes.extend(perm.iter().map(|&p| p + 1));
            axes.push(n + 1);
            theta = Tensor::from_raw(dims, theta).permute(&axes)?.into_data();
        }

        let (new_sites, discarded) = split_block(theta, l, &out_dims, r, trunc, sweep)?;
        self.sites.splice(start..start + n, new_sites);
        self.center = match sweep {
            Sweep::Right => start + n - 1,
            Sweep::Left => start,
        };
        if (start..start + n).contains(&self.system_index) {
            let offset = self.system_index - start;
            let moved = perm.iter().position(|&p| p == offset).expect("perm is a permutation");
            self.system_index = start + moved;
        }
        self.cum_discarded += discarded;
        Ok(discarded)
    }

    /// Row-major `(left, p_start, ..., p_end, right)` amplitudes of a block.
    fn block_theta(&self, start: usize, n: usize) -> (usize, Vec<C64>, usize) {
        let [l, _, _] = dims3(&self.sites[start]);
        let mut theta = self.sites[start].data().to_vec();
        let mut rows = l * self.physical_dim(start);
        let mut bond = self.sites[start].dims()[2];
        for i in start + 1..start + n {
            let [_, p, r] = dims3(&self.sites[i]);
            theta = matmul_raw(&theta, self.sites[i].data(), rows, bond, p * r);
            rows *= p;
            bond = r;
        }
        (l, theta, bond)
    }

    /// Inserts an unentangled site holding `local` at position `pos`
    /// (`0..=len`). Canonical form and the state of the other sites are
    /// untouched.
    pub fn insert_site(&mut self, pos: usize, local: &[C64]) -> Result<(), MpsError> {
        if pos > self.len() {
            return Err(MpsError::SiteOutOfRange { site: pos, len: self.len() + 1 });
        }
        let n = local.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(MpsError::InvalidChain("local state has zero or non-finite norm".into()));
        }
        let chi = if pos == 0 { self.sites[0].dims()[0] } else { self.sites[pos - 1].dims()[2] };
        let p = local.len();
        let mut data = vec![ZERO; chi * p * chi];
        for a in 0..chi {
            for (s, v) in local.iter().enumerate() {
                data[(a * p + s) * chi + a] = v / n;
            }
        }
        self.sites.insert(pos, Tensor::from_raw(vec![chi, p, chi], data));
        if self.center >= pos {
            self.center += 1;
        }
        if self.system_index >= pos {
            self.system_index += 1;
        }
        Ok(())
    }

    /// Fuses sites `i` and `i + 1` into one site whose physical index is
    /// `(p_i, p_{i+1})` in row-major order.
    pub fn merge_adjacent(&mut self, i: usize) -> Result<(), MpsError> {
        self.check_site(i + 1)?;
        if self.system_index == i || self.system_index == i + 1 {
            return Err(MpsError::SystemSite(self.system_index));
        }
        let [l, p1, _] = dims3(&self.sites[i]);
        let [_, p2, r] = dims3(&self.sites[i + 1]);
        let (_, theta, _) = self.block_theta(i, 2);
        self.sites.splice(i..i + 2, [Tensor::from_raw(vec![l, p1 * p2, r], theta)]);
        if self.center > i {
            self.center -= 1;
        }
        if self.system_index > i {
            self.system_index -= 1;
        }
        Ok(())
    }

    /// Replaces the physical basis of `site` by an isometric change of basis
    /// onto the support of its reduced state, shrinking the physical
    /// dimension to at most `left·right`.
    ///
    /// This acts as a local isometry on that site alone. It is meant for a
    /// purifying environment site, whose basis carries no meaning.
    pub fn compress_physical(&mut self, site: usize) -> Result<(), MpsError> {
        self.check_site(site)?;
        if site == self.system_index {
            return Err(MpsError::SystemSite(site));
        }
        let [l, p, r] = dims3(&self.sites[site]);
        if p <= l * r {
            return Ok(());
        }
        let m = self.sites[site].permute(&[0, 2, 1])?.into_data();
        let svd = svd_truncate(&ComplexMatrix::from_raw(l * r, p, m), l * r, 0.0)?;
        let k = svd.rank();
        let us = svd.u_s().into_data();
        self.sites[site] = Tensor::from_raw(vec![l, r, k], us).permute(&[0, 2, 1])?;
        Ok(())
    }

    /// Reduced density matrix of one site, normalized to unit trace.
    pub fn reduced_density_matrix(&self, site: usize) -> Result<ComplexMatrix, MpsError> {
        self.check_site(site)?;
        let t = &self.sites[site];
        let [l, p, r] = dims3(t);
        let left = self.left_env(site);
        let right = self.right_env(site);
        // X[a', s, b] = Σ_a L[a, a'] A[a, s, b]
        let lt = transpose_raw(&left, l, l);
        let x = matmul_raw(&lt, t.data(), l, l, p * r);
        // Y[a', s, b'] = Σ_b X[a', s, b] R[b, b']
        let y = matmul_raw(&x, &right, l * p, r, r);
        let mut rho = ComplexMatrix::zeros(p, p);
        for s in 0..p {
            for s2 in 0..p {
                let mut acc = ZERO;
                for a in 0..l {
                    let yrow = &y[(a * p + s) * r..(a * p + s + 1) * r];
                    let arow = &t.data()[(a * p + s2) * r..(a * p + s2 + 1) * r];
                    for (yv, av) in yrow.iter().zip(arow) {
                        acc += yv * av.conj();
                    }
                }
                rho[(s, s2)] = acc;
            }
        }
        let tr = rho.trace().re;
        if !(tr > 0.0) {
            return Err(MpsError::InvalidChain("state has zero norm".into()));
        }
        // Hermitize away round-off.
        let herm = ComplexMatrix::from_fn(p, p, |i, j| 0.5 * (rho[(i, j)] + rho[(j, i)].conj()) / tr);
        Ok(herm)
    }

    /// Reduced state of the TLS site.
    pub fn system_state(&self) -> Result<QubitDensityMatrix, MpsError> {
        let rho = self.reduced_density_matrix(self.system_index)?;
        Ok(QubitDensityMatrix::from_unnormalized([
            [rho[(0, 0)], rho[(0, 1)]],
            [rho[(1, 0)], rho[(1, 1)]],
        ])?)
    }

    /// Mean photon number `Tr(n̂ ρ)` of a bin site.
    pub fn site_number_expectation(&self, site: usize) -> Result<f64, MpsError> {
        self.check_site(site)?;
        if site == self.system_index {
            return Err(MpsError::SystemSite(site));
        }
        let rho = self.reduced_density_matrix(site)?;
        Ok((0..rho.rows()).map(|n| n as f64 * rho[(n, n)].re).sum())
    }

    /// Environment on the left bond of `site` (`L[a, a']`), identity when
    /// everything to the left is left-canonical.
    fn left_env(&self, site: usize) -> Vec<C64> {
        let l = self.sites[site].dims()[0];
        if site <= self.center {
            return identity_raw(l);
        }
        let mut dim = self.sites[self.center].dims()[0];
        let mut env = identity_raw(dim);
        for t in &self.sites[self.center..site] {
            env = transfer_left(&env, dim, t);
            dim = t.dims()[2];
        }
        env
    }

    /// Environment on the right bond of `site` (`R[b, b']`).
    fn right_env(&self, site: usize) -> Vec<C64> {
        let r = self.sites[site].dims()[2];
        if site >= self.center {
            return identity_raw(r);
        }
        let mut dim = self.sites[self.center].dims()[2];
        let mut env = identity_raw(dim);
        for t in self.sites[site + 1..=self.center].iter().rev() {
            env = transfer_right(&env, dim, t);
            dim = t.dims()[0];
        }
        env
    }

    /// Dense state vector (first site most significant). Exponential in the
    /// chain length; intended for small test chains.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut theta = self.sites[0].data().to_vec();
        let mut rows = self.physical_dim(0) * self.sites[0].dims()[0];
        let mut bond = self.sites[0].dims()[2];
        for t in &self.sites[1..] {
            let [_, p, r] = dims3(t);
            theta = matmul_raw(&theta, t.data(), rows, bond, p * r);
            rows *= p;
            bond = r;
        }
        theta
    }

    /// Largest deviation from the canonical isometry conditions.
    pub fn isometry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, t) in self.sites.iter().enumerate() {
            let [l, p, r] = dims3(t);
            if i < self.center {
                let m = ComplexMatrix::from_raw(l * p, r, t.data().to_vec());
                worst = worst.max(m.unitarity_residual());
            } else if i > self.center {
                let m = ComplexMatrix::from_raw(l, p * r, t.data().to_vec());
                worst = worst.max(m.adjoint().unitarity_residual());
            }
        }
        worst
    }
}

/// Fock basis vector `|n⟩` in a space of dimension `d`.
pub fn fock(d: usize, n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[n] = ONE;
    v
}

fn dims3(t: &Tensor) -> [usize; 3] {
    let d = t.dims();
    [d[0], d[1], d[2]]
}

fn identity_raw(n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = ONE;
    }
    v
}

fn transpose_raw(m: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![ZERO; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = m[i * cols + j];
        }
    }
    out
}

fn adjoint_raw(m: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![ZERO; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = m[i * cols + j].conj();
        }
    }
    out
}

/// `L'[b, b'] = Σ L[a, a'] A[a, s, b] conj(A[a', s, b'])`.
fn transfer_left(env: &[C64], dim: usize, t: &Tensor) -> Vec<C64> {
    let [l, p, r] = dims3(t);
    debug_assert_eq!(l, dim);
    let lt = transpose_raw(env, l, l);
    // X[a', s, b] = Σ_a L[a, a'] A[a, s, b]
    let x = matmul_raw(&lt, t.data(), l, l, p * r);
    // L'[b, b'] = Σ_{a', s} X[a', s, b] conj(A[a', s, b'])
    let xt = transpose_raw(&x, l * p, r);
    let ac: Vec<C64> = t.data().iter().map(|z| z.conj()).collect();
    matmul_raw(&xt, &ac, r, l * p, r)
}

/// `R'[a, a'] = Σ A[a, s, b] R[b, b'] conj(A[a', s, b'])`.
fn transfer_right(env: &[C64], dim: usize, t: &Tensor) -> Vec<C64> {
    let [l, p, r] = dims3(t);
    debug_assert_eq!(r, dim);
    // X[a, s, b'] = Σ_b A[a, s, b] R[b, b']
    let x = matmul_raw(t.data(), env, l * p, r, r);
    // R'[a, a'] = Σ_{s, b'} X[a, s, b'] conj(A[a', s, b'])
    let ah = adjoint_raw(t.data(), l, p * r);
    matmul_raw(&x, &ah, l, p * r, l)
}

/// Splits `(l, d_0, ..., d_{n-1}, r)` amplitudes into `n` site tensors.
fn split_block(
    theta: Vec<C64>,
    l: usize,
    dims: &[usize],
    r: usize,
    trunc: Truncation,
    sweep: Sweep,
) -> Result<(Vec<Tensor>, f64), MpsError> {
    let n = dims.len();
    let mut discarded = 0.0;
    let mut sites = Vec::with_capacity(n);
    match sweep {
        Sweep::Right => {
            let mut rest = theta;
            let mut left = l;
            let mut tail: usize = dims.iter().product::<usize>() * r;
            for &d in &dims[..n - 1] {
                tail /= d;
                let m = ComplexMatrix::from_raw(left * d, tail, rest);
                let svd = svd_truncate(&m, trunc.max_bond, trunc.cutoff)?;
                discarded += svd.discarded_weight;
                let k = svd.rank();
                sites.push(Tensor::from_raw(vec![left, d, k], svd.u.clone().into_data()));
                rest = svd.s_vh().into_data();
                left = k;
            }
            sites.push(Tensor::from_raw(vec![left, dims[n - 1], r], rest));
        }
        Sweep::Left => {
            let mut rest = theta;
            let mut right = r;
            let mut head: usize = l * dims.iter().product::<usize>();
            let mut rev = Vec::with_capacity(n);
            for &d in dims[1..].iter().rev() {
                head /= d;
                let m = ComplexMatrix::from_raw(head, d * right, rest);
                let svd = svd_truncate(&m, trunc.max_bond, trunc.cutoff)?;
                discarded += svd.discarded_weight;
                let k = svd.rank();
                rev.push(Tensor::from_raw(vec![k, d, right], svd.vh.clone().into_data()));
                rest = svd.u_s().into_data();
                right = k;
            }
            rev.push(Tensor::from_raw(vec![l, dims[0], right], rest));
            rev.reverse();
            sites = rev;
        }
    }
    Ok((sites, discarded))
}
