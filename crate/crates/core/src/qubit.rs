//! Two-level-system density matrices.
//!
//! Matrix form uses the basis order `(|g⟩, |e⟩)`, matching the physical index
//! of the TLS site in the chain. The Bloch vector follows
//! `ρ = ½(I + xσx + yσy + zσz)` with `σz|e⟩ = +|e⟩`, so `z = ρ_ee − ρ_gg`
//! and `ρ_eg = ⟨e|ρ|g⟩ = (x − iy)/2`.

use crate::error::StateError;
use crate::tensors::{ComplexMatrix, C64};

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitDensityMatrix {
    m: [[C64; 2]; 2],
}

impl QubitDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self, StateError> {
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if !(herm <= HERMITIAN_TOL) {
            return Err(StateError::NotHermitian(herm));
        }
        let tr = m[0][0].re + m[1][1].re;
        if !((tr - 1.0).abs() <= TRACE_TOL) {
            return Err(StateError::BadTrace(tr));
        }
        let rho = Self { m };
        let low = rho.eigenvalues()[0];
        if low < -PSD_TOL {
            return Err(StateError::NotPositive(low));
        }
        Ok(rho)
    }

    /// Builds a state from an unnormalized Hermitian PSD matrix, dividing by
    /// its trace and symmetrizing away round-off.
    pub fn from_unnormalized(m: [[C64; 2]; 2]) -> Result<Self, StateError> {
        let tr = m[0][0].re + m[1][1].re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(StateError::BadTrace(tr));
        }
        let off = 0.5 * (m[1][0] + m[0][1].conj()) / tr;
        Self::new([
            [C64::new(m[0][0].re / tr, 0.0), off.conj()],
            [off, C64::new(m[1][1].re / tr, 0.0)],
        ])
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self, StateError> {
        if m.rows() != 2 || m.cols() != 2 {
            return Err(StateError::WrongShape(m.rows(), m.cols()));
        }
        Self::new([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
    }

    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self, StateError> {
        let eg = C64::new(0.5 * x, -0.5 * y);
        Self::new([
            [C64::new(0.5 * (1.0 - z), 0.0), eg.conj()],
            [eg, C64::new(0.5 * (1.0 + z), 0.0)],
        ])
    }

    /// Projector onto `α|g⟩ + β|e⟩` (normalized internally).
    pub fn pure(amp_g: C64, amp_e: C64) -> Result<Self, StateError> {
        let n = amp_g.norm_sqr() + amp_e.norm_sqr();
        if !(n > 0.0) {
            return Err(StateError::BadTrace(n));
        }
        let (g, e) = (amp_g / n.sqrt(), amp_e / n.sqrt());
        Self::new([[g * g.conj(), g * e.conj()], [e * g.conj(), e * e.conj()]])
    }

    pub fn ground() -> Self {
        Self::from_bloch(0.0, 0.0, -1.0).expect("ground state is valid")
    }

    pub fn excited() -> Self {
        Self::from_bloch(0.0, 0.0, 1.0).expect("excited state is valid")
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch(0.0, 0.0, 0.0).expect("I/2 is valid")
    }

    /// Entry `⟨i|ρ|j⟩` with `0 = g`, `1 = e`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| self.m[i][j])
    }

    pub fn rho_ee(&self) -> f64 {
        self.m[EXCITED][EXCITED].re
    }

    pub fn rho_gg(&self) -> f64 {
        self.m[GROUND][GROUND].re
    }

    /// Coherence `⟨e|ρ|g⟩`.
    pub fn rho_eg(&self) -> C64 {
        self.m[EXCITED][GROUND]
    }

    pub fn bloch(&self) -> [f64; 3] {
        let eg = self.rho_eg();
        [2.0 * eg.re, -2.0 * eg.im, self.rho_ee() - self.rho_gg()]
    }

    pub fn purity(&self) -> f64 {
        let [x, y, z] = self.bloch();
        0.5 * (1.0 + x * x + y * y + z * z)
    }

    /// Ascending eigenvalues `(1 ∓ |r|)/2`.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let tr = self.m[0][0].re + self.m[1][1].re;
        let diff = self.m[1][1].re - self.m[0][0].re;
        let r = (diff * diff + 4.0 * self.m[1][0].norm_sqr()).sqrt();
        [0.5 * (tr - r), 0.5 * (tr + r)]
    }

    /// State vector `(amp_g, amp_e)` of a pure state, defined up to a global
    /// phase.
    pub fn pure_amplitudes(&self) -> Result<[C64; 2], StateError> {
        let p = self.purity();
        if (p - 1.0).abs() > 1e-8 {
            return Err(StateError::NotPure(p));
        }
        let gg = self.rho_gg();
        let ee = self.rho_ee();
        if gg >= ee {
            let g = gg.sqrt();
            Ok([C64::new(g, 0.0), self.m[1][0] / g])
        } else {
            let e = ee.sqrt();
            Ok([self.m[0][1] / e, C64::new(e, 0.0)])
        }
    }

    /// Componentwise average of states, e.g. a time average.
    pub fn average<'a>(states: impl IntoIterator<Item = &'a QubitDensityMatrix>) -> Option<Self> {
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for s in states {
            let b = s.bloch();
            for (a, v) in acc.iter_mut().zip(b) {
                *a += v;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let f = 1.0 / n as f64;
        Self::from_bloch(acc[0] * f, acc[1] * f, acc[2] * f).ok()
    }
}
