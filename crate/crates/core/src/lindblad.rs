//! Markovian reference dynamics of the driven TLS.
//!
//! ```text
//! dρ/dt = −i[H, ρ] + γ/2 (2σ⁻ρσ⁺ − {σ⁺σ⁻, ρ}) + γ_φ (2σ⁺σ⁻ρσ⁺σ⁻ − {σ⁺σ⁻, ρ})
//! H     = Δσ⁺σ⁻ + Ω/2 (σ⁺ + σ⁻)
//! ```
//!
//! The dephasing term is taken literally, so coherences decay at
//! `γ/2 + γ_φ`. Steady states come from the null vector of the 4x4
//! Liouvillian, which also covers Δ ≠ 0 and negative fitted `γ_φ`.

use crate::error::LindbladError;
use crate::qubit::QubitDensityMatrix;
use crate::tensors::{svd_full, ComplexMatrix, C64, I, ONE, ZERO};

/// Largest RK4 step accepted, in units of the inverse fastest rate.
pub const MAX_STEP_FRACTION: f64 = 0.1;
/// RK4 step used by [`evolve`], in units of the inverse fastest rate.
pub const DEFAULT_STEP_FRACTION: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovParams {
    pub gamma: f64,
    /// Pure dephasing rate. Physical members of the family have
    /// `gamma_phi ≥ 0`; fits may return negative values.
    pub gamma_phi: f64,
    pub omega: f64,
    pub delta: f64,
}

impl MarkovParams {
    pub fn new(gamma: f64, gamma_phi: f64, omega: f64, delta: f64) -> Self {
        Self { gamma, gamma_phi, omega, delta }
    }

    /// Resonant drive, `Δ = 0`.
    pub fn resonant(gamma: f64, gamma_phi: f64, omega: f64) -> Self {
        Self::new(gamma, gamma_phi, omega, 0.0)
    }

    /// Mirror-renormalized decay `γ = 2γ′cos φ` from the bare rate `γ′`.
    pub fn with_mirror(bare_gamma: f64, phi: f64, gamma_phi: f64, omega: f64, delta: f64) -> Self {
        Self::new(2.0 * bare_gamma * phi.cos(), gamma_phi, omega, delta)
    }

    fn validate(&self) -> Result<(), LindbladError> {
        let all = [self.gamma, self.gamma_phi, self.omega, self.delta];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(LindbladError::InvalidParams(format!("non-finite parameter in {self:?}")));
        }
        if !(self.gamma > 0.0) {
            return Err(LindbladError::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.gamma + 2.0 * self.gamma_phi > 0.0) {
            return Err(LindbladError::InvalidParams(format!(
                "gamma + 2 gamma_phi must be positive, got {}",
                self.gamma + 2.0 * self.gamma_phi
            )));
        }
        Ok(())
    }

    /// Fastest rate in the generator, used to bound integration steps.
    pub fn max_rate(&self) -> f64 {
        [self.gamma, self.gamma_phi, self.omega, self.delta]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

type M2 = [[C64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn apply_generator(p: &MarkovParams, rho: &M2) -> M2 {
    let h: M2 = [
        [ZERO, C64::new(0.5 * p.omega, 0.0)],
        [C64::new(0.5 * p.omega, 0.0), C64::new(p.delta, 0.0)],
    ];
    // σ⁻ = |g⟩⟨e|, σ⁺σ⁻ = |e⟩⟨e|
    let sm: M2 = [[ZERO, ONE], [ZERO, ZERO]];
    let sp: M2 = [[ZERO, ZERO], [ONE, ZERO]];
    let pe: M2 = [[ZERO, ZERO], [ZERO, ONE]];
    let hr = mul(&h, rho);
    let rh = mul(rho, &h);
    let jump = mul(&mul(&sm, rho), &sp);
    let pr = mul(&pe, rho);
    let rp = mul(rho, &pe);
    let prp = mul(&pr, &pe);
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = -I * (hr[i][j] - rh[i][j])
                + 0.5 * p.gamma * (2.0 * jump[i][j] - pr[i][j] - rp[i][j])
                + p.gamma_phi * (2.0 * prp[i][j] - pr[i][j] - rp[i][j]);
        }
    }
    out
}

/// Liouvillian acting on row-major `vec(ρ) = (ρ_gg, ρ_ge, ρ_eg, ρ_ee)`.
pub fn liouvillian(p: &MarkovParams) -> ComplexMatrix {
    let mut l = ComplexMatrix::zeros(4, 4);
    for col in 0..4 {
        let mut basis = [[ZERO; 2]; 2];
        basis[col / 2][col % 2] = ONE;
        let image = apply_generator(p, &basis);
        for row in 0..4 {
            l[(row, col)] = image[row / 2][row % 2];
        }
    }
    l
}

/// Unique stationary state, from the Liouvillian null vector.
pub fn steady_state(p: &MarkovParams) -> Result<QubitDensityMatrix, LindbladError> {
    p.validate()?;
    let l = liouvillian(p);
    let svd = svd_full(&l)?;
    let s = &svd.singular_values;
    let tol = 1e-10 * s[0].max(1e-300);
    let null_dim = s.iter().filter(|&&x| x <= tol).count();
    if null_dim != 1 {
        return Err(LindbladError::Degenerate(null_dim));
    }
    // The null vector is the last right singular vector, i.e. the
    // conjugated last row of vh. Its phase is arbitrary, so divide by the
    // complex trace.
    let v: Vec<C64> = (0..4).map(|j| svd.vh[(3, j)].conj()).collect();
    let tr = v[0] + v[3];
    let v: Vec<C64> = v.iter().map(|z| z / tr).collect();
    Ok(QubitDensityMatrix::from_unnormalized([[v[0], v[1]], [v[2], v[3]]])?)
}

/// Largest entry of `L(ρ)`; zero for a stationary state.
pub fn stationarity_residual(p: &MarkovParams, rho: &QubitDensityMatrix) -> f64 {
    let m = [[rho.get(0, 0), rho.get(0, 1)], [rho.get(1, 0), rho.get(1, 1)]];
    let out = apply_generator(p, &m);
    out.iter().flatten().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// States on `times`, integrated with RK4 at the default step.
pub fn evolve(p: &MarkovParams, rho0: &QubitDensityMatrix, times: &[f64]) -> Result<Vec<QubitDensityMatrix>, LindbladError> {
    let step = DEFAULT_STEP_FRACTION / p.max_rate().max(f64::MIN_POSITIVE);
    evolve_with_step(p, rho0, times, step)
}

/// States on `times`, integrated with fixed RK4 steps no longer than `step`.
/// Each grid interval is split into equal sub-steps. The first output is
/// `rho0`, taken to be the state at `times[0]`.
pub fn evolve_with_step(
    p: &MarkovParams,
    rho0: &QubitDensityMatrix,
    times: &[f64],
    step: f64,
) -> Result<Vec<QubitDensityMatrix>, LindbladError> {
    if ![p.gamma, p.gamma_phi, p.omega, p.delta].iter().all(|v| v.is_finite()) {
        return Err(LindbladError::InvalidParams(format!("non-finite parameter in {p:?}")));
    }
    let limit = MAX_STEP_FRACTION / p.max_rate().max(f64::MIN_POSITIVE);
    if !(step > 0.0) || step > limit {
        return Err(LindbladError::StepTooLarge { step, limit });
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(LindbladError::NonMonotoneGrid(i + 1));
        }
    }
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return Ok(out);
    }
    let mut rho = [[rho0.get(0, 0), rho0.get(0, 1)], [rho0.get(1, 0), rho0.get(1, 1)]];
    out.push(*rho0);
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = (span / step).ceil() as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                rho = rk4_step(p, &rho, h);
            }
        }
        out.push(QubitDensityMatrix::new(hermitize(&rho))?);
    }
    Ok(out)
}

fn rk4_step(p: &MarkovParams, rho: &M2, h: f64) -> M2 {
    let add = |a: &M2, b: &M2, s: f64| -> M2 {
        let mut o = *a;
        for i in 0..2 {
            for j in 0..2 {
                o[i][j] += s * b[i][j];
            }
        }
        o
    };
    let k1 = apply_generator(p, rho);
    let k2 = apply_generator(p, &add(rho, &k1, 0.5 * h));
    let k3 = apply_generator(p, &add(rho, &k2, 0.5 * h));
    let k4 = apply_generator(p, &add(rho, &k3, h));
    let mut o = *rho;
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
        }
    }
    o
}

fn hermitize(m: &M2) -> M2 {
    let off = 0.5 * (m[1][0] + m[0][1].conj());
    [[C64::new(m[0][0].re, 0.0), off.conj()], [off, C64::new(m[1][1].re, 0.0)]]
}

/// Undephased resonant steady states along `omega_grid`: the outer edge of
/// the Markovian region at fixed `gamma`.
pub fn markov_boundary(omega_grid: &[f64], gamma: f64) -> Result<Vec<QubitDensityMatrix>, LindbladError> {
    omega_grid
        .iter()
        .map(|&omega| {
            if !(omega >= 0.0) {
                return Err(LindbladError::InvalidParams(format!("omega must be non-negative, got {omega}")));
            }
            steady_state(&MarkovParams::resonant(gamma, 0.0, omega))
        })
        .collect()
}
