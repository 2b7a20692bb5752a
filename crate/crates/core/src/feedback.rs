//! Time-bin propagation of the TLS in front of a mirror.
//!
//! Each step of length `dt` couples the TLS to two field bins: the fresh
//! bin passing the emitter now, and the bin emitted towards the mirror
//! `k = τ/dt` steps earlier, which returns with phase `φ`:
//!
//! ```text
//! U = exp[−iH dt + √(γ_L dt) σ⁻ a†_now + √(γ_R dt) e^{iφ} σ⁻ a†_delayed − H.c.]
//! ```
//!
//! The chain is laid out as `[loop bins (oldest first), TLS, ENV]`. Per
//! step the oldest loop bin is swapped next to the TLS, a fresh vacuum bin
//! is inserted, and the three-site gate runs on `(delayed, new, TLS)`. The
//! gate output is reordered to `(new, TLS, out)` so the new bin joins the
//! loop and the finished bin sits next to `ENV`. It is then folded into
//! `ENV`, a purifying site that stands in for all bins that have left
//! the loop.
//!
//! The chain is stored in the excitation frame `|n⟩ → iⁿ|n⟩` on every site
//! (TLS `|e⟩` counts as one excitation). There the resonant gate with
//! `φ ∈ {0, π}` is real, and the kernels drop to real arithmetic.

use crate::error::FeedbackError;
use crate::mps::{fock, MpsState, Sweep, Truncation};
use crate::qubit::QubitDensityMatrix;
use crate::tensors::{expm_antihermitian, permute_subsystems, ComplexMatrix, C64, I, ONE, ZERO};

/// Largest allowed `dt · max(γ, Ω)`.
pub const MAX_DT_RATE_PRODUCT: f64 = 0.05;
/// Per-step discarded weight above which a run is flagged as truncation
/// limited.
pub const TRUNCATION_FLAG_WEIGHT: f64 = 1e-4;
const REAL_GATE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega: f64,
    pub delta: f64,
    pub phi: f64,
    pub tau: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
}

impl SystemParams {
    /// Resonant drive with the total rate split evenly between the two
    /// directions.
    pub fn symmetric(gamma: f64, omega: f64, phi: f64, tau: f64) -> Self {
        Self { omega, delta: 0.0, phi, tau, gamma_l: 0.5 * gamma, gamma_r: 0.5 * gamma }
    }

    /// Total decay rate `γ_L + γ_R`.
    pub fn gamma(&self) -> f64 {
        self.gamma_l + self.gamma_r
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        self.validate_rates()?;
        if !(self.gamma() > 0.0) {
            return Err(FeedbackError::InvalidSystem("gamma_l + gamma_r must be positive".into()));
        }
        Ok(())
    }

    /// Everything [`validate`](Self::validate) checks except a positive
    /// total rate; enough to build a step unitary.
    fn validate_rates(&self) -> Result<(), FeedbackError> {
        let all = [self.omega, self.delta, self.phi, self.tau, self.gamma_l, self.gamma_r];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(FeedbackError::InvalidSystem(format!("non-finite parameter in {self:?}")));
        }
        if self.gamma_l < 0.0 || self.gamma_r < 0.0 {
            return Err(FeedbackError::InvalidSystem("decay rates must be non-negative".into()));
        }
        if self.tau < 0.0 {
            return Err(FeedbackError::InvalidSystem(format!("tau must be non-negative, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericsParams {
    /// Time step; `None` picks the largest step that satisfies the rate
    /// bound and divides `τ`.
    pub dt: Option<f64>,
    pub d_bin: usize,
    pub d_max: usize,
    /// Relative singular value cutoff.
    pub svd_cutoff: f64,
    pub t_max: f64,
    pub ss_tol: f64,
    /// Averaging window; `None` means `max(τ, 5/γ)`.
    pub ss_window: Option<f64>,
    /// Stop as soon as consecutive window averages agree to `ss_tol`.
    pub stop_at_convergence: bool,
}

impl Default for NumericsParams {
    fn default() -> Self {
        Self {
            dt: None,
            d_bin: 3,
            d_max: 32,
            svd_cutoff: 1e-6,
            t_max: 150.0,
            ss_tol: 1e-3,
            ss_window: None,
            stop_at_convergence: true,
        }
    }
}

/// Numerics resolved against a particular system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolved {
    pub dt: f64,
    /// Delay in steps.
    pub k: usize,
    pub n_steps: usize,
    pub window_steps: usize,
}

impl NumericsParams {
    /// Checks the numerics against `sp` and fixes `dt`, `k`, the step count
    /// and the window length.
    pub fn resolve(&self, sp: &SystemParams) -> Result<Resolved, FeedbackError> {
        sp.validate()?;
        self.resolve_unchecked(sp)
    }

    /// [`resolve`](Self::resolve) without requiring a coupled emitter. An
    /// uncoupled, undriven one needs an explicit `dt`.
    fn resolve_unchecked(&self, sp: &SystemParams) -> Result<Resolved, FeedbackError> {
        sp.validate_rates()?;
        if self.d_bin < 2 {
            return Err(FeedbackError::InvalidNumerics(format!("d_bin must be at least 2, got {}", self.d_bin)));
        }
        if self.d_max < 1 {
            return Err(FeedbackError::InvalidNumerics("d_max must be at least 1".into()));
        }
        if !(self.svd_cutoff >= 0.0) || !self.svd_cutoff.is_finite() {
            return Err(FeedbackError::InvalidNumerics(format!("svd_cutoff must be non-negative, got {}", self.svd_cutoff)));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(FeedbackError::InvalidNumerics(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.ss_tol > 0.0) {
            return Err(FeedbackError::InvalidNumerics(format!("ss_tol must be positive, got {}", self.ss_tol)));
        }
        let rate = sp.gamma().max(sp.omega.abs());
        let dt_limit = MAX_DT_RATE_PRODUCT / rate;
        let (dt, k) = match self.dt {
            None if rate == 0.0 => {
                return Err(FeedbackError::InvalidNumerics("dt must be given for an uncoupled, undriven emitter".into()))
            }
            None => auto_dt(sp.tau, dt_limit),
            Some(dt) => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return Err(FeedbackError::InvalidNumerics(format!("dt must be positive, got {dt}")));
                }
                if dt * rate > MAX_DT_RATE_PRODUCT * (1.0 + 1e-9) {
                    return Err(FeedbackError::InvalidNumerics(format!(
                        "dt = {dt} violates dt·max(γ, Ω) ≤ {MAX_DT_RATE_PRODUCT}; use dt ≤ {dt_limit}"
                    )));
                }
                let ratio = sp.tau / dt;
                let k = ratio.round();
                if (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
                    let nearest = (k as usize).max(1);
                    return Err(FeedbackError::DelayNotMultiple {
                        tau: sp.tau,
                        dt,
                        nearest,
                        hint: sp.tau / nearest as f64,
                    });
                }
                (dt, k as usize)
            }
        };
        let window = match self.ss_window {
            Some(w) if w > 0.0 && w.is_finite() => w,
            Some(w) => return Err(FeedbackError::InvalidNumerics(format!("ss_window must be positive, got {w}"))),
            None if sp.gamma() > 0.0 => sp.tau.max(5.0 / sp.gamma()),
            None => self.t_max,
        };
        let n_steps = (self.t_max / dt - 1e-9).ceil().max(1.0) as usize;
        let window_steps = ((window / dt).round() as usize).max(1);
        Ok(Resolved { dt, k, n_steps, window_steps })
    }

    fn truncation(&self) -> Truncation {
        Truncation { max_bond: self.d_max, cutoff: self.svd_cutoff }
    }
}

/// Largest step below `limit` that divides `tau` (any step when `tau = 0`).
fn auto_dt(tau: f64, limit: f64) -> (f64, usize) {
    if tau == 0.0 {
        return (limit, 0);
    }
    let k = (tau / limit - 1e-9).ceil().max(1.0);
    (tau / k, k as usize)
}

fn lowering_tls() -> ComplexMatrix {
    // σ⁻ = |g⟩⟨e|
    ComplexMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 1 { ONE } else { ZERO })
}

fn raising_bin(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| if i == j + 1 { C64::new((i as f64).sqrt(), 0.0) } else { ZERO })
}

fn tls_hamiltonian(sp: &SystemParams) -> ComplexMatrix {
    let half = C64::new(0.5 * sp.omega, 0.0);
    ComplexMatrix::new(2, 2, vec![ZERO, half, half, C64::new(sp.delta, 0.0)]).expect("finite entries")
}

/// `A − A†` for the emission term `A`.
fn minus_adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.sub(&a.adjoint()).expect("square")
}

/// Step unitary on `TLS ⊗ bin_now ⊗ bin_delayed` for `τ > 0`.
pub fn step_unitary(sp: &SystemParams, np: &NumericsParams) -> Result<ComplexMatrix, FeedbackError> {
    let r = np.resolve_unchecked(sp)?;
    if r.k == 0 {
        return Err(FeedbackError::ZeroDelay);
    }
    step_unitary_with_dt(sp, r.dt, np.d_bin)
}

pub(crate) fn step_unitary_with_dt(sp: &SystemParams, dt: f64, d: usize) -> Result<ComplexMatrix, FeedbackError> {
    let id_b = ComplexMatrix::identity(d);
    let sm = lowering_tls();
    let ad = raising_bin(d);
    let h = tls_hamiltonian(sp).kron(&id_b).kron(&id_b);
    let now = sm.kron(&ad).kron(&id_b).scale(C64::new((sp.gamma_l * dt).sqrt(), 0.0));
    let delayed = sm
        .kron(&id_b)
        .kron(&ad)
        .scale(C64::from_polar((sp.gamma_r * dt).sqrt(), sp.phi));
    let g = h
        .scale(-I * dt)
        .add(&minus_adjoint(&now.add(&delayed)?))?;
    Ok(expm_antihermitian(&g)?)
}

/// Step unitary on `TLS ⊗ bin` for `τ = 0`, where both emission paths
/// address the same bin with amplitude `√γ_L + √γ_R e^{iφ}`.
pub fn markov_limit_unitary(sp: &SystemParams, np: &NumericsParams) -> Result<ComplexMatrix, FeedbackError> {
    sp.validate_rates()?;
    if sp.tau != 0.0 {
        return Err(FeedbackError::NonzeroDelay(sp.tau));
    }
    let r = np.resolve_unchecked(sp)?;
    markov_limit_unitary_with_dt(sp, r.dt, np.d_bin)
}

pub(crate) fn markov_limit_unitary_with_dt(sp: &SystemParams, dt: f64, d: usize) -> Result<ComplexMatrix, FeedbackError> {
    let id_b = ComplexMatrix::identity(d);
    let coupling = (C64::new(sp.gamma_l.sqrt(), 0.0) + C64::from_polar(sp.gamma_r.sqrt(), sp.phi)) * dt.sqrt();
    let h = tls_hamiltonian(sp).kron(&id_b);
    let emit = lowering_tls().kron(&raising_bin(d)).scale(coupling);
    let g = h.scale(-I * dt).add(&minus_adjoint(&emit))?;
    Ok(expm_antihermitian(&g)?)
}

/// Recorded history of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub k: usize,
    /// Time after each recorded step.
    pub times: Vec<f64>,
    pub tls_states: Vec<QubitDensityMatrix>,
    /// State norm at the recorded steps.
    pub norm_history: Vec<f64>,
    /// Mean photon number of the finished bin, every step.
    pub out_bin_population: Vec<f64>,
    pub cum_discarded: f64,
    pub max_step_discarded: f64,
    /// A step discarded more than [`TRUNCATION_FLAG_WEIGHT`].
    pub truncation_limited: bool,
    pub max_bond: usize,
    pub steps: usize,
    pub window_steps: usize,
    pub converged: bool,
    /// Average over the last complete window.
    pub ss_state: QubitDensityMatrix,
    /// Average out-bin population over the same window.
    pub ss_out_population: f64,
}

/// Integrates from `|g⟩` and vacuum.
pub fn simulate(sp: &SystemParams, np: &NumericsParams, record_stride: usize) -> Result<Trajectory, FeedbackError> {
    simulate_from(sp, np, &QubitDensityMatrix::ground(), record_stride)
}

/// Integrates from a pure TLS state and vacuum.
pub fn simulate_from(
    sp: &SystemParams,
    np: &NumericsParams,
    initial: &QubitDensityMatrix,
    record_stride: usize,
) -> Result<Trajectory, FeedbackError> {
    let r = np.resolve(sp)?;
    if record_stride == 0 {
        return Err(FeedbackError::InvalidNumerics("record_stride must be at least 1".into()));
    }
    let d = np.d_bin;
    let trunc = np.truncation();
    let k = r.k;

    let mut locals: Vec<Vec<C64>> = (0..k).map(|_| fock(d, 0)).collect();
    let [amp_g, amp_e] = initial.pure_amplitudes()?;
    locals.push(vec![amp_g, -I * amp_e]);
    locals.push(vec![ONE]);
    let mut mps = MpsState::product(&locals, k)?;

    // Gate on the block (delayed, new, TLS), or (new, TLS) without delay.
    let (gate, perm): (ComplexMatrix, Vec<usize>) = if k == 0 {
        let u = excitation_frame(&markov_limit_unitary_with_dt(sp, r.dt, d)?, &[2, d]);
        (permute_subsystems(&u, &[2, d], &[1, 0])?, vec![1, 0])
    } else {
        let u = excitation_frame(&step_unitary_with_dt(sp, r.dt, d)?, &[2, d, d]);
        (permute_subsystems(&u, &[2, d, d], &[2, 1, 0])?, vec![1, 2, 0])
    };

    let mut tr = Trajectory {
        dt: r.dt,
        k,
        times: Vec::new(),
        tls_states: Vec::new(),
        norm_history: Vec::new(),
        out_bin_population: Vec::with_capacity(r.n_steps),
        cum_discarded: 0.0,
        max_step_discarded: 0.0,
        truncation_limited: false,
        max_bond: 1,
        steps: 0,
        window_steps: r.window_steps,
        converged: false,
        ss_state: *initial,
        ss_out_population: 0.0,
    };
    let mut window = WindowAverager::new(r.window_steps, np.ss_tol);
    let vacuum = fock(d, 0);

    for n in 0..r.n_steps {
        let mut discarded = 0.0;
        if k >= 1 {
            mps.move_center(0)?;
            for i in 0..k - 1 {
                discarded += mps.swap_adjacent(i, trunc)?;
            }
        }
        // The new bin goes just left of the TLS.
        let tls = mps.system_index();
        mps.insert_site(tls, &vacuum)?;
        let start = if k == 0 { tls } else { tls - 1 };
        discarded += mps.apply_block(start, Some(&gate), &perm, trunc, Sweep::Right)?;
        let out = mps.system_index() + 1;
        let pop = mps.site_number_expectation(out)?;
        mps.merge_adjacent(out)?;
        mps.compress_physical(out)?;
        let rho = lab_frame(&mps.system_state()?)?;

        tr.out_bin_population.push(pop);
        tr.cum_discarded += discarded;
        tr.max_step_discarded = tr.max_step_discarded.max(discarded);
        tr.truncation_limited |= discarded > TRUNCATION_FLAG_WEIGHT;
        tr.max_bond = tr.max_bond.max(mps.max_bond_dim());
        tr.steps = n + 1;
        if n % record_stride == record_stride - 1 || n + 1 == r.n_steps {
            tr.times.push((n + 1) as f64 * r.dt);
            tr.tls_states.push(rho);
            tr.norm_history.push(mps.norm());
        }
        if window.push(rho.bloch(), pop) && np.stop_at_convergence {
            break;
        }
    }
    tr.converged = window.converged;
    let (bloch, pop) = window.last_average().unwrap_or_else(|| window.partial_average());
    tr.ss_state = QubitDensityMatrix::from_bloch(bloch[0], bloch[1], bloch[2]).or_else(|_| {
        // Averages of valid states are valid; clip round-off just past
        // the sphere.
        let n = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt();
        QubitDensityMatrix::from_bloch(bloch[0] / n, bloch[1] / n, bloch[2] / n)
    })?;
    tr.ss_out_population = pop;
    Ok(tr)
}

/// `U' = S†US` with `S = diag(i^N)`, `N` the total excitation number of a
/// basis state of `⊗ C^{dims}`.
fn excitation_frame(u: &ComplexMatrix, dims: &[usize]) -> ComplexMatrix {
    let count = |mut flat: usize| {
        let mut n = 0;
        for &d in dims.iter().rev() {
            n += flat % d;
            flat /= d;
        }
        n
    };
    let phase = [ONE, I, -ONE, -I];
    let out = ComplexMatrix::from_fn(u.rows(), u.cols(), |a, b| u[(a, b)] * phase[(4 + count(b) % 4 - count(a) % 4) % 4]);
    // A real gate only picks up round-off from the eigensolver; drop it so
    // the chain stays exactly real.
    if out.data().iter().all(|z| z.im.abs() < REAL_GATE_TOL) {
        ComplexMatrix::from_fn(u.rows(), u.cols(), |a, b| C64::new(out[(a, b)].re, 0.0))
    } else {
        out
    }
}

/// TLS state back from the excitation frame: `ρ_eg = i ρ'_eg`.
fn lab_frame(rho: &QubitDensityMatrix) -> Result<QubitDensityMatrix, FeedbackError> {
    let eg = I * rho.rho_eg();
    Ok(QubitDensityMatrix::new([
        [C64::new(rho.rho_gg(), 0.0), eg.conj()],
        [eg, C64::new(rho.rho_ee(), 0.0)],
    ])?)
}

/// Consecutive-window averages of the Bloch vector and out population.
struct WindowAverager {
    len: usize,
    tol: f64,
    acc: [f64; 4],
    count: usize,
    last: Option<[f64; 4]>,
    converged: bool,
}

impl WindowAverager {
    fn new(len: usize, tol: f64) -> Self {
        Self { len, tol, acc: [0.0; 4], count: 0, last: None, converged: false }
    }

    /// Adds one step; returns true when a window closes with a converged
    /// average.
    fn push(&mut self, bloch: [f64; 3], pop: f64) -> bool {
        for (a, v) in self.acc.iter_mut().zip([bloch[0], bloch[1], bloch[2], pop]) {
            *a += v;
        }
        self.count += 1;
        if self.count < self.len {
            return false;
        }
        let avg = self.acc.map(|a| a / self.count as f64);
        let change = self
            .last
            .map(|prev| (0..3).map(|i| (avg[i] - prev[i]).abs()).fold(0.0, f64::max));
        self.converged = matches!(change, Some(c) if c < self.tol);
        self.last = Some(avg);
        self.acc = [0.0; 4];
        self.count = 0;
        self.converged
    }

    fn last_average(&self) -> Option<([f64; 3], f64)> {
        self.last.map(|a| ([a[0], a[1], a[2]], a[3]))
    }

    fn partial_average(&self) -> ([f64; 3], f64) {
        let n = self.count.max(1) as f64;
        ([self.acc[0] / n, self.acc[1] / n, self.acc[2] / n], self.acc[3] / n)
    }
}

/// Steady state with its diagnostics.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: QubitDensityMatrix,
    pub converged: bool,
    pub truncation_limited: bool,
    pub cum_discarded: f64,
    pub max_bond: usize,
    pub steps: usize,
    pub dt: f64,
    pub trajectory: Trajectory,
}

/// Runs to steady state and returns the final-window average.
pub fn steady_state_nm(sp: &SystemParams, np: &NumericsParams) -> Result<SteadyState, FeedbackError> {
    let stride = record_stride_for(sp, np)?;
    let tr = simulate(sp, np, stride)?;
    Ok(SteadyState {
        state: tr.ss_state,
        converged: tr.converged,
        truncation_limited: tr.truncation_limited,
        cum_discarded: tr.cum_discarded,
        max_bond: tr.max_bond,
        steps: tr.steps,
        dt: tr.dt,
        trajectory: tr,
    })
}

/// Records about ten points per unit time.
fn record_stride_for(sp: &SystemParams, np: &NumericsParams) -> Result<usize, FeedbackError> {
    let r = np.resolve(sp)?;
    Ok(((0.1 / r.dt).round() as usize).max(1))
}

/// Ratio of the out-bin photon flux to the excited population of a
/// trajectory's steady window.
pub fn effective_decay_rate_of(tr: &Trajectory) -> Result<f64, FeedbackError> {
    let ree = tr.ss_state.rho_ee();
    if !(ree > 1e-6) {
        return Err(FeedbackError::UndefinedRate(ree));
    }
    if !tr.converged {
        return Err(FeedbackError::NotConverged);
    }
    Ok(tr.ss_out_population / (tr.dt * ree))
}

/// `γ_eff = ⟨n_out⟩_ss / (dt · ρ_ee)`.
pub fn effective_decay_rate(sp: &SystemParams, np: &NumericsParams) -> Result<f64, FeedbackError> {
    if sp.omega == 0.0 {
        return Err(FeedbackError::UndefinedRate(0.0));
    }
    let ss = steady_state_nm(sp, np)?;
    effective_decay_rate_of(&ss.trajectory)
}
