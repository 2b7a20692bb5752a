//! Distances to the Markovian family and transient non-Markovianity.

use std::cell::Cell;

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;

use crate::error::MeasureError;
use crate::feedback::{simulate_from, NumericsParams, SystemParams};
use crate::lindblad::{steady_state, MarkovParams};
use crate::qubit::QubitDensityMatrix;

/// Trace distance `½ Tr|a − b|`, which for qubits is half the Euclidean
/// distance of the Bloch vectors.
pub fn trace_distance(a: &QubitDensityMatrix, b: &QubitDensityMatrix) -> f64 {
    let (p, q) = (a.bloch(), b.bloch());
    0.5 * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Search domain and resolution for [`nss`]. Rates are in units of `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NssOptions {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_gamma: usize,
    pub gamma_phi_max: f64,
    /// Grid points for `γ_φ`, including `γ_φ = 0`.
    pub n_gamma_phi: usize,
    /// Smallest nonzero `γ_φ` on the log grid.
    pub gamma_phi_min: f64,
    /// Minima below this count as members of the family.
    pub clamp: f64,
    /// Detuning of the family.
    pub delta: f64,
    pub max_iters: u64,
    /// Compare only `ρ_ee` and `|ρ_eg|`, i.e. minimize also over rotations
    /// of `rho` about the z axis.
    pub ignore_coherence_phase: bool,
}

impl Default for NssOptions {
    fn default() -> Self {
        Self {
            gamma_min: 1e-3,
            gamma_max: 1e3,
            n_gamma: 60,
            gamma_phi_max: 1e2,
            n_gamma_phi: 40,
            gamma_phi_min: 1e-3,
            clamp: 1e-3,
            delta: 0.0,
            max_iters: 500,
            ignore_coherence_phase: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NssResult {
    /// Clamped minimum: 0 inside the Markovian region.
    pub value: f64,
    /// Minimum before clamping.
    pub raw_value: f64,
    pub argmin_gamma: f64,
    pub argmin_gamma_phi: f64,
    pub optimizer_evals: usize,
    pub hit_gamma_bound: bool,
    pub hit_gamma_phi_bound: bool,
}

impl NssResult {
    pub fn inside(&self) -> bool {
        self.value == 0.0
    }
}

struct Objective<'a> {
    rho: &'a QubitDensityMatrix,
    omega: f64,
    opts: &'a NssOptions,
    evals: &'a Cell<usize>,
}

impl Objective<'_> {
    fn rates(&self, p: &[f64]) -> (f64, f64) {
        let ln_min = (self.opts.gamma_min * self.omega).ln();
        let ln_max = (self.opts.gamma_max * self.omega).ln();
        let s_max = self.opts.gamma_phi_max.sqrt();
        let gamma = p[0].clamp(ln_min, ln_max).exp();
        let s = p[1].clamp(-s_max, s_max);
        (gamma, self.omega * s * s)
    }

    fn distance(&self, gamma: f64, gamma_phi: f64) -> Result<f64, MeasureError> {
        self.evals.set(self.evals.get() + 1);
        let m = MarkovParams::new(gamma, gamma_phi, self.omega, self.opts.delta);
        let d = steady_state(&m)
            .map(|s| trace_distance(self.rho, &s))
            .map_err(|_| MeasureError::NonFiniteObjective { gamma, gamma_phi })?;
        if !d.is_finite() {
            return Err(MeasureError::NonFiniteObjective { gamma, gamma_phi });
        }
        Ok(d)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        let (gamma, gamma_phi) = self.rates(p);
        Ok(self.distance(gamma, gamma_phi)?)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn refine(
    rho: &QubitDensityMatrix,
    omega: f64,
    opts: &NssOptions,
    evals: &Cell<usize>,
    (u0, s0): (f64, f64),
    du: f64,
) -> Result<(f64, Vec<f64>), MeasureError> {
    let obj = Objective { rho, omega, opts, evals };
    let s_max = opts.gamma_phi_max.sqrt();
    let ds = (0.5 * s0).max(opts.gamma_phi_min.sqrt());
    // Step inward when starting on the upper γ_φ bound.
    let s1 = if s0 + ds > s_max { s0 - ds } else { s0 + ds };
    let simplex = vec![vec![u0, s0], vec![u0 + du, s0], vec![u0, s1]];
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| MeasureError::InvalidOption(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|state| state.max_iters(opts.max_iters))
        .run()
        .map_err(|e| match e.downcast::<MeasureError>() {
            Ok(err) => err,
            Err(other) => MeasureError::InvalidOption(other.to_string()),
        })?;
    let state = res.state();
    let p = state.best_param.clone().unwrap_or_else(|| vec![u0, s0]);
    Ok((state.best_cost, p))
}

/// Minimum trace distance from `rho` to the stationary states of the
/// Markovian family at drive `omega`, over `γ` and `γ_φ ≥ 0`.
///
/// A log grid locates the basin, then a simplex search in
/// `(ln γ, √(γ_φ/Ω))` refines it.
pub fn nss(rho: &QubitDensityMatrix, omega: f64, opts: &NssOptions) -> Result<NssResult, MeasureError> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(MeasureError::NonPositiveDrive(omega));
    }
    let ok = opts.gamma_min > 0.0
        && opts.gamma_max > opts.gamma_min
        && opts.gamma_phi_max > opts.gamma_phi_min
        && opts.gamma_phi_min > 0.0
        && opts.n_gamma >= 2
        && opts.n_gamma_phi >= 2
        && opts.clamp >= 0.0;
    if !ok {
        return Err(MeasureError::InvalidOption(format!("{opts:?}")));
    }
    let rotated;
    let rho = if opts.ignore_coherence_phase {
        let [x, y, z] = rho.bloch();
        rotated = QubitDensityMatrix::from_bloch(0.0, x.hypot(y), z).map_err(|e| MeasureError::InvalidOption(e.to_string()))?;
        &rotated
    } else {
        rho
    };
    let evals = Cell::new(0);
    let obj = Objective { rho, omega, opts, evals: &evals };

    let gammas = log_grid(opts.gamma_min * omega, opts.gamma_max * omega, opts.n_gamma);
    let mut gamma_phis = vec![0.0];
    gamma_phis.extend(log_grid(opts.gamma_phi_min * omega, opts.gamma_phi_max * omega, opts.n_gamma_phi - 1));
    let mut grid = Vec::with_capacity(gammas.len() * gamma_phis.len());
    for &g in &gammas {
        for &gp in &gamma_phis {
            grid.push((obj.distance(g, gp)?, g, gp));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = grid[0];

    // Seeds: the best grid points, plus the exact inversion of the
    // stationary relations when it lands inside the domain.
    let mut seeds: Vec<(f64, f64)> = grid.iter().take(3).map(|&(_, g, gp)| (g.ln(), (gp / omega).sqrt())).collect();
    if let Ok(fit) = fit_effective_rates(rho, omega) {
        let (g, gp) = (fit.gamma / omega, fit.gamma_phi / omega);
        if (opts.gamma_min..=opts.gamma_max).contains(&g) && (0.0..=opts.gamma_phi_max).contains(&gp) {
            seeds.push((fit.gamma.ln(), gp.sqrt()));
        }
    }
    let du = (opts.gamma_max / opts.gamma_min).ln() / (opts.n_gamma - 1) as f64;
    for (u0, s0) in seeds {
        let mut start = (u0, s0);
        // One restart from the first result guards against a collapsed simplex.
        for _ in 0..2 {
            let (c, p) = refine(rho, omega, opts, &evals, start, du)?;
            start = (p[0], p[1]);
            let obj = Objective { rho, omega, opts, evals: &evals };
            let (g, gp) = obj.rates(&p);
            if c < best.0 {
                best = (c, g, gp);
            }
        }
    }
    let (raw, gamma, gamma_phi) = best;

    let ln_step = du;
    Ok(NssResult {
        value: if raw < opts.clamp { 0.0 } else { raw },
        raw_value: raw,
        argmin_gamma: gamma,
        argmin_gamma_phi: gamma_phi,
        optimizer_evals: evals.get(),
        hit_gamma_bound: (gamma / (opts.gamma_min * omega)).ln() < 0.5 * ln_step
            || ((opts.gamma_max * omega) / gamma).ln() < 0.5 * ln_step,
        hit_gamma_phi_bound: gamma_phi >= opts.gamma_phi_max * omega * (1.0 - 1e-9),
    })
}

/// Inverts the resonant stationary Bloch relations
/// `γ = Ωy/(1 + z)`, `γ/2 + γ_φ = −Ωz/y` for `(γ, γ_φ)`.
///
/// `γ_φ` comes out negative for states outside the physical family, e.g.
/// inverted ones. The `x` component is ignored; it vanishes for resonant
/// steady states.
pub fn fit_effective_rates(rho: &QubitDensityMatrix, omega: f64) -> Result<MarkovParams, MeasureError> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(MeasureError::NonPositiveDrive(omega));
    }
    let [_, y, z] = rho.bloch();
    if y.abs() < 1e-12 {
        return Err(MeasureError::NonInvertible("Bloch y component vanishes".into()));
    }
    if (1.0 + z).abs() < 1e-12 {
        return Err(MeasureError::NonInvertible("state is fully excited".into()));
    }
    let gamma = omega * y / (1.0 + z);
    if !(gamma > 0.0) {
        return Err(MeasureError::UnphysicalFit(gamma));
    }
    let gamma2 = -omega * z / y;
    Ok(MarkovParams::resonant(gamma, gamma2 - 0.5 * gamma, omega))
}

#[derive(Clone, Debug)]
pub struct BlpResult {
    pub value: f64,
    pub times: Vec<f64>,
    pub trace_distance_series: Vec<f64>,
    /// Central-difference estimate of `dT/dt` on `times`.
    pub sigma: Vec<f64>,
    /// Maximal intervals on which `T` increases.
    pub positive_segments: Vec<(f64, f64)>,
    /// `|dT/dt|` at the horizon is below `ss_tol`.
    pub converged: bool,
    pub truncation_limited: bool,
}

/// Trace-distance backflow for the pair `|g⟩`, `|e⟩`: the sum of all
/// increases of `T(t)` between samples taken every `stride` steps, up to
/// `t_max`.
pub fn blp(sp: &SystemParams, np: &NumericsParams, stride: usize) -> Result<BlpResult, MeasureError> {
    let np = NumericsParams { stop_at_convergence: false, ..*np };
    let a = simulate_from(sp, &np, &QubitDensityMatrix::ground(), stride)?;
    let b = simulate_from(sp, &np, &QubitDensityMatrix::excited(), stride)?;
    let mut times = vec![0.0];
    times.extend(&a.times);
    let mut series = vec![1.0];
    series.extend(a.tls_states.iter().zip(&b.tls_states).map(|(x, y)| trace_distance(x, y)));
    Ok(backflow(times, series, np.ss_tol, a.truncation_limited || b.truncation_limited))
}

fn backflow(times: Vec<f64>, series: Vec<f64>, tol: f64, truncation_limited: bool) -> BlpResult {
    let n = series.len();
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            if hi == lo {
                0.0
            } else {
                (series[hi] - series[lo]) / (times[hi] - times[lo])
            }
        })
        .collect();
    let mut value = 0.0;
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for i in 1..n {
        let inc = series[i] - series[i - 1];
        if inc > 0.0 {
            value += inc;
            match segments.last_mut() {
                Some(seg) if seg.1 == times[i - 1] => seg.1 = times[i],
                _ => segments.push((times[i - 1], times[i])),
            }
        }
    }
    let converged = sigma.last().is_some_and(|s| s.abs() <= tol);
    BlpResult { value, times, trace_distance_series: series, sigma, positive_segments: segments, converged, truncation_limited }
}
