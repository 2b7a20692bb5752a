//! Flat `key = value` run configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nmss_core::feedback::{NumericsParams, SystemParams};
use nmss_core::FeedbackError;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SteadyState,
    Sweep,
    Nss,
    Blp,
    GammaEff,
    MarkovBaseline,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::SteadyState, Mode::Sweep, Mode::Nss, Mode::Blp, Mode::GammaEff, Mode::MarkovBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SteadyState => "steady-state",
            Mode::Sweep => "sweep",
            Mode::Nss => "nss",
            Mode::Blp => "blp",
            Mode::GammaEff => "gamma-eff",
            Mode::MarkovBaseline => "markov-baseline",
        }
    }

    fn needs_delay(self) -> bool {
        self != Mode::MarkovBaseline
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}, expected one of steady-state, sweep, nss, blp, gamma-eff, markov-baseline"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{location}invalid `{key}`: {msg}")]
    Invalid { key: String, location: String, msg: String },
}

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub system: SystemParams,
    pub numerics: NumericsParams,
    /// Dephasing rate of the Markovian reference (`markov-baseline` only).
    pub gamma_phi: f64,
    pub omegas: Vec<f64>,
    pub taus: Vec<f64>,
    pub phis: Vec<f64>,
    pub out: Option<String>,
    /// Samples per recorded point in `blp`; `None` picks ~0.05 time units.
    pub record_stride: Option<usize>,
}

/// One point of the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub omega: f64,
    pub tau: f64,
    pub phi: f64,
}

impl RunConfig {
    /// Grid points in output order: `τ` outermost, then `φ`, then `Ω`.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.taus.len() * self.phis.len() * self.omegas.len());
        for &tau in &self.taus {
            for &phi in &self.phis {
                for &omega in &self.omegas {
                    out.push(Point { omega, tau, phi });
                }
            }
        }
        out
    }

    pub fn system_at(&self, p: Point) -> SystemParams {
        SystemParams { omega: p.omega, tau: p.tau, phi: p.phi, ..self.system }
    }

    /// Every resolved setting as `(key, value)` pairs in a fixed order.
    pub fn resolved_entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.system;
        let n = &self.numerics;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| format!("{x}"));
        vec![
            ("mode", self.mode.to_string()),
            ("gamma_l", format!("{}", s.gamma_l)),
            ("gamma_r", format!("{}", s.gamma_r)),
            ("delta", format!("{}", s.delta)),
            ("gamma_phi", format!("{}", self.gamma_phi)),
            ("omegas", list(&self.omegas)),
            ("taus", list(&self.taus)),
            ("phis", list(&self.phis)),
            ("dt", opt(n.dt)),
            ("d_bin", format!("{}", n.d_bin)),
            ("d_max", format!("{}", n.d_max)),
            ("svd_cutoff", format!("{}", n.svd_cutoff)),
            ("t_max", format!("{}", n.t_max)),
            ("ss_tol", format!("{}", n.ss_tol)),
            ("ss_window", opt(n.ss_window)),
            ("stop_at_convergence", format!("{}", n.stop_at_convergence)),
            ("record_stride", self.record_stride.map_or("auto".to_string(), |x| x.to_string())),
        ]
    }
}

const KEYS: &[&str] = &[
    "mode", "gamma", "gamma_l", "gamma_r", "omega", "omegas", "tau", "taus", "phi", "phis", "delta",
    "gamma_phi", "dt", "d_bin", "d_max", "svd_cutoff", "t_max", "ss_tol", "ss_window",
    "stop_at_convergence", "record_stride", "out",
];

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn line(&self, key: &str) -> String {
        self.entries.get(key).map_or(String::new(), |(l, _)| format!("line {l}: "))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|(line, v)| {
                v.parse::<T>().map_err(|e| ConfigError::Value { line: *line, key: key.into(), msg: format!("{v:?}: {e}") })
            })
            .transpose()
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = self.parse::<f64>(key)?;
        if let (Some(x), Some((line, _))) = (v, self.get(key)) {
            if !x.is_finite() {
                return Err(ConfigError::Value { line: *line, key: key.into(), msg: "not a finite number".into() });
            }
        }
        Ok(v)
    }

    /// A number, or `auto` for the derived default.
    fn number_or_auto(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            Some((_, v)) if v == "auto" => Ok(None),
            _ => self.number(key),
        }
    }

    /// A list `a, b, c` or a range `start:stop:n` with `n` evenly spaced
    /// points including both ends.
    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((line, v)) = self.get(key) else { return Ok(None) };
        let err = |msg: String| ConfigError::Value { line: *line, key: key.into(), msg };
        let num = |s: &str| -> Result<f64, ConfigError> {
            match s.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(err(format!("malformed number {:?}", s.trim()))),
            }
        };
        let values = if v.contains(':') {
            let parts: Vec<&str> = v.split(':').collect();
            if parts.len() != 3 {
                return Err(err("range must be start:stop:n".into()));
            }
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2].trim().parse().map_err(|_| err(format!("malformed count {:?}", parts[2].trim())))?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            v.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err(err("empty list".into()));
        }
        Ok(Some(values))
    }
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: content.into() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line, text: content.into() });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line, key: k.into() });
        }
        if let Some((first, _)) = entries.get(k) {
            return Err(ConfigError::Duplicate { line, key: k.into(), first: *first });
        }
        entries.insert(k.to_string(), (line, v.to_string()));
    }
    Ok(Raw { entries })
}

/// Parses and validates a configuration. `mode_override` replaces the
/// `mode` key, as the `--mode` flag does.
pub fn parse_config_with_mode(text: &str, mode_override: Option<Mode>) -> Result<RunConfig, ConfigError> {
    let raw = tokenize(text)?;
    let mode = match mode_override {
        Some(m) => m,
        None => raw.parse::<Mode>("mode")?.ok_or_else(|| ConfigError::Missing("mode".into()))?,
    };

    let (gamma_l, gamma_r) = match (raw.number("gamma")?, raw.number("gamma_l")?, raw.number("gamma_r")?) {
        (Some(g), None, None) => (0.5 * g, 0.5 * g),
        (None, Some(l), Some(r)) => (l, r),
        (None, None, None) => return Err(ConfigError::Missing("gamma (or gamma_l and gamma_r)".into())),
        (Some(_), _, _) => {
            return Err(ConfigError::Invalid {
                key: "gamma".into(),
                location: raw.line("gamma"),
                msg: "give either gamma or the pair gamma_l, gamma_r".into(),
            })
        }
        (None, l, _) => {
            let key = if l.is_none() { "gamma_l" } else { "gamma_r" };
            return Err(ConfigError::Missing(key.into()));
        }
    };

    let axis = |single: &str, many: &str, default: Option<f64>| -> Result<Vec<f64>, ConfigError> {
        match (raw.number(single)?, raw.list(many)?) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid {
                key: many.into(),
                location: raw.line(many),
                msg: format!("give either `{single}` or `{many}`"),
            }),
            (Some(x), None) => Ok(vec![x]),
            (None, Some(v)) => Ok(v),
            (None, None) => default.map(|d| vec![d]).ok_or_else(|| ConfigError::Missing(format!("{single} (or {many})"))),
        }
    };
    let omegas = axis("omega", "omegas", None)?;
    let taus = if mode.needs_delay() { axis("tau", "taus", None)? } else { axis("tau", "taus", Some(0.0))? };
    let phis = axis("phi", "phis", Some(0.0))?;

    let has_axis = ["omegas", "taus", "phis"].iter().any(|k| raw.get(k).is_some());
    if mode == Mode::Sweep && !has_axis {
        return Err(ConfigError::Missing("a sweep axis (omegas, taus or phis)".into()));
    }
    if mode == Mode::SteadyState && has_axis {
        return Err(ConfigError::Invalid {
            key: "mode".into(),
            location: raw.line("mode"),
            msg: "steady-state runs a single point; use mode = sweep for grids".into(),
        });
    }

    let defaults = NumericsParams::default();
    let numerics = NumericsParams {
        dt: raw.number_or_auto("dt")?,
        d_bin: raw.parse("d_bin")?.unwrap_or(defaults.d_bin),
        d_max: raw.parse("d_max")?.unwrap_or(defaults.d_max),
        svd_cutoff: raw.number("svd_cutoff")?.unwrap_or(defaults.svd_cutoff),
        t_max: raw.number("t_max")?.unwrap_or(defaults.t_max),
        ss_tol: raw.number("ss_tol")?.unwrap_or(defaults.ss_tol),
        ss_window: raw.number_or_auto("ss_window")?,
        stop_at_convergence: raw.parse("stop_at_convergence")?.unwrap_or(defaults.stop_at_convergence),
    };
    let record_stride: Option<usize> = raw.parse("record_stride")?;
    if record_stride == Some(0) {
        return Err(ConfigError::Invalid { key: "record_stride".into(), location: raw.line("record_stride"), msg: "must be positive".into() });
    }

    let config = RunConfig {
        mode,
        system: SystemParams { omega: omegas[0], delta: raw.number("delta")?.unwrap_or(0.0), phi: phis[0], tau: taus[0], gamma_l, gamma_r },
        numerics,
        gamma_phi: raw.number("gamma_phi")?.unwrap_or(0.0),
        omegas,
        taus,
        phis,
        out: raw.get("out").map(|(_, v)| v.clone()),
        record_stride,
    };
    validate(&config, &raw)?;
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_mode(text, None)
}

fn validate(c: &RunConfig, raw: &Raw) -> Result<(), ConfigError> {
    let invalid = |key: &str, msg: String| ConfigError::Invalid { key: key.into(), location: raw.line(key), msg };
    if c.gamma_phi < 0.0 {
        return Err(invalid("gamma_phi", "must be non-negative".into()));
    }
    if c.mode == Mode::MarkovBaseline {
        let gamma = c.system.gamma();
        if !(gamma > 0.0) {
            return Err(invalid("gamma", format!("total decay rate must be positive, got {gamma}")));
        }
        return Ok(());
    }
    for p in c.points() {
        match c.numerics.resolve(&c.system_at(p)) {
            Ok(_) => {}
            Err(FeedbackError::DelayNotMultiple { tau, dt, nearest, hint }) => {
                return Err(invalid(
                    "dt",
                    format!("tau = {tau} is not an integer multiple of dt = {dt}; try dt = {hint} ({nearest} bins)"),
                ))
            }
            Err(e) => {
                let key = match &e {
                    FeedbackError::InvalidNumerics(m) | FeedbackError::InvalidSystem(m) => {
                        KEYS.iter().find(|k| m.starts_with(*k)).copied().unwrap_or("system")
                    }
                    _ => "system",
                };
                return Err(invalid(key, format!("{e} (at omega = {}, tau = {}, phi = {})", p.omega, p.tau, p.phi)));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# run\n\nmode = steady-state # inline\ngamma = 1\nomega = 2\ntau = 0.5\n").unwrap();
        assert_eq!(c.mode, Mode::SteadyState);
        assert_eq!(c.system.gamma_l, 0.5);
        assert_eq!(c.points().len(), 1);
    }

    #[test]
    fn range_syntax() {
        let c = parse_config("mode = sweep\ngamma = 1\nomegas = 0:1:5\ntau = 0.5\n").unwrap();
        assert_eq!(c.omegas, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn duplicate_key() {
        let e = parse_config("mode = sweep\nmode = nss\n").unwrap_err();
        assert_eq!(e, ConfigError::Duplicate { line: 2, key: "mode".into(), first: 1 });
    }
}
