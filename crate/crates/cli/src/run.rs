//! Executes a [`RunConfig`] and serializes the results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nmss_core::feedback::{effective_decay_rate_of, steady_state_nm, NumericsParams};
use nmss_core::lindblad::{steady_state, MarkovParams};
use nmss_core::measures::{blp, nss, NssOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, Point, RunConfig};

/// Per-row status: everything that went wrong or is doubtful at a point.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Status {
    pub converged: bool,
    pub truncation_limited: bool,
    pub error: Option<String>,
}

impl Status {
    fn ok() -> Self {
        Self { converged: true, ..Default::default() }
    }

    fn failed(msg: impl ToString) -> Self {
        Self { error: Some(msg.to_string()), ..Default::default() }
    }

    /// `ok`, or `;`-joined flags. Commas are stripped so the cell stays a
    /// single CSV field.
    pub fn label(&self) -> String {
        let mut flags = Vec::new();
        if !self.converged {
            flags.push("not_converged".to_string());
        }
        if self.truncation_limited {
            flags.push("truncation_limited".to_string());
        }
        if let Some(e) = &self.error {
            flags.push(format!("error: {}", e.replace([',', '\n'], " ")));
        }
        if flags.is_empty() {
            "ok".into()
        } else {
            flags.join(";")
        }
    }
}

/// One output row: values in schema order, `None` for cells that could not
/// be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub point: Point,
    pub values: Vec<Option<f64>>,
    pub status: Status,
}

pub fn columns(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::SteadyState | Mode::Sweep | Mode::Nss => &[
            "omega", "tau", "phi", "rho_ee", "re_rho_eg", "im_rho_eg", "bloch_x", "bloch_y", "bloch_z", "nss", "converged",
            "discarded_weight", "status",
        ],
        Mode::Blp => &["omega", "tau", "phi", "blp_n", "converged", "status"],
        Mode::GammaEff => &["omega", "tau", "phi", "gamma_eff", "rho_ee", "converged", "status"],
        Mode::MarkovBaseline => &["omega", "gamma", "gamma_phi", "rho_ee", "re_rho_eg", "im_rho_eg", "status"],
    }
}

/// Default BLP sampling: about every 0.05 time units.
fn blp_stride(config: &RunConfig, np: &NumericsParams, p: Point) -> usize {
    config.record_stride.unwrap_or_else(|| {
        np.resolve(&config.system_at(p)).map_or(1, |r| ((0.05 / r.dt).round() as usize).max(1))
    })
}

fn compute(config: &RunConfig, p: Point) -> Row {
    let sp = config.system_at(p);
    let np = config.numerics;
    let converged = |s: &Status| Some(if s.converged { 1.0 } else { 0.0 });
    match config.mode {
        Mode::MarkovBaseline => {
            let m = MarkovParams::new(sp.gamma(), config.gamma_phi, p.omega, sp.delta);
            match steady_state(&m) {
                Ok(r) => Row {
                    point: p,
                    values: vec![Some(p.omega), Some(m.gamma), Some(m.gamma_phi), Some(r.rho_ee()), Some(r.rho_eg().re), Some(r.rho_eg().im)],
                    status: Status::ok(),
                },
                Err(e) => Row {
                    point: p,
                    values: vec![Some(p.omega), Some(m.gamma), Some(m.gamma_phi), None, None, None],
                    status: Status::failed(e),
                },
            }
        }
        Mode::SteadyState | Mode::Sweep | Mode::Nss => {
            let head = vec![Some(p.omega), Some(p.tau), Some(p.phi)];
            match steady_state_nm(&sp, &np) {
                Ok(ss) => {
                    let r = ss.state;
                    let mut status = Status { converged: ss.converged, truncation_limited: ss.truncation_limited, error: None };
                    let n = if p.omega > 0.0 {
                        match nss(&r, p.omega, &NssOptions::default()) {
                            Ok(n) => Some(n.value),
                            Err(e) => {
                                status.error = Some(e.to_string());
                                None
                            }
                        }
                    } else {
                        None
                    };
                    let [x, y, z] = r.bloch();
                    let mut values = head;
                    values.extend([Some(r.rho_ee()), Some(r.rho_eg().re), Some(r.rho_eg().im), Some(x), Some(y), Some(z), n]);
                    values.push(converged(&status));
                    values.push(Some(ss.cum_discarded));
                    Row { point: p, values, status }
                }
                Err(e) => {
                    let mut values = head;
                    values.extend([None; 9]);
                    Row { point: p, values, status: Status::failed(e) }
                }
            }
        }
        Mode::Blp => match blp(&sp, &np, blp_stride(config, &np, p)) {
            Ok(b) => {
                let status = Status { converged: b.converged, truncation_limited: b.truncation_limited, error: None };
                Row { point: p, values: vec![Some(p.omega), Some(p.tau), Some(p.phi), Some(b.value), converged(&status)], status }
            }
            Err(e) => Row { point: p, values: vec![Some(p.omega), Some(p.tau), Some(p.phi), None, None], status: Status::failed(e) },
        },
        Mode::GammaEff => {
            let head = vec![Some(p.omega), Some(p.tau), Some(p.phi)];
            match steady_state_nm(&sp, &np) {
                Ok(ss) => {
                    let mut status = Status { converged: ss.converged, truncation_limited: ss.truncation_limited, error: None };
                    let g = match effective_decay_rate_of(&ss.trajectory) {
                        Ok(g) => Some(g),
                        Err(e) => {
                            status.error = Some(e.to_string());
                            None
                        }
                    };
                    let mut values = head;
                    values.extend([g, Some(ss.state.rho_ee()), converged(&status)]);
                    Row { point: p, values, status }
                }
                Err(e) => {
                    let mut values = head;
                    values.extend([None; 3]);
                    Row { point: p, values, status: Status::failed(e) }
                }
            }
        }
    }
}

/// Computes every grid point, in parallel, and returns rows in grid order.
pub fn execute(config: &RunConfig) -> Vec<Row> {
    config.points().into_par_iter().map(|p| compute(config, p)).collect()
}

/// CSV text: a `#` block with all resolved settings, the header, then one
/// line per row. Contains nothing run-dependent beyond the results.
pub fn render_csv(config: &RunConfig, rows: &[Row]) -> String {
    let mut out = String::new();
    writeln!(out, "# nmss {}", env!("CARGO_PKG_VERSION")).unwrap();
    for (k, v) in config.resolved_entries() {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    writeln!(out, "{}", columns(config.mode).join(",")).unwrap();
    for row in rows {
        let mut cells: Vec<String> = row.values.iter().map(|v| v.map_or(String::new(), |x| format!("{x:.10e}"))).collect();
        cells.push(row.status.label());
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

#[derive(Serialize)]
struct Meta<'a> {
    software: &'static str,
    version: &'static str,
    mode: Mode,
    settings: serde_json::Map<String, serde_json::Value>,
    wall_time_seconds: f64,
    points: Vec<MetaPoint<'a>>,
}

#[derive(Serialize)]
struct MetaPoint<'a> {
    #[serde(flatten)]
    point: Point,
    #[serde(flatten)]
    status: &'a Status,
}

pub fn render_meta(config: &RunConfig, rows: &[Row], wall_time_seconds: f64) -> String {
    let settings = config
        .resolved_entries()
        .into_iter()
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect();
    let meta = Meta {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: config.mode,
        settings,
        wall_time_seconds,
        points: rows.iter().map(|r| MetaPoint { point: r.point, status: &r.status }).collect(),
    };
    serde_json::to_string_pretty(&meta).expect("metadata is always serializable")
}

/// Paths written for an output prefix.
pub fn output_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let s = prefix.as_os_str().to_string_lossy();
    (PathBuf::from(format!("{s}.csv")), PathBuf::from(format!("{s}.meta.json")))
}

/// Runs the configuration and writes `<prefix>.csv` and
/// `<prefix>.meta.json`. Only I/O failures are errors; numerical problems
/// end up in the status column.
pub fn run(config: &RunConfig, prefix: &Path) -> std::io::Result<Vec<Row>> {
    let start = Instant::now();
    let rows = execute(config);
    let (csv, meta) = output_paths(prefix);
    std::fs::write(&csv, render_csv(config, &rows))?;
    std::fs::write(&meta, render_meta(config, &rows, start.elapsed().as_secs_f64()))?;
    Ok(rows)
}
