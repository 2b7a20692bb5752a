use std::process::Command;

use nmss_cli::{execute, parse_config, render_csv, run};

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn markov_baseline_traces_coherence_bound() {
    let c = parse_config("mode = markov-baseline\ngamma = 1\nomegas = 0.05:4:80\n").unwrap();
    let rows = execute(&c);
    let csv = render_csv(&c, &rows);
    let lines = body(&csv);
    assert_eq!(lines[0], "omega,gamma,gamma_phi,rho_ee,re_rho_eg,im_rho_eg,status");
    assert_eq!(lines.len(), 81);
    let max = rows
        .iter()
        .map(|r| r.values[4].unwrap().hypot(r.values[5].unwrap()))
        .fold(0.0, f64::max);
    assert!(max <= 0.125f64.sqrt() + 1e-12 && max > 0.35, "{max}");
    assert!(rows.iter().all(|r| r.status.label() == "ok"));
}

const QUICK: &str = "gamma = 1\ntau = 0.1\nd_max = 8\nt_max = 12\n";

#[test]
fn sweep_rows_follow_grid_order_and_repeat_exactly() {
    let c = parse_config(&format!("mode = sweep\nomegas = 1, 0.5\n{QUICK}")).unwrap();
    let a = render_csv(&c, &execute(&c));
    let b = render_csv(&c, &execute(&c));
    assert_eq!(a, b);
    let lines = body(&a);
    assert!(lines[0].starts_with("omega,tau,phi,rho_ee"));
    assert!(lines[0].ends_with("discarded_weight,status"));
    assert!(lines[1].starts_with("1.0000000000e0,"));
    assert!(lines[2].starts_with("5.0000000000e-1,"));
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 13);
    }
}

#[test]
fn unconverged_points_are_flagged_not_dropped() {
    let c = parse_config(&format!("mode = gamma-eff\nomega = 0.5\n{QUICK}ss_tol = 1e-9\n")).unwrap();
    let rows = execute(&c);
    assert_eq!(rows.len(), 1);
    assert!(!rows[0].status.converged);
    assert!(rows[0].status.label().contains("not_converged"), "{}", rows[0].status.label());
}

#[test]
fn blp_mode_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("blp");
    let c = parse_config(&format!("mode = blp\nomega = 1\n{QUICK}")).unwrap();
    run(&c, &prefix).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("blp.csv")).unwrap();
    assert_eq!(body(&csv)[0], "omega,tau,phi,blp_n,converged,status");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("blp.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["mode"], "blp");
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(meta["settings"]["d_max"], "8");
    assert_eq!(meta["points"].as_array().unwrap().len(), 1);
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "mode = nss\ngamma = 1\nomegas = 0.5, 1\n# markov limit\ntau = 0\nd_max = 8\nt_max = 20\n").unwrap();
    let prefix = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_nmss"))
        .args(["--config", cfg.to_str().unwrap(), "--mode", "markov-baseline", "--threads", "1", "--out"])
        .arg(&prefix)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(csv.contains("# mode = markov-baseline"));
    assert_eq!(body(&csv).len(), 3);

    std::fs::write(&cfg, "mode = nss\ngamma = 1\nomega = 1\ntau = 1\nbogus = 2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nmss")).args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("bogus"), "{err}");
}
