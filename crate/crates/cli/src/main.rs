use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nmss_cli::{parse_config_with_mode, run, Mode};

/// Steady states and non-Markovianity of a driven two-level system with
/// time-delayed coherent feedback.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `mode` key.
    #[arg(long)]
    mode: Option<Mode>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::FAILURE;
        }
    };
    let config = match parse_config_with_mode(&text, args.mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::FAILURE;
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let prefix = args.out.or_else(|| config.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("nmss"));
    match run(&config, &prefix) {
        Ok(rows) => {
            let flagged = rows.iter().filter(|r| r.status.label() != "ok").count();
            eprintln!("{} rows written to {}.csv ({flagged} flagged)", rows.len(), prefix.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", prefix.display());
            ExitCode::FAILURE
        }
    }
}
