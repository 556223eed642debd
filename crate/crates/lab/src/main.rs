//! `meanfield-lab`: experiment runner for the mean-field particle
//! laboratory.
//!
//! Exit codes of `run`: 0 all pass criteria hold, 1 run completed but a
//! criterion failed, 2 configuration rejected, 3 capacity or numerical
//! failure inside a scenario.

use clap::{Parser, Subcommand};
use meanfield::io;
use meanfield::transport::w1_exact;
use meanfield_lab::config::{ExperimentConfig, Scenario};
use meanfield_lab::{scenarios, RunManifest};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "meanfield-lab", version, about = "Mean-field particle dynamics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run { config: PathBuf },
    /// List scenarios and the statement each one verifies.
    List,
    /// Exact W1 distance between two point-cloud CSV files.
    W1 {
        a: PathBuf,
        b: PathBuf,
        /// Write the optimal plan as CSV (source_idx,target_idx,mass).
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

fn init_threads() {
    if let Ok(value) = std::env::var("MEANFIELD_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (scenario, what) in Scenario::all() {
                println!("{:18} {}", scenario.name(), what);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config } => run_command(&config),
        Command::W1 { a, b, plan } => w1_command(&a, &b, plan.as_deref()),
    }
}

fn run_command(path: &std::path::Path) -> ExitCode {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::from_bytes(&bytes) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {}:{msg}", path.display());
            return ExitCode::from(2);
        }
    };
    match scenarios::run(&cfg) {
        Ok(outcome) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            let manifest = RunManifest::new(cfg.scenario.name(), &bytes, cfg.seed, outcome.pass);
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            if let Err(e) = std::fs::write(cfg.output.join("manifest.json"), json) {
                eprintln!("error: cannot write manifest: {e}");
                return ExitCode::from(3);
            }
            println!(
                "{}: {}",
                cfg.scenario.name(),
                if outcome.pass { "PASS" } else { "FAIL" }
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn w1_command(a: &std::path::Path, b: &std::path::Path, plan: Option<&std::path::Path>) -> ExitCode {
    let mu = match io::read_measure_csv(a) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let nu = match io::read_measure_csv(b) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match w1_exact(&mu, &nu) {
        Ok((distance, transport_plan)) => {
            println!("{distance}");
            if let Some(out) = plan {
                let mut body = String::from("source_idx,target_idx,mass\n");
                for (i, j, m) in &transport_plan.entries {
                    let _ = writeln!(body, "{i},{j},{m}");
                }
                if let Err(e) = std::fs::write(out, body) {
                    eprintln!("error: cannot write plan: {e}");
                    return ExitCode::from(3);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
