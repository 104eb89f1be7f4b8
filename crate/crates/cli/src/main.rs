//! curveflow: configuration-driven experiments on the three non-local
//! curvature flows, with built-in presets for the identity, inequality,
//! blow-up, decay, convergence, and stationarity suites.
//!
//! Exit codes: 0 all selected checks passed, 1 at least one check failed,
//! 2 usage, configuration, or execution error.

mod config;
mod plot;
mod runner;

use clap::{ArgGroup, Parser, Subcommand};
use config::{preset_config, ExperimentConfig, PRESET_NAMES};
use curveflow_core::report::VerdictDoc;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "curveflow", version, about = "Non-local curvature flow experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file or a named preset.
    #[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
    Run {
        /// Experiment config file (JSON).
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Built-in experiment; `--preset list` prints the catalogue.
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
        /// Output directory (overrides the config and $CURVEFLOW_OUT).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the stored verdict of a completed run directory.
    Report { dir: PathBuf },
    /// Render a run's trajectory.csv into plot.svg.
    Plot { dir: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, preset, out } => cmd_run(config, preset, out.as_deref()),
        Command::Report { dir } => cmd_report(&dir),
        Command::Plot { dir } => cmd_plot(&dir),
    };
    std::process::exit(code);
}

fn cmd_run(config: Option<PathBuf>, preset: Option<String>, out: Option<&Path>) -> i32 {
    let config = match (config, preset) {
        (Some(path), None) => match load_config(&path) {
            Ok(c) => c,
            Err(message) => {
                eprintln!("error: {message}");
                return 2;
            }
        },
        (None, Some(name)) => {
            if name == "list" {
                for p in PRESET_NAMES {
                    println!("{p}");
                }
                return 0;
            }
            match preset_config(&name) {
                Some(c) => c,
                None => {
                    eprintln!(
                        "error: unknown preset '{name}'; available: {}",
                        PRESET_NAMES.join(", ")
                    );
                    return 2;
                }
            }
        }
        // clap's arg group enforces exactly one source.
        _ => unreachable!(),
    };

    match runner::run(&config, out) {
        Ok(outcome) => {
            let mut text = Vec::new();
            if outcome.verdict.write_summary(&mut text).is_ok() {
                print!("{}", String::from_utf8_lossy(&text));
            }
            println!("artifacts: {}", outcome.out_dir.display());
            if outcome.verdict.all_pass() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: run '{}' aborted: {e}", config.name);
            2
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    // serde_json reports the offending line/column and field.
    serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

fn cmd_report(dir: &Path) -> i32 {
    let path = dir.join("verdict.json");
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return 2;
        }
    };
    let verdict: VerdictDoc = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    };
    let mut out = Vec::new();
    if verdict.write_summary(&mut out).is_ok() {
        print!("{}", String::from_utf8_lossy(&out));
    }
    if verdict.all_pass() {
        0
    } else {
        1
    }
}

fn cmd_plot(dir: &Path) -> i32 {
    match plot::plot_run(dir) {
        Ok(path) => {
            println!("wrote {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
