//! `tolrerm`: run, validate and list experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tolrerm_cli::{execute, load_config, CliError};
use tolrerm_core::experiments::Experiment;

#[derive(Parser)]
#[command(name = "tolrerm", version, about = "Tolerant robust learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set params.trials=100`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List experiment names.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<22}{}", e.name(), e.summary());
            }
            Ok(0)
        }
        Command::Validate { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(0)
        }
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let outcome = execute(&cfg)?;
            for c in &outcome.output.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!("wall clock {:.3} s", outcome.elapsed.as_secs_f64());
            Ok(if outcome.passed() { 0 } else { 1 })
        }
    }
}
